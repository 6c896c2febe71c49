#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gwinf/rng.hpp"

namespace gwinf {

enum class Family { SlackKernel, Tabulated, Linear };
enum class TailPolicy { Discard, ProjectLast };

// Type-assignment kernel over the countable type space. Geometric rows have
// a closed-form tail; explicit rows list the full (pre-truncation) kernel.
// Entries shorter than the type count are cycled.
struct GeometricKernel {
    std::vector<double> rho;
};
struct ExplicitKernel {
    std::vector<std::vector<double>> rows;
};
using Kernel = std::variant<GeometricKernel, ExplicitKernel>;

// One atom of a tabulated offspring law: with probability `prob` the parent
// leaves `count` children of each listed (0-based) type.
struct TabulatedOutcome {
    double prob = 0.0;
    std::vector<std::pair<int, long long>> children;
};
struct TabulatedRow {
    std::vector<TabulatedOutcome> outcomes;
};

struct ModelSpec {
    Family family = Family::SlackKernel;
    double alpha = 1.0;
    std::vector<double> slack_coeffs;   // cycled over types
    Kernel kernel = GeometricKernel{};
    int truncation_N = 2;
    TailPolicy tail_policy = TailPolicy::Discard;
    std::vector<TabulatedRow> tabulated_rows;  // cycled over types (Tabulated only)
    std::string name;                          // optional label carried into reports
};

struct ValidationReport {
    std::vector<std::string> violations;
    // F == Ms (every particle exactly one child). Such laws are valid
    // processes but rejected by the asymptotic machinery.
    bool linear_excluded = false;
    bool valid() const { return violations.empty(); }
};

ValidationReport validate_spec(const ModelSpec& spec);

// Child-count distribution p_k of the slack family,
//   psi(x) = x + c (1-x)^(1+alpha),
// with p_0 = c, p_1 = 1 - c(1+alpha), p_2 = c alpha(1+alpha)/2 and
// p_{k+1} = p_k (k-1-alpha)/(k+1) for k >= 2.
struct ChildCountPmf {
    std::vector<double> p;   // p_0 .. p_{k_max}
    double tail_mass = 0.0;  // 1 - sum of table entries
    double alpha = 1.0;
    double c = 0.0;
};

ChildCountPmf child_count_pmf(const ModelSpec& spec, int type_index, int k_max);

// Compiled per-type offspring law. Immutable after Model::compile; safe to
// share across threads. Sampling takes a caller-owned stream.
struct OffspringLaw {
    int type_index = 0;
    Family family = Family::SlackKernel;
    double alpha = 1.0;
    double c = 0.0;

    int trunc_N = 0;
    TailPolicy policy = TailPolicy::Discard;

    std::vector<double> mean_row;    // truncated row of the mean matrix, policy applied
    double dropped_mass = 0.0;       // kernel mass beyond truncation removed by Discard
    double full_row_sum = 1.0;       // expected children of the untruncated law (M_i)

    double geo_rho = -1.0;           // analytic geometric row when > 0
    std::vector<double> type_cdf;    // inverse-CDF table over the kernel row otherwise
    std::vector<double> full_mean_row;  // untruncated mean row (empty when geometric)
    std::shared_ptr<const std::vector<double>> count_pmf;  // slack child-count table
    std::vector<TabulatedOutcome> outcomes;                // tabulated, policy applied
    std::vector<double> outcome_cdf;

    // F_i(s) for s in [0,1]^N. Throws std::domain_error outside the cube.
    double pgf(std::span<const double> s) const;

    // 1 - F_i(1 - Q) given t = mean_row . Q, evaluated without forming 1-Q.
    double q_image(double t, std::span<const double> Q) const;

    // Concavity excess E(z) = (M z)_i - (1 - F_i(1 - z)) given t = (M z)_i.
    double excess(double t, std::span<const double> z) const;

    long long draw_child_count(RngStream& rng) const;
    // 0-based child type; -1 when the child falls beyond the truncation
    // under the Discard policy.
    int draw_child_type(RngStream& rng) const;
};

double pgf_eval(const OffspringLaw& law, std::span<const double> s);
const std::vector<double>& mean_row(const OffspringLaw& law);

// One offspring vector as sorted sparse (type, count) pairs.
std::vector<std::pair<int, long long>> sample_offspring(const OffspringLaw& law, RngStream& rng);

class Model {
public:
    // Validates and compiles. Throws std::invalid_argument with the joined
    // violation list when the spec is invalid.
    static Model compile(const ModelSpec& spec);

    int num_types() const { return N_; }
    const ModelSpec& spec() const { return spec_; }
    const OffspringLaw& law(int i) const { return laws_[i]; }
    const std::vector<OffspringLaw>& laws() const { return laws_; }
    bool is_linear() const { return linear_; }

    // sup_i of the truncated matrix mass in columns beyond n0 (exact closed
    // form for geometric rows, summed otherwise). Zero at n0 = N under
    // Discard: the truncated process has no mass there.
    double truncated_tail_sup(int n0) const;

    // sup_i of the untruncated kernel mass beyond n0, raw and divided by
    // the full row sum M_i. This is the quantity whose decay in n0 the
    // class checks monitor.
    double kernel_tail_sup(int n0, bool scaled) const;

    // Mass removed by the truncation itself (sup_i over types), used to
    // bracket truncation error.
    double truncation_error_bound() const;

    // One generation in the survival domain: Qnext = 1 - F(1 - Q),
    // computed cancellation-free. tbuf receives M.Q as a side product.
    void qstep(std::span<const double> Q, std::span<double> tbuf, std::span<double> Qnext) const;

    // sum_i v_i c_i, the coefficient of x^(1+alpha) in the slack family's
    // exact survival deficit.
    double slack_phi_coeff(std::span<const double> v) const;

private:
    ModelSpec spec_;
    int N_ = 0;
    bool linear_ = false;
    std::vector<OffspringLaw> laws_;
};

// sup over retained types of the truncated-matrix mass beyond N0 (the
// compile-free variant used by validation reports and tests).
double tail_mass(const ModelSpec& spec, int N0);

} // namespace gwinf
