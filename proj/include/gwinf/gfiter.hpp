#pragma once

#include <span>
#include <utility>
#include <vector>

#include "gwinf/meanmatrix.hpp"
#include "gwinf/model.hpp"

namespace gwinf {

// Evaluates Phi(x) = x - v . (1 - F(1 - x u)), branching exactly at xU = 1.
//
// The slack family with a stochastic kernel admits the closed form
// Phi(x) = (sum_i v_i c_i) x^(1+alpha); evaluating through that form keeps
// full relative precision at x values where the subtracted formulation has
// no correct digits left.
class PhiEvaluator {
public:
    PhiEvaluator(const Model& model, const EigenSystem& es);
    double operator()(double x) const;
    double slack_coeff() const { return C_; }  // sum v_i c_i (slack fast path)
    bool fast_path() const { return fast_; }

private:
    const Model* model_;
    const EigenSystem* es_;
    bool fast_ = false;
    double C_ = 0.0;
    double q_at_zero_ = 0.0;  // v . (1 - F(0)), the xU > 1 branch
    double vMu_ = 1.0;
    std::vector<double> Mu_;
};

double phi_of_x(const Model& model, const EigenSystem& es, double x);

struct PhiCurve {
    std::vector<double> x;
    std::vector<double> phi;
    double U = 1.0;
};

// 40 log-spaced samples on [x_min, min(1, 1/U)] unless overridden.
PhiCurve sample_phi_curve(const Model& model, const EigenSystem& es, int n_points = 40,
                          double x_min = 1e-8, double x_max = 0.0);

struct IterationTrace {
    int n_max = 0;
    std::vector<double> q;          // q(n; s), n = 0..n_max
    std::vector<double> sup_Q;      // max_i Q_i(n; s)
    std::vector<double> ratio_sup;  // max_i |Q_i / (u_i q) - 1|
    std::vector<double> B;          // q(n) - q(n+1), n = 0..n_max-1
    std::vector<double> phi_q;      // Phi(q(n))
    std::vector<double> Q_final;    // Q(n_max)
    int snapshot_stride = 0;
    std::vector<std::pair<int, std::vector<double>>> snapshots;  // (n, Q(n))
};

// Iterates Q -> 1 - F(1 - Q) on the truncation, one offspring-map pass per
// type per generation, recording the survival functionals at every step.
// s0 must lie in [0,1]^N with at least one component <= 1 - 1e-12.
IterationTrace iterate_generating(const Model& model, std::span<const double> s0, int n_max,
                                  const EigenSystem& es, int snapshot_stride = 0);

// The s = 0 specialization: Q_i(n) is the survival probability from e_i.
IterationTrace survival_curve(const Model& model, int n_max, const EigenSystem& es,
                              int snapshot_stride = 0);

struct RatioDiagnostic {
    std::vector<double> ratio_sup;
    int n0 = -1;  // first n from which the sup stays below threshold
    double threshold = 0.01;
};
RatioDiagnostic ratio_diagnostic(const IterationTrace& trace, double threshold = 0.01);

struct BDiagnostic {
    std::vector<double> b_over_phi;  // B(n)/Phi(q(n)), NaN where Phi vanishes
    std::vector<double> phi_ratio;   // Phi(q(n+1))/Phi(q(n))
};
BDiagnostic b_diagnostic(const IterationTrace& trace);

} // namespace gwinf
