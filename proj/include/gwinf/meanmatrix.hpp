#pragma once

#include <span>
#include <vector>

#include "gwinf/model.hpp"

namespace gwinf {

struct TruncatedMeanMatrix {
    int N = 0;
    std::vector<double> entries;  // row-major N x N
    double tail_bound = 0.0;      // sup_i kernel mass beyond the truncation
    TailPolicy policy = TailPolicy::Discard;
    double row_sum_bound = 0.0;   // W with sup_i M_i <= W

    double operator()(int i, int j) const { return entries[std::size_t(i) * N + j]; }
    double& at(int i, int j) { return entries[std::size_t(i) * N + j]; }

    std::vector<double> multiply_right(std::span<const double> x) const;  // M x
    std::vector<double> multiply_left(std::span<const double> x) const;   // x M
};

TruncatedMeanMatrix build_truncated(const Model& model);
TruncatedMeanMatrix build_truncated(const ModelSpec& spec);

struct EigenSystem {
    std::vector<double> v;  // left, v M = rho v, sum v = 1
    std::vector<double> u;  // right, M u = rho u, v.u = 1
    double U = 0.0;         // sup_i u_i
    double rho = 0.0;
    double residual_left = 0.0;   // ||vM - rho v||_inf
    double residual_right = 0.0;  // ||Mu - rho u||_inf
    int iterations = 0;
};

// Power iteration on M and its transpose with per-step renormalization.
// Throws std::runtime_error on non-convergence (carrying the last residual)
// and std::invalid_argument when the truncation is not irreducible.
EigenSystem eigen_pair(const TruncatedMeanMatrix& M, double tol = 1e-13, int max_iter = 20000);

bool is_irreducible(const TruncatedMeanMatrix& M);
bool is_aperiodic(const TruncatedMeanMatrix& M);

struct RadiusDiagnostic {
    std::vector<double> r_n;  // (M^n)_{ij}^{-1/n}, NaN while the entry is zero
    double R = 0.0;           // difference-quotient extrapolation of the limit
    double confidence_width = 0.0;
};

// Diagnostic sequence for the common convergence radius, computed in the
// log domain so deep powers neither underflow nor overflow.
RadiusDiagnostic convergence_radius(const TruncatedMeanMatrix& M, int i, int j, int n_max);

enum class Criticality { Sub, Critical, Super };

struct Classification {
    Criticality criticality = Criticality::Critical;
    bool conclusive = true;  // false when rho sits in the band but residuals are large
    bool positivity = false; // proxy: scaled powers stabilize above a floor
    double rho = 0.0;
};

Classification classify(const TruncatedMeanMatrix& M, const EigenSystem& es, int n_max = 200);

// M^n with entries rescaled to max 1; log_scale holds the removed factor.
struct ScaledMatrixPower {
    std::vector<double> entries;
    double log_scale = 0.0;
    int N = 0;
    double value(int i, int j) const {
        return entries[std::size_t(i) * N + j] * std::exp(log_scale);
    }
};
ScaledMatrixPower matrix_power_scaled(const TruncatedMeanMatrix& M, int n);

struct ClassTailEntry {
    int n0;
    double raw;     // sup_i sum_{j>n0} M_ij
    double scaled;  // divided by M_i
};
struct TruncTailEntry {
    long long K;
    double value;  // sup_i E[Z_i; Z_i > K] / M_i
};

struct ClassReport {
    bool irreducible = false;
    bool aperiodic = false;
    double R_estimate = 0.0;
    double R_width = 0.0;
    Criticality criticality = Criticality::Critical;
    bool conclusive = true;
    bool positivity = false;
    double U = 0.0;
    std::vector<ClassTailEntry> cond_iii_tail;
    std::vector<TruncTailEntry> cond_iii_trunc;
    double C_iv = 0.0;  // max_ij M_ij / (u_i v_j)
    int m_iv = -1;      // smallest m with min_j (M^m)_{1j} / v_j > 0
    double c_iv = 0.0;  // largest such lower-bound constant seen
    double row_bound_C = 0.0;  // max_{i, n <= n_max} M_i^(n) / u_i
    double frak_m = 0.0;       // C_iv * U
    bool cond_iii_ok = false;
    bool cond_iv_ok = false;
    bool in_m1 = false;
    bool in_m10 = false;
};

// Fills every report field; never throws on a failed condition.
ClassReport check_class_m1(const Model& model, const TruncatedMeanMatrix& M,
                           const EigenSystem& es);

struct RowBoundResult {
    double bound = 0.0;                   // max_{i, n <= n_max} M_i^(n) / u_i
    bool nonincreasing_after_burnin = true;
    std::vector<double> sup_over_i;       // per n
};
RowBoundResult uniform_row_bound(const TruncatedMeanMatrix& M, const EigenSystem& es, int n_max);

} // namespace gwinf
