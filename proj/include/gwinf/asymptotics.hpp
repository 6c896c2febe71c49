#pragma once

#include <span>
#include <string>
#include <vector>

#include "gwinf/gfiter.hpp"

namespace gwinf {

struct AlphaFit {
    double alpha_hat = 0.0;
    std::vector<double> ell_values;  // Phi(x) / x^(1+alpha_hat) on the grid
    double fit_rmse = 0.0;           // log-log regression residual
    std::vector<double> grid;        // x values actually used
    int excluded = 0;                // nonpositive samples dropped
};

// Log-log least squares: slope of log Phi against log x is 1 + alpha.
// Throws when fewer than 10 positive samples remain or the usable grid
// spans less than two decades.
AlphaFit fit_alpha(const PhiCurve& curve);

enum class PredictMethod { Auto, ClosedForm, Quadrature };

struct SurvivalPrediction {
    std::vector<long long> n;
    std::vector<double> q_pred;
    std::vector<double> ell1_proxy;  // n^(1/alpha) q_pred(n)
    PredictMethod method = PredictMethod::ClosedForm;
    double alpha_used = 0.0;
    double C_used = 0.0;
};

// Inverts the cumulative relation  integral_y^{q0} dx/Phi(x) = n  for each
// n. With constant ell the antiderivative is elementary
// (y = (q0^-alpha + alpha C n)^(-1/alpha)); otherwise bisection over y with
// adaptive quadrature of 1/Phi on a log axis.
SurvivalPrediction predict_q(const PhiCurve& curve, double q0, std::span<const long long> n_grid,
                             PredictMethod method = PredictMethod::Auto);

// E e^{-t xi} = 1 - (1 + t^-alpha)^(-1/alpha); the conditional limit law's
// scalar transform. Decreases from 1 at t -> 0+ to 0 at t -> infinity.
double xi_laplace(double alpha, double t);

// Limit of E[e^{-(lambda, Z(n)) q(n)} | survival]; depends on lambda only
// through (v, lambda). At (v, lambda) = 0 the transform is identically 1.
double limit_laplace(std::span<const double> v, double alpha, std::span<const double> lambda);

struct YaglomTransform {
    std::vector<double> v;
    double alpha = 1.0;
    double phi_limit(std::span<const double> lambda) const {
        return limit_laplace(v, alpha, lambda);
    }
    double xi(double t) const { return xi_laplace(alpha, t); }
};

struct YaglomMeasurement {
    int start_type = 0;  // 0-based
    std::vector<double> lambda;
    double q_n = 0.0;   // scaling used by the empirical transform
    double value = 0.0; // empirical conditional Laplace estimate
    double ci_lo = 0.0, ci_hi = 0.0;
};

struct ClaimResult {
    std::string claim;
    std::string relation;
    double measured = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
};

struct TheoremReport {
    bool hypothesis_ok = true;
    std::string gate_note;
    std::vector<ClaimResult> claims;
    std::vector<std::string> gaps;
    bool all_pass() const {
        if (!hypothesis_ok) return false;
        for (const auto& c : claims)
            if (!c.pass) return false;
        return !claims.empty();
    }
};

// Assembles the end-to-end checks: stability of n^(1/alpha) q(n), uniform
// ratio at the final generation, and the conditional limit law against the
// Monte Carlo estimates (value and independence of the start type).
// Missing inputs are flagged as gaps rather than errors.
TheoremReport verify_theorem(const Model& model, const EigenSystem& es,
                             const IterationTrace* trace, const AlphaFit* fit,
                             std::span<const YaglomMeasurement> mc,
                             double yaglom_tol = 0.05);

} // namespace gwinf
