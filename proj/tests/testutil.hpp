#pragma once

// Test-only oracles and model builders. The solvers here stay independent
// of the production paths they certify.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "gwinf/meanmatrix.hpp"
#include "gwinf/model.hpp"

namespace gwtest {

using namespace gwinf;

// Dense partial-pivot Gaussian elimination for A x = b.
inline std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b) {
    const int N = static_cast<int>(b.size());
    for (int col = 0; col < N; ++col) {
        int piv = col;
        for (int r = col + 1; r < N; ++r)
            if (std::abs(A[std::size_t(r) * N + col]) > std::abs(A[std::size_t(piv) * N + col]))
                piv = r;
        if (A[std::size_t(piv) * N + col] == 0.0)
            throw std::runtime_error("solve_dense: singular matrix");
        if (piv != col) {
            for (int j = 0; j < N; ++j)
                std::swap(A[std::size_t(piv) * N + j], A[std::size_t(col) * N + j]);
            std::swap(b[piv], b[col]);
        }
        for (int r = col + 1; r < N; ++r) {
            const double f = A[std::size_t(r) * N + col] / A[std::size_t(col) * N + col];
            if (f == 0.0) continue;
            for (int j = col; j < N; ++j)
                A[std::size_t(r) * N + j] -= f * A[std::size_t(col) * N + j];
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(N);
    for (int r = N - 1; r >= 0; --r) {
        double acc = b[r];
        for (int j = r + 1; j < N; ++j) acc -= A[std::size_t(r) * N + j] * x[j];
        x[r] = acc / A[std::size_t(r) * N + r];
    }
    return x;
}

// Left-eigenvector oracle: v M = v with sum v = 1, as a linear system with
// the last equation replaced by the normalization.
inline std::vector<double> stationary_by_linear_solve(const TruncatedMeanMatrix& M) {
    const int N = M.N;
    std::vector<double> A(std::size_t(N) * N), b(N, 0.0);
    b[N - 1] = 1.0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            A[std::size_t(i) * N + j] = M(j, i) - (i == j ? 1.0 : 0.0);
    for (int j = 0; j < N; ++j) A[std::size_t(N - 1) * N + j] = 1.0;
    return solve_dense(std::move(A), std::move(b));
}

// Scalar survival recursion q_{k+1} = q_k - C q_k^{1+alpha} in extended
// precision; exact for rank-one kernels.
inline std::vector<long double> scalar_recursion(long double C, long double alpha, int n_max) {
    std::vector<long double> q(n_max + 1);
    q[0] = 1.0L;
    for (int n = 0; n < n_max; ++n) q[n + 1] = q[n] - C * powl(q[n], 1.0L + alpha);
    return q;
}

// Wilson-Hilferty chi-square quantile; z = 3.090232 gives the 0.999 level.
inline double chi2_quantile(double df, double z) {
    const double t = 2.0 / (9.0 * df);
    const double v = 1.0 - t + z * std::sqrt(t);
    return df * v * v * v;
}

// Alternating-rate geometric kernel; the left eigenvector tail dominates
// every row tail, which is what the class conditions need.
inline ModelSpec chain_spec(double alpha, double c, int N,
                            TailPolicy policy = TailPolicy::Discard) {
    ModelSpec s;
    s.family = Family::SlackKernel;
    s.alpha = alpha;
    s.slack_coeffs = {c};
    s.kernel = GeometricKernel{{0.3, 0.5}};
    s.truncation_N = N;
    s.tail_policy = policy;
    s.name = "chain";
    return s;
}

// All kernel rows equal: the vector iteration collapses to the scalar
// recursion with C = sum v_i c_i.
inline ModelSpec rank1_spec(double alpha, std::vector<double> coeffs, int N = 128,
                            TailPolicy policy = TailPolicy::Discard) {
    ModelSpec s;
    s.family = Family::SlackKernel;
    s.alpha = alpha;
    s.slack_coeffs = std::move(coeffs);
    s.kernel = GeometricKernel{{0.5}};
    s.truncation_N = N;
    s.tail_policy = policy;
    s.name = "rank1";
    return s;
}

// Single type, alpha = 1, c = 1/2: offspring 0 or 2 with probability 1/2.
inline ModelSpec kolmogorov_spec() {
    ModelSpec s;
    s.family = Family::SlackKernel;
    s.alpha = 1.0;
    s.slack_coeffs = {0.5};
    s.kernel = ExplicitKernel{{{1.0}}};
    s.truncation_N = 1;
    s.tail_policy = TailPolicy::Discard;
    s.name = "single_kolmogorov";
    return s;
}

// Every type-i particle sends its children to type i+1: mass escapes past
// any finite window, the canonical tail-condition counterexample.
inline ModelSpec shift_spec(int N, double alpha = 1.0, double c = 0.25) {
    ModelSpec s;
    s.family = Family::SlackKernel;
    s.alpha = alpha;
    s.slack_coeffs = {c};
    ExplicitKernel k;
    for (int i = 0; i < N; ++i) {
        std::vector<double> row(i + 2, 0.0);
        row[i + 1] = 1.0;
        k.rows.push_back(std::move(row));
    }
    s.kernel = std::move(k);
    s.truncation_N = N;
    s.tail_policy = TailPolicy::ProjectLast;
    s.name = "shift";
    return s;
}

// Exactly one child of the same type: F(s) = M s.
inline ModelSpec linear_identity_spec(int N) {
    ModelSpec s;
    s.family = Family::Linear;
    ExplicitKernel k;
    for (int i = 0; i < N; ++i) {
        std::vector<double> row(i + 1, 0.0);
        row[i] = 1.0;
        k.rows.push_back(std::move(row));
    }
    s.kernel = std::move(k);
    s.truncation_N = N;
    s.tail_policy = TailPolicy::Discard;
    s.name = "linear_identity";
    return s;
}

} // namespace gwtest
