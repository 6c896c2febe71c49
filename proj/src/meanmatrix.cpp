#include "gwinf/meanmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "gwinf/numeric.hpp"

namespace gwinf {

std::vector<double> TruncatedMeanMatrix::multiply_right(std::span<const double> x) const {
    std::vector<double> y(N, 0.0);
    for (int i = 0; i < N; ++i) {
        const double* row = entries.data() + std::size_t(i) * N;
        double acc = 0.0;
        for (int j = 0; j < N; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

std::vector<double> TruncatedMeanMatrix::multiply_left(std::span<const double> x) const {
    std::vector<double> y(N, 0.0);
    for (int i = 0; i < N; ++i) {
        const double* row = entries.data() + std::size_t(i) * N;
        const double xi = x[i];
        if (xi == 0.0) continue;
        for (int j = 0; j < N; ++j) y[j] += xi * row[j];
    }
    return y;
}

TruncatedMeanMatrix build_truncated(const Model& model) {
    TruncatedMeanMatrix M;
    M.N = model.num_types();
    M.entries.resize(std::size_t(M.N) * M.N);
    M.policy = model.spec().tail_policy;
    M.tail_bound = model.truncation_error_bound();
    double W = 0.0;
    for (int i = 0; i < M.N; ++i) {
        const auto& row = model.law(i).mean_row;
        std::copy(row.begin(), row.end(), M.entries.begin() + std::size_t(i) * M.N);
        W = std::max(W, model.law(i).full_row_sum);
    }
    M.row_sum_bound = W;
    return M;
}

TruncatedMeanMatrix build_truncated(const ModelSpec& spec) {
    return build_truncated(Model::compile(spec));
}

namespace {

// Reachability from every node, on the positive-entry digraph.
std::vector<std::vector<int>> adjacency(const TruncatedMeanMatrix& M) {
    std::vector<std::vector<int>> adj(M.N);
    for (int i = 0; i < M.N; ++i)
        for (int j = 0; j < M.N; ++j)
            if (M(i, j) > 0.0) adj[i].push_back(j);
    return adj;
}

bool reaches_all(const std::vector<std::vector<int>>& adj, int from) {
    std::vector<char> seen(adj.size(), 0);
    std::queue<int> q;
    q.push(from);
    seen[from] = 1;
    std::size_t count = 1;
    while (!q.empty()) {
        int a = q.front();
        q.pop();
        for (int b : adj[a])
            if (!seen[b]) {
                seen[b] = 1;
                ++count;
                q.push(b);
            }
    }
    return count == adj.size();
}

} // namespace

bool is_irreducible(const TruncatedMeanMatrix& M) {
    auto adj = adjacency(M);
    if (!reaches_all(adj, 0)) return false;
    // Reverse reachability closes the strong-connectivity check.
    std::vector<std::vector<int>> radj(M.N);
    for (int i = 0; i < M.N; ++i)
        for (int j : adj[i]) radj[j].push_back(i);
    return reaches_all(radj, 0);
}

bool is_aperiodic(const TruncatedMeanMatrix& M) {
    // Period = gcd over edges (a,b) of d(a)+1-d(b) with d = BFS distance
    // from node 0; valid on a strongly connected digraph.
    if (!is_irreducible(M)) return false;
    auto adj = adjacency(M);
    std::vector<int> dist(M.N, -1);
    std::queue<int> q;
    q.push(0);
    dist[0] = 0;
    while (!q.empty()) {
        int a = q.front();
        q.pop();
        for (int b : adj[a])
            if (dist[b] < 0) {
                dist[b] = dist[a] + 1;
                q.push(b);
            }
    }
    int g = 0;
    for (int a = 0; a < M.N; ++a)
        for (int b : adj[a]) g = std::gcd(g, std::abs(dist[a] + 1 - dist[b]));
    return g == 1;
}

EigenSystem eigen_pair(const TruncatedMeanMatrix& M, double tol, int max_iter) {
    const int N = M.N;
    for (int i = 0; i < N; ++i) {
        double rs = 0.0, cs = 0.0;
        for (int j = 0; j < N; ++j) {
            rs += M(i, j);
            cs += M(j, i);
        }
        if (rs == 0.0 || cs == 0.0)
            throw std::invalid_argument("eigen_pair: zero row or column, truncation reducible");
    }
    if (!is_irreducible(M))
        throw std::invalid_argument("eigen_pair: truncation not irreducible");

    std::vector<double> u(N, 1.0 / N), v(N, 1.0 / N);
    double rho = 1.0;
    double res_l = 0.0, res_r = 0.0;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        std::vector<double> Mu = M.multiply_right(u);
        std::vector<double> vM = M.multiply_left(v);
        const double su = std::accumulate(u.begin(), u.end(), 0.0);
        const double sMu = std::accumulate(Mu.begin(), Mu.end(), 0.0);
        rho = sMu / su;

        res_r = 0.0;
        for (int i = 0; i < N; ++i) res_r = std::max(res_r, std::abs(Mu[i] - rho * u[i]));
        res_l = 0.0;
        for (int i = 0; i < N; ++i) res_l = std::max(res_l, std::abs(vM[i] - rho * v[i]));

        const double nu = std::accumulate(Mu.begin(), Mu.end(), 0.0);
        const double nv = std::accumulate(vM.begin(), vM.end(), 0.0);
        for (int i = 0; i < N; ++i) {
            u[i] = Mu[i] / nu;
            v[i] = vM[i] / nv;
        }
        // Residuals are computed on the pre-normalization scale (sum 1),
        // so the absolute tolerance is meaningful.
        if (res_l <= tol && res_r <= tol) {
            ++iter;
            break;
        }
    }
    if (res_l > tol || res_r > tol) {
        std::ostringstream os;
        os << "eigen_pair: no convergence after " << max_iter
           << " iterations, residuals " << res_l << " / " << res_r;
        throw std::runtime_error(os.str());
    }

    EigenSystem es;
    // v . 1 = 1 by compensated renormalization.
    const double vs = compensated_sum(v);
    for (double& x : v) x /= vs;
    // u scaled so v . u = 1.
    double vu = compensated_dot(v, u);
    for (double& x : u) x /= vu;
    // For row-stochastic truncations the exact right eigenvector is the
    // all-ones vector; snap when the iterate agrees to rounding so later
    // algebra can rely on u being exactly constant.
    bool near_ones = true;
    for (double x : u)
        if (std::abs(x - 1.0) > 64 * std::numeric_limits<double>::epsilon()) {
            near_ones = false;
            break;
        }
    if (near_ones) std::fill(u.begin(), u.end(), 1.0);

    es.v = std::move(v);
    es.u = std::move(u);
    es.U = *std::max_element(es.u.begin(), es.u.end());
    std::vector<double> Mu = M.multiply_right(es.u);
    es.rho = compensated_dot(es.v, Mu);
    std::vector<double> vM = M.multiply_left(es.v);
    es.residual_left = 0.0;
    es.residual_right = 0.0;
    for (int i = 0; i < N; ++i) {
        es.residual_left = std::max(es.residual_left, std::abs(vM[i] - es.rho * es.v[i]));
        es.residual_right = std::max(es.residual_right, std::abs(Mu[i] - es.rho * es.u[i]));
    }
    for (int i = 0; i < N; ++i)
        if (!(es.v[i] > 0.0) || !(es.u[i] > 0.0))
            throw std::runtime_error("eigen_pair: eigenvector component not strictly positive");
    es.iterations = iter;
    return es;
}

RadiusDiagnostic convergence_radius(const TruncatedMeanMatrix& M, int i, int j, int n_max) {
    RadiusDiagnostic out;
    out.r_n.assign(n_max, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> x(M.N, 0.0);
    x[j] = 1.0;
    double log_scale = 0.0;
    std::vector<double> a(n_max, std::numeric_limits<double>::quiet_NaN());
    for (int n = 1; n <= n_max; ++n) {
        x = M.multiply_right(x);
        const double mx = max_abs(x);
        if (mx == 0.0)
            throw std::invalid_argument("convergence_radius: pair does not communicate");
        // Rescale before the entries drift out of double range.
        if (mx < 1e-120 || mx > 1e120) {
            for (double& t : x) t /= mx;
            log_scale += std::log(mx);
        }
        if (x[i] > 0.0) {
            const double an = std::log(x[i]) + log_scale;
            a[n - 1] = an;
            out.r_n[n - 1] = std::exp(-an / n);
        }
    }
    const int mid = n_max / 2;
    if (!(a[n_max - 1] == a[n_max - 1]) || !(a[mid - 1] == a[mid - 1]))
        throw std::invalid_argument("convergence_radius: entry vanished over the horizon");
    // a_n = n log(1/R) + log(u_i v_j) + o(1); the difference quotient kills
    // the constant and the reported width is the leftover constant's reach.
    const double slope = (a[n_max - 1] - a[mid - 1]) / double(n_max - mid);
    out.R = std::exp(-slope);
    const double intercept = a[n_max - 1] - slope * n_max;
    out.confidence_width = std::abs(intercept) / n_max;
    return out;
}

ScaledMatrixPower matrix_power_scaled(const TruncatedMeanMatrix& M, int n) {
    const int N = M.N;
    auto matmul = [N](const std::vector<double>& A, const std::vector<double>& B) {
        std::vector<double> C(std::size_t(N) * N, 0.0);
        for (int i = 0; i < N; ++i)
            for (int k = 0; k < N; ++k) {
                const double a = A[std::size_t(i) * N + k];
                if (a == 0.0) continue;
                const double* brow = B.data() + std::size_t(k) * N;
                double* crow = C.data() + std::size_t(i) * N;
                for (int j = 0; j < N; ++j) crow[j] += a * brow[j];
            }
        return C;
    };
    auto rescale = [](std::vector<double>& A, double& ls) {
        double mx = 0.0;
        for (double x : A) mx = std::max(mx, std::abs(x));
        if (mx > 0.0) {
            for (double& x : A) x /= mx;
            ls += std::log(mx);
        }
    };

    ScaledMatrixPower out;
    out.N = N;
    out.entries.assign(std::size_t(N) * N, 0.0);
    for (int i = 0; i < N; ++i) out.entries[std::size_t(i) * N + i] = 1.0;
    std::vector<double> base = M.entries;
    double base_ls = 0.0;
    rescale(base, base_ls);
    int e = n;
    while (e > 0) {
        if (e & 1) {
            out.entries = matmul(out.entries, base);
            out.log_scale += base_ls;
            rescale(out.entries, out.log_scale);
        }
        e >>= 1;
        if (e) {
            base = matmul(base, base);
            base_ls *= 2.0;
            rescale(base, base_ls);
        }
    }
    return out;
}

Classification classify(const TruncatedMeanMatrix& M, const EigenSystem& es, int n_max) {
    Classification c;
    c.rho = es.rho;
    constexpr double kBand = 1e-6;
    if (std::abs(es.rho - 1.0) <= kBand)
        c.criticality = Criticality::Critical;
    else if (es.rho < 1.0)
        c.criticality = Criticality::Sub;
    else
        c.criticality = Criticality::Super;
    c.conclusive = std::max(es.residual_left, es.residual_right) <= kBand;

    // Proxy for positive limits of M_ij^(n) rho^(-n): the (0,0) entry of the
    // scaled power must stay above a floor.
    auto P = matrix_power_scaled(M, n_max);
    const double scaled = std::exp(std::log(std::max(P.entries[0], 0.0)) + P.log_scale -
                                   n_max * std::log(es.rho));
    c.positivity = scaled > 1e-12;
    return c;
}

RowBoundResult uniform_row_bound(const TruncatedMeanMatrix& M, const EigenSystem& es,
                                 int n_max) {
    RowBoundResult out;
    std::vector<double> s(M.N, 1.0);  // row sums of M^0
    out.sup_over_i.reserve(n_max + 1);
    auto sup_ratio = [&](const std::vector<double>& x) {
        double m = 0.0;
        for (int i = 0; i < M.N; ++i) m = std::max(m, x[i] / es.u[i]);
        return m;
    };
    out.sup_over_i.push_back(sup_ratio(s));
    out.bound = out.sup_over_i[0];
    for (int n = 1; n <= n_max; ++n) {
        s = M.multiply_right(s);
        out.sup_over_i.push_back(sup_ratio(s));
        out.bound = std::max(out.bound, out.sup_over_i.back());
    }
    const int burn = std::max(1, n_max / 10);
    for (std::size_t n = burn + 1; n < out.sup_over_i.size(); ++n)
        if (out.sup_over_i[n] > out.sup_over_i[n - 1] * (1.0 + 1e-12)) {
            out.nonincreasing_after_burnin = false;
            break;
        }
    return out;
}

ClassReport check_class_m1(const Model& model, const TruncatedMeanMatrix& M,
                           const EigenSystem& es) {
    ClassReport rep;
    rep.irreducible = is_irreducible(M);
    rep.aperiodic = is_aperiodic(M);
    rep.U = es.U;

    if (rep.irreducible) {
        try {
            auto rd = convergence_radius(M, 0, 0, 500);
            rep.R_estimate = rd.R;
            rep.R_width = rd.confidence_width;
        } catch (const std::exception&) {
            rep.R_estimate = std::numeric_limits<double>::quiet_NaN();
        }
        auto cl = classify(M, es);
        rep.criticality = cl.criticality;
        rep.conclusive = cl.conclusive;
        rep.positivity = cl.positivity;
    }

    // Condition (iii), first part: kernel mass beyond n0.
    constexpr double kDecayThreshold = 1e-2;
    for (int n0 = 1; n0 <= M.N; n0 *= 2) {
        rep.cond_iii_tail.push_back(
            {n0, model.kernel_tail_sup(n0, false), model.kernel_tail_sup(n0, true)});
        if (n0 == M.N) break;
        if (n0 * 2 > M.N) {
            rep.cond_iii_tail.push_back(
                {M.N, model.kernel_tail_sup(M.N, false), model.kernel_tail_sup(M.N, true)});
            break;
        }
    }
    rep.cond_iii_ok = !rep.cond_iii_tail.empty() &&
                      rep.cond_iii_tail.back().scaled < kDecayThreshold;

    // Condition (iii), second part: sup_i E[Z_i; Z_i > K] / M_i over a K grid.
    const bool slack = model.spec().family == Family::SlackKernel;
    for (long long K = 1; K <= (1LL << 16); K *= 4) {
        double sup = 0.0;
        for (int i = 0; i < model.num_types(); ++i) {
            const auto& law = model.law(i);
            double val = 0.0;
            if (slack) {
                // E Z = 1, so the truncated expectation is 1 - sum_{k<=K} k p_k.
                const auto& p = *law.count_pmf;
                CompensatedSum head;
                for (long long k = 1; k < std::min<long long>(K + 1, p.size()); ++k)
                    head.add(double(k) * p[k]);
                if (K + 1 >= static_cast<long long>(p.size()) && law.alpha < 1.0) {
                    // Continue the ratio recursion past the table.
                    double pk = p.back();
                    for (long long k = p.size() - 1; k < K; ++k) {
                        pk *= (double(k) - 1.0 - law.alpha) / (double(k) + 1.0);
                        head.add(double(k + 1) * pk);
                        if (pk == 0.0) break;
                    }
                }
                val = std::max(0.0, 1.0 - head.value());
            } else if (model.spec().family == Family::Tabulated) {
                for (const auto& o : law.outcomes) {
                    long long total = 0;
                    for (auto [t, cnt] : o.children) total += cnt;
                    if (total > K) val += o.prob * double(total);
                }
                if (law.full_row_sum > 0.0) val /= law.full_row_sum;
            } else {
                val = K >= 1 ? 0.0 : law.full_row_sum;  // linear: one child always
            }
            sup = std::max(sup, val);
        }
        rep.cond_iii_trunc.push_back({K, sup});
    }
    const bool trunc_ok = rep.cond_iii_trunc.back().value < kDecayThreshold;
    rep.cond_iii_ok = rep.cond_iii_ok && trunc_ok;

    // Condition (iv): two-sided comparison with the outer product u v.
    rep.C_iv = 0.0;
    for (int i = 0; i < M.N; ++i)
        for (int j = 0; j < M.N; ++j)
            rep.C_iv = std::max(rep.C_iv, M(i, j) / (es.u[i] * es.v[j]));
    const int m_max = std::min(2 * M.N, 64);
    std::vector<double> w(M.N, 0.0);
    w[0] = 1.0;
    for (int m = 1; m <= m_max; ++m) {
        w = M.multiply_left(w);
        double cmin = std::numeric_limits<double>::infinity();
        for (int j = 0; j < M.N; ++j) cmin = std::min(cmin, w[j] / es.v[j]);
        if (cmin > 0.0) {
            if (rep.m_iv < 0) rep.m_iv = m;
            rep.c_iv = std::max(rep.c_iv, cmin);
        }
    }
    rep.cond_iv_ok = rep.m_iv > 0 && std::isfinite(rep.C_iv) && rep.C_iv > 0.0;

    rep.row_bound_C = uniform_row_bound(M, es, 300).bound;
    rep.frak_m = rep.C_iv * rep.U;

    rep.in_m1 = rep.irreducible && rep.aperiodic &&
                rep.criticality == Criticality::Critical && rep.positivity &&
                rep.cond_iii_ok;
    rep.in_m10 = rep.in_m1 && rep.cond_iv_ok;
    return rep;
}

} // namespace gwinf
