#include <doctest.h>

#include <cmath>

#include "gwinf/gfiter.hpp"
#include "gwinf/numeric.hpp"
#include "testutil.hpp"

using namespace gwinf;
using namespace gwtest;

namespace {

struct Built {
    Model model;
    TruncatedMeanMatrix M;
    EigenSystem es;
};

Built build(const ModelSpec& spec) {
    Built b{Model::compile(spec), {}, {}};
    b.M = build_truncated(b.model);
    b.es = eigen_pair(b.M);
    return b;
}

} // namespace

TEST_CASE("generation zero: Q(0;0) = 1 and q(0;0) = v.1 = 1") {
    Built b = build(chain_spec(1.0, 0.25, 32));
    IterationTrace t = survival_curve(b.model, 0, b.es);
    CHECK(t.q[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(t.sup_Q[0] == 1.0);
    CHECK(t.Q_final == std::vector<double>(32, 1.0));
}

TEST_CASE("s0 validation: outside the cube and the all-ones point are rejected") {
    Built b = build(chain_spec(1.0, 0.25, 8));
    std::vector<double> ones(8, 1.0);
    CHECK_THROWS_AS(iterate_generating(b.model, ones, 5, b.es), std::invalid_argument);
    std::vector<double> bad(8, 0.5);
    bad[0] = -0.1;
    CHECK_THROWS_AS(iterate_generating(b.model, bad, 5, b.es), std::domain_error);
}

TEST_CASE("rank-one kernels collapse to the exact scalar recursion") {
    // All rows geometric(1/2); coefficients alternate 0.2 / 0.3, so
    // C = sum_j pi_j c_j = 0.2 * (2/3) + 0.3 * (1/3) = 7/30 independent of
    // the computed eigenvector.
    const long double C = 7.0L / 30.0L;
    for (double alpha : {1.0, 0.5}) {
        Built b = build(rank1_spec(alpha, {0.2, 0.3}, 128));
        const int n_max = 2000;
        IterationTrace t = survival_curve(b.model, n_max, b.es);
        std::vector<long double> oracle = scalar_recursion(C, alpha, n_max);
        double worst = 0.0;
        for (int n = 0; n <= n_max; ++n)
            worst = std::max(worst,
                             std::abs(double((t.q[n] - oracle[n]) / oracle[n])));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("single-type iteration agrees with direct pgf iteration") {
    Built b = build(kolmogorov_spec());
    const int n_max = 200;
    IterationTrace t = survival_curve(b.model, n_max, b.es);
    double s = 0.0;  // F(n; 0) by the forward map f(s) = s + (1-s)^2 / 2
    for (int n = 0; n <= n_max; ++n) {
        CHECK(std::abs((1.0 - t.q[n]) - s) <= 1e-12);
        s = s + 0.5 * (1.0 - s) * (1.0 - s);
    }
}

TEST_CASE("survival curve basics: positivity of extinction and the linear gate") {
    Built b = build(chain_spec(1.0, 0.25, 20));
    IterationTrace t = survival_curve(b.model, 5, b.es, 1);
    // Extinction probability F_i(n;0) becomes positive for every type.
    const auto& Q1 = t.snapshots[1].second;
    for (double Qi : Q1) CHECK(1.0 - Qi > 0.0);

    // Exactly one child per particle, irreducible kernel: never dies.
    ModelSpec lin_spec;
    lin_spec.family = Family::Linear;
    lin_spec.kernel = GeometricKernel{{0.5}};
    lin_spec.truncation_N = 16;
    lin_spec.tail_policy = TailPolicy::ProjectLast;
    Built lin = build(lin_spec);
    IterationTrace lt = survival_curve(lin.model, 50, lin.es);
    for (double q : lt.q) CHECK(q == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("chain at alpha = 1: n q(n) increases to 1/C beyond burn-in") {
    Built b = build(chain_spec(1.0, 0.25, 100));
    const double C = b.model.slack_phi_coeff(b.es.v);
    IterationTrace t = survival_curve(b.model, 5000, b.es);
    double prev = 0.0;
    for (int n = 100; n <= 5000; n += 50) {
        const double nq = double(n) * t.q[n];
        CHECK(nq >= prev - 1e-12);
        prev = nq;
    }
    CHECK(5000.0 * t.q[5000] == doctest::Approx(1.0 / C).epsilon(0.02));
}

TEST_CASE("monotone coupling: extinction grows, survival shrinks") {
    Built b = build(chain_spec(0.5, 1.0 / 3.0, 64));
    IterationTrace t = survival_curve(b.model, 400, b.es);
    for (int n = 1; n <= 400; ++n) {
        CHECK(t.q[n] <= t.q[n - 1] + 1e-15);
        CHECK(t.q[n] > 0.0);
        CHECK(t.sup_Q[n] <= t.sup_Q[n - 1] + 1e-15);
    }
}

TEST_CASE("phi: zero at zero, exact power law on slack models, outer branch") {
    Built b = build(chain_spec(1.0, 0.25, 200));
    PhiEvaluator phi(b.model, b.es);
    CHECK(phi(0.0) == 0.0);
    const double C = b.model.slack_phi_coeff(b.es.v);
    for (double x : log_spaced_grid(1e-8, 1.0, 40))
        CHECK(phi(x) == doctest::Approx(C * x * x).epsilon(1e-12));

    // Single type, c = 1/2: beyond xU = 1 the branch is x - v.(1 - F(0)).
    Built k = build(kolmogorov_spec());
    CHECK(phi_of_x(k.model, k.es, 2.0) == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("phi: general path matches the fast path on slack models") {
    // A tabulated copy of the binary-split law exercises the subtracted
    // formulation.
    ModelSpec tab;
    tab.family = Family::Tabulated;
    tab.truncation_N = 1;
    TabulatedRow r;
    r.outcomes.push_back({0.5, {}});
    r.outcomes.push_back({0.5, {{0, 2}}});
    tab.tabulated_rows = {r};
    Built t = build(tab);
    Built k = build(kolmogorov_spec());
    for (double x : log_spaced_grid(1e-6, 1.0, 20)) {
        const double exact = phi_of_x(k.model, k.es, x);
        CHECK(phi_of_x(t.model, t.es, x) == doctest::Approx(exact).epsilon(1e-6));
    }
}

TEST_CASE("ratio diagnostic: symmetric rank-one and single type are exact") {
    Built r1 = build(rank1_spec(1.0, {0.25}, 64));
    IterationTrace t = iterate_generating(
        r1.model, std::vector<double>(64, 0.0), 200, r1.es);
    for (int n = 1; n <= 200; ++n) CHECK(t.ratio_sup[n] <= 1e-12);

    Built k = build(kolmogorov_spec());
    IterationTrace kt = survival_curve(k.model, 100, k.es);
    for (double r : kt.ratio_sup) CHECK(r == 0.0);
}

TEST_CASE("ratio diagnostic reports the threshold-crossing generation") {
    // Alternating coefficients make Q_i genuinely type-dependent, so the
    // sup starts around |c_1 - c_2| and has to be averaged out by the
    // kernel before the envelope settles.
    ModelSpec spec = chain_spec(1.0, 0.25, 100);
    spec.slack_coeffs = {0.1, 0.35};
    Built b = build(spec);
    IterationTrace t = survival_curve(b.model, 2000, b.es);
    CHECK(t.ratio_sup[1] > 0.05);
    RatioDiagnostic rd = ratio_diagnostic(t);
    REQUIRE(rd.n0 > 0);
    CHECK(rd.n0 <= 1000);
    CHECK(t.ratio_sup[rd.n0 - 1] > rd.threshold);
    for (std::size_t n = rd.n0; n < t.ratio_sup.size(); ++n)
        CHECK(t.ratio_sup[n] <= rd.threshold);
}

TEST_CASE("B diagnostic: rank-one is exact, ratios drift to one") {
    Built r1 = build(rank1_spec(1.0, {0.2, 0.3}, 128));
    IterationTrace t = survival_curve(r1.model, 2000, r1.es);
    BDiagnostic bd = b_diagnostic(t);
    for (std::size_t n = 0; n < bd.b_over_phi.size(); ++n)
        CHECK(bd.b_over_phi[n] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(bd.phi_ratio.back() == doctest::Approx(1.0).epsilon(1e-3));

    Built k = build(kolmogorov_spec());
    IterationTrace kt = survival_curve(k.model, 5, k.es);
    CHECK(kt.B[0] == doctest::Approx(0.5).epsilon(1e-15));
    BDiagnostic kbd = b_diagnostic(kt);
    CHECK(kbd.b_over_phi[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("ratio diagnostic ends where the truncated process dies out") {
    ModelSpec dying;
    dying.family = Family::Tabulated;
    dying.truncation_N = 1;
    TabulatedRow r;
    r.outcomes.push_back({1.0, {}});
    dying.tabulated_rows = {r};
    Model m = Model::compile(dying);
    EigenSystem es;
    es.v = {1.0};
    es.u = {1.0};
    es.U = 1.0;
    es.rho = 0.0;
    IterationTrace t = survival_curve(m, 5, es);
    CHECK(t.q[1] == 0.0);
    CHECK(t.ratio_sup[1] != t.ratio_sup[1]);  // NaN after extinction
    RatioDiagnostic rd = ratio_diagnostic(t);
    CHECK(rd.n0 == 0);  // the living prefix is generation 0 alone
}

TEST_CASE("uniform decay: chain sup_Q at n = 1000 sits near the scalar oracle") {
    Built b = build(chain_spec(1.0, 0.25, 100));
    IterationTrace t = survival_curve(b.model, 1000, b.es);
    std::vector<long double> oracle = scalar_recursion(0.25L, 1.0L, 1000);
    CHECK(t.sup_Q[1000] <= 10.0 * double(oracle[1000]));
}

TEST_CASE("discard and project bracket the survival curve") {
    for (int N : {50, 100, 200}) {
        Built lo = build(chain_spec(1.0, 0.25, N, TailPolicy::Discard));
        Built hi = build(chain_spec(1.0, 0.25, N, TailPolicy::ProjectLast));
        IterationTrace tlo = survival_curve(lo.model, 500, lo.es);
        IterationTrace thi = survival_curve(hi.model, 500, hi.es);
        for (int n = 0; n <= 500; ++n)
            CHECK(tlo.q[n] <= thi.q[n] + 1e-14);
    }
}

TEST_CASE("truncation consistency: q_N vs q_2N bounded by the dropped mass") {
    Built a = build(chain_spec(1.0, 0.25, 50));
    Built b = build(chain_spec(1.0, 0.25, 100));
    const double tail = tail_mass(chain_spec(1.0, 0.25, 1000), 50);  // 0.7^50
    IterationTrace ta = survival_curve(a.model, 1000, a.es);
    IterationTrace tb = survival_curve(b.model, 1000, b.es);
    for (int n = 1; n <= 1000; ++n)
        CHECK(std::abs(ta.q[n] - tb.q[n]) <= tail * n + 1e-12);
}
