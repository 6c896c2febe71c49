#include "gwinf/gfiter.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "gwinf/numeric.hpp"

namespace gwinf {

PhiEvaluator::PhiEvaluator(const Model& model, const EigenSystem& es)
    : model_(&model), es_(&es) {
    const int N = model.num_types();
    bool u_is_ones = true;
    for (double x : es.u)
        if (x != 1.0) {
            u_is_ones = false;
            break;
        }
    fast_ = model.spec().family == Family::SlackKernel && u_is_ones;
    C_ = model.spec().family == Family::SlackKernel ? model.slack_phi_coeff(es.v) : 0.0;

    std::vector<double> zero(N, 0.0);
    CompensatedSum q0;
    for (int i = 0; i < N; ++i) q0.add(es.v[i] * (1.0 - model.law(i).pgf(zero)));
    q_at_zero_ = q0.value();

    if (!fast_) {
        Mu_.assign(N, 0.0);
        for (int i = 0; i < N; ++i) {
            const auto& row = model.law(i).mean_row;
            double acc = 0.0;
            for (int j = 0; j < N; ++j) acc += row[j] * es.u[j];
            Mu_[i] = acc;
        }
        vMu_ = compensated_dot(es.v, Mu_);
    }
}

double PhiEvaluator::operator()(double x) const {
    if (x < 0.0) throw std::domain_error("phi: x must be nonnegative");
    if (x == 0.0) return 0.0;
    if (x * es_->U > 1.0) return x - q_at_zero_;
    if (fast_) {
        // v.1 = 1 and u = 1 make the linear terms cancel identically,
        // leaving the pure power law.
        return C_ * pow1pa(x, model_->spec().alpha);
    }
    const int N = model_->num_types();
    std::vector<double> z(N);
    for (int i = 0; i < N; ++i) z[i] = x * es_->u[i];
    CompensatedSum ex;
    for (int i = 0; i < N; ++i)
        ex.add(es_->v[i] * model_->law(i).excess(x * Mu_[i], z));
    return x * (1.0 - vMu_) + ex.value();
}

double phi_of_x(const Model& model, const EigenSystem& es, double x) {
    return PhiEvaluator(model, es)(x);
}

PhiCurve sample_phi_curve(const Model& model, const EigenSystem& es, int n_points,
                          double x_min, double x_max) {
    PhiCurve curve;
    curve.U = es.U;
    if (x_max <= 0.0) x_max = std::min(1.0, 1.0 / es.U);
    curve.x = log_spaced_grid(x_min, x_max, n_points);
    PhiEvaluator phi(model, es);
    curve.phi.reserve(n_points);
    for (double x : curve.x) curve.phi.push_back(phi(x));
    return curve;
}

IterationTrace iterate_generating(const Model& model, std::span<const double> s0, int n_max,
                                  const EigenSystem& es, int snapshot_stride) {
    const int N = model.num_types();
    if (static_cast<int>(s0.size()) != N)
        throw std::invalid_argument("iterate_generating: s0 dimension mismatch");
    bool off_one = false;
    for (double s : s0) {
        if (!(s >= 0.0 && s <= 1.0))
            throw std::domain_error("iterate_generating: s0 component outside [0,1]");
        if (s <= 1.0 - 1e-12) off_one = true;
    }
    if (!off_one)
        throw std::invalid_argument(
            "iterate_generating: s0 = 1 is outside the admissible set (no component <= 1-1e-12)");

    IterationTrace trace;
    trace.n_max = n_max;
    trace.snapshot_stride = snapshot_stride;
    trace.q.reserve(n_max + 1);
    trace.sup_Q.reserve(n_max + 1);
    trace.ratio_sup.reserve(n_max + 1);
    trace.phi_q.reserve(n_max + 1);
    trace.B.reserve(n_max);

    PhiEvaluator phi(model, es);
    std::vector<double> Q(N), t(N), Qn(N);
    for (int i = 0; i < N; ++i) Q[i] = 1.0 - s0[i];

    auto record = [&](int n) {
        const double q = compensated_dot(es.v, Q);
        double sup = 0.0, ratio = 0.0;
        for (int i = 0; i < N; ++i) {
            sup = std::max(sup, Q[i]);
            if (q > 0.0)
                ratio = std::max(ratio, std::abs(Q[i] / (es.u[i] * q) - 1.0));
        }
        trace.q.push_back(q);
        trace.sup_Q.push_back(sup);
        trace.ratio_sup.push_back(q > 0.0 ? ratio
                                          : std::numeric_limits<double>::quiet_NaN());
        trace.phi_q.push_back(q > 0.0 ? phi(q) : 0.0);
        if (!std::isfinite(q)) {
            std::ostringstream os;
            os << "iterate_generating: non-finite q at generation " << n;
            throw std::runtime_error(os.str());
        }
        if (snapshot_stride > 0 && n % snapshot_stride == 0)
            trace.snapshots.emplace_back(n, Q);
    };

    record(0);
    for (int n = 1; n <= n_max; ++n) {
        model.qstep(Q, t, Qn);
        Q.swap(Qn);
        record(n);
        trace.B.push_back(trace.q[n - 1] - trace.q[n]);
    }
    trace.Q_final = Q;
    return trace;
}

IterationTrace survival_curve(const Model& model, int n_max, const EigenSystem& es,
                              int snapshot_stride) {
    std::vector<double> zero(model.num_types(), 0.0);
    return iterate_generating(model, zero, n_max, es, snapshot_stride);
}

RatioDiagnostic ratio_diagnostic(const IterationTrace& trace, double threshold) {
    RatioDiagnostic d;
    d.threshold = threshold;
    d.ratio_sup = trace.ratio_sup;
    // The diagnostic ends where the truncated process died out (NaN sup);
    // the envelope is scanned backwards over the living part.
    int last = static_cast<int>(trace.ratio_sup.size()) - 1;
    while (last >= 0 && !(trace.ratio_sup[last] == trace.ratio_sup[last])) --last;
    int n0 = -1;
    for (int n = last; n >= 0; --n) {
        if (!(trace.ratio_sup[n] <= threshold)) break;
        n0 = n;
    }
    d.n0 = n0;
    return d;
}

BDiagnostic b_diagnostic(const IterationTrace& trace) {
    BDiagnostic d;
    const std::size_t m = trace.B.size();
    d.b_over_phi.resize(m);
    d.phi_ratio.resize(m);
    for (std::size_t n = 0; n < m; ++n) {
        const double ph = trace.phi_q[n];
        d.b_over_phi[n] =
            ph != 0.0 ? trace.B[n] / ph : std::numeric_limits<double>::quiet_NaN();
        d.phi_ratio[n] =
            ph != 0.0 ? trace.phi_q[n + 1] / ph : std::numeric_limits<double>::quiet_NaN();
    }
    return d;
}

} // namespace gwinf
