#include "gwinf/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "gwinf/numeric.hpp"

namespace gwinf {

namespace {

constexpr int kDefaultCountTable = 1 << 16;
constexpr double kRowSumTol = 1e-12;

double cycled(const std::vector<double>& xs, int i) {
    return xs[static_cast<std::size_t>(i) % xs.size()];
}

struct RowInfo {
    std::vector<double> row;       // truncated, policy applied
    double dropped = 0.0;          // mass removed by Discard
    double geo_rho = -1.0;
    std::vector<double> full_row;  // original row when not geometric
    double full_sum = 1.0;
};

RowInfo resolve_kernel_row(const Kernel& kernel, int i, int N, TailPolicy policy) {
    RowInfo info;
    if (const auto* geo = std::get_if<GeometricKernel>(&kernel)) {
        const double rho = cycled(geo->rho, i);
        info.geo_rho = rho;
        info.row.resize(N);
        for (int j = 0; j < N; ++j)
            info.row[j] = rho * std::pow(1.0 - rho, j);
        const double tail = std::pow(1.0 - rho, N);
        if (policy == TailPolicy::ProjectLast)
            info.row[N - 1] += tail;
        else
            info.dropped = tail;
        info.full_sum = 1.0;
    } else {
        const auto& rows = std::get<ExplicitKernel>(kernel).rows;
        const auto& full = rows[static_cast<std::size_t>(i) % rows.size()];
        info.full_row = full;
        info.full_sum = compensated_sum(full);
        info.row.assign(N, 0.0);
        double tail = 0.0;
        for (std::size_t j = 0; j < full.size(); ++j) {
            if (static_cast<int>(j) < N)
                info.row[j] = full[j];
            else
                tail += full[j];
        }
        if (policy == TailPolicy::ProjectLast)
            info.row[N - 1] += tail;
        else
            info.dropped = tail;
    }
    return info;
}

// Outcome children mapped through the truncation policy, merged and sorted.
std::vector<std::pair<int, long long>> apply_policy(
    const std::vector<std::pair<int, long long>>& children, int N, TailPolicy policy) {
    std::vector<std::pair<int, long long>> out;
    out.reserve(children.size());
    for (auto [t, cnt] : children) {
        if (cnt == 0) continue;  // zero counts would later turn into 0 * log(0)
        if (t >= N) {
            if (policy == TailPolicy::Discard) continue;
            t = N - 1;
        }
        out.emplace_back(t, cnt);
    }
    std::sort(out.begin(), out.end());
    std::vector<std::pair<int, long long>> merged;
    for (auto& [t, cnt] : out) {
        if (!merged.empty() && merged.back().first == t)
            merged.back().second += cnt;
        else
            merged.emplace_back(t, cnt);
    }
    return merged;
}

std::vector<double> build_count_table(double alpha, double c, int k_max) {
    std::vector<double> p;
    p.reserve(std::min(k_max + 1, 1024));
    p.push_back(c);
    p.push_back(1.0 - c * (1.0 + alpha));
    if (k_max >= 2) p.push_back(c * alpha * (1.0 + alpha) / 2.0);
    for (int k = 2; k < k_max; ++k) {
        const double next = p.back() * (double(k) - 1.0 - alpha) / (double(k) + 1.0);
        if (next == 0.0) break;
        p.push_back(next);
    }
    return p;
}

} // namespace

ValidationReport validate_spec(const ModelSpec& spec) {
    ValidationReport rep;
    auto fail = [&rep](const std::string& msg) { rep.violations.push_back(msg); };
    std::ostringstream os;

    const int N = spec.truncation_N;
    // An explicit kernel (or tabulated law) with N=1 is a complete
    // single-type model; only analytic kernels carry genuinely infinite
    // type spaces.
    const bool analytic_kernel = spec.family != Family::Tabulated &&
                                 std::holds_alternative<GeometricKernel>(spec.kernel);
    const int min_N = analytic_kernel ? 2 : 1;
    if (N < min_N) {
        os.str("");
        os << "truncation_N = " << N << " < " << min_N;
        fail(os.str());
    }

    if (spec.family == Family::SlackKernel) {
        if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) {
            os.str("");
            os << "alpha = " << spec.alpha << " outside (0,1]";
            fail(os.str());
        }
        if (spec.slack_coeffs.empty()) {
            fail("slack_coeffs empty");
        } else if (spec.alpha > 0.0 && spec.alpha <= 1.0) {
            const double cmax = 1.0 / (1.0 + spec.alpha);
            for (std::size_t i = 0; i < spec.slack_coeffs.size(); ++i) {
                const double c = spec.slack_coeffs[i];
                if (!(c > 0.0)) {
                    os.str("");
                    os << "c_" << (i + 1) << " = " << c << " not positive";
                    fail(os.str());
                } else if (c > cmax) {
                    os.str("");
                    os << "c_" << (i + 1) << " = " << c << " > 1/(1+alpha) = " << cmax;
                    fail(os.str());
                }
            }
        }
    }

    if (spec.family == Family::Tabulated) {
        if (spec.tabulated_rows.empty()) fail("tabulated_rows empty");
        bool all_single = !spec.tabulated_rows.empty();
        for (std::size_t i = 0; i < spec.tabulated_rows.size(); ++i) {
            CompensatedSum mass;
            for (const auto& o : spec.tabulated_rows[i].outcomes) {
                if (o.prob < 0.0) {
                    os.str("");
                    os << "tabulated row " << (i + 1) << " has a negative probability";
                    fail(os.str());
                }
                mass.add(o.prob);
                long long total = 0;
                for (auto [t, cnt] : o.children) {
                    if (t < 0) {
                        os.str("");
                        os << "tabulated row " << (i + 1) << " has a child of type < 1";
                        fail(os.str());
                    }
                    if (cnt < 0) {
                        os.str("");
                        os << "tabulated row " << (i + 1) << " has a negative child count";
                        fail(os.str());
                    }
                    total += cnt;
                }
                if (total != 1) all_single = false;
            }
            if (std::abs(mass.value() - 1.0) > kRowSumTol) {
                os.str("");
                os << "tabulated row " << (i + 1) << " probabilities sum to " << mass.value()
                   << ", expected 1 within " << kRowSumTol;
                fail(os.str());
            }
        }
        rep.linear_excluded = all_single;
    } else {
        // Kernel-based families.
        if (const auto* geo = std::get_if<GeometricKernel>(&spec.kernel)) {
            if (geo->rho.empty()) fail("geometric kernel has no rho entries");
            for (std::size_t i = 0; i < geo->rho.size(); ++i) {
                if (!(geo->rho[i] > 0.0 && geo->rho[i] < 1.0)) {
                    os.str("");
                    os << "geometric kernel rho_" << (i + 1) << " = " << geo->rho[i]
                       << " outside (0,1)";
                    fail(os.str());
                }
            }
        } else {
            const auto& rows = std::get<ExplicitKernel>(spec.kernel).rows;
            if (rows.empty()) fail("explicit kernel has no rows");
            for (std::size_t i = 0; i < rows.size(); ++i) {
                CompensatedSum sum;
                bool nonneg = true;
                for (double x : rows[i]) {
                    if (x < 0.0) nonneg = false;
                    sum.add(x);
                }
                if (!nonneg) {
                    os.str("");
                    os << "kernel row " << (i + 1) << " has a negative entry";
                    fail(os.str());
                }
                if (std::abs(sum.value() - 1.0) > kRowSumTol) {
                    os.str("");
                    os << "kernel row " << (i + 1) << " sums to " << sum.value()
                       << ", expected 1 within " << kRowSumTol;
                    fail(os.str());
                }
            }
        }
    }

    if (spec.family == Family::Linear) rep.linear_excluded = true;
    return rep;
}

ChildCountPmf child_count_pmf(const ModelSpec& spec, int type_index, int k_max) {
    if (spec.family != Family::SlackKernel)
        throw std::domain_error("child_count_pmf: defined for the slack family only");
    if (k_max < 2)
        throw std::domain_error("child_count_pmf: k_max must be >= 2");
    ChildCountPmf out;
    out.alpha = spec.alpha;
    out.c = cycled(spec.slack_coeffs, type_index);
    out.p = build_count_table(out.alpha, out.c, k_max);
    out.p.resize(k_max + 1, 0.0);
    CompensatedSum s;
    for (double x : out.p) s.add(x);
    out.tail_mass = 1.0 - s.value();
    if (out.tail_mass < 0.0 && out.tail_mass > -1e-12) out.tail_mass = 0.0;
    return out;
}

double OffspringLaw::pgf(std::span<const double> s) const {
    for (double x : s)
        if (!(x >= 0.0 && x <= 1.0))
            throw std::domain_error("pgf: argument component outside [0,1]");
    if (family == Family::Tabulated) {
        CompensatedSum acc;
        for (const auto& o : outcomes) {
            double term = o.prob;
            for (auto [t, cnt] : o.children)
                term *= std::pow(s[t], static_cast<double>(cnt));
            acc.add(term);
        }
        return acc.value();
    }
    // Kernel families: children beyond the truncation contribute factor 1
    // under Discard, so the dropped mass re-enters the argument. Rounding
    // can push the dot product a few ulp past 1, where fractional powers
    // of 1 - x would be undefined.
    CompensatedSum dot;
    for (std::size_t j = 0; j < mean_row.size(); ++j) dot.add(mean_row[j] * s[j]);
    const double x = std::min(1.0, dot.value() + dropped_mass);
    if (family == Family::Linear) return x;
    return x + c * pow1pa(1.0 - x, alpha);
}

double OffspringLaw::q_image(double t, std::span<const double> Q) const {
    switch (family) {
        case Family::SlackKernel:
            return t - c * pow1pa(t, alpha);
        case Family::Linear:
            return t;
        case Family::Tabulated: {
            CompensatedSum acc;
            for (const auto& o : outcomes) {
                double lg = 0.0;
                for (auto [ty, cnt] : o.children)
                    lg += static_cast<double>(cnt) * std::log1p(-Q[ty]);
                acc.add(o.prob * (-std::expm1(lg)));
            }
            return acc.value();
        }
    }
    return 0.0;
}

double OffspringLaw::excess(double t, std::span<const double> z) const {
    switch (family) {
        case Family::SlackKernel:
            return c * pow1pa(t, alpha);
        case Family::Linear:
            return 0.0;
        case Family::Tabulated: {
            CompensatedSum acc;
            for (const auto& o : outcomes) {
                double lin = 0.0, lg = 0.0;
                for (auto [ty, cnt] : o.children) {
                    lin += static_cast<double>(cnt) * z[ty];
                    lg += static_cast<double>(cnt) * std::log1p(-z[ty]);
                }
                acc.add(o.prob * (lin + std::expm1(lg)));
            }
            return acc.value();
        }
    }
    return 0.0;
}

long long OffspringLaw::draw_child_count(RngStream& rng) const {
    if (family == Family::Linear) return 1;
    const double u = rng.uniform01();
    const auto& p = *count_pmf;
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        acc += p[k];
        if (u < acc) return static_cast<long long>(k);
    }
    // Exact inverse-CDF continuation through the pmf ratio; no truncation
    // of the distribution itself.
    long long k = static_cast<long long>(p.size()) - 1;
    double pk = p.back();
    constexpr long long kHardCap = 1LL << 40;
    while (k < kHardCap) {
        pk *= (static_cast<double>(k) - 1.0 - alpha) / (static_cast<double>(k) + 1.0);
        ++k;
        acc += pk;
        if (u < acc || pk == 0.0) return k;
    }
    return kHardCap;
}

int OffspringLaw::draw_child_type(RngStream& rng) const {
    int j;
    if (geo_rho > 0.0) {
        const double u = rng.uniform01_open_left();
        j = static_cast<int>(std::log(u) / std::log1p(-geo_rho));
        if (j < 0) j = 0;
    } else {
        const double u = rng.uniform01();
        j = static_cast<int>(std::upper_bound(type_cdf.begin(), type_cdf.end(), u) -
                             type_cdf.begin());
    }
    if (j >= trunc_N)
        return policy == TailPolicy::Discard ? -1 : trunc_N - 1;
    return j;
}

double pgf_eval(const OffspringLaw& law, std::span<const double> s) { return law.pgf(s); }

const std::vector<double>& mean_row(const OffspringLaw& law) { return law.mean_row; }

std::vector<std::pair<int, long long>> sample_offspring(const OffspringLaw& law, RngStream& rng) {
    if (law.family == Family::Tabulated) {
        const double u = rng.uniform01();
        std::size_t k = static_cast<std::size_t>(
            std::upper_bound(law.outcome_cdf.begin(), law.outcome_cdf.end(), u) -
            law.outcome_cdf.begin());
        if (k >= law.outcomes.size()) k = law.outcomes.size() - 1;
        return law.outcomes[k].children;
    }
    const long long K = law.draw_child_count(rng);
    std::vector<std::pair<int, long long>> sparse;
    if (K <= 32) {
        for (long long n = 0; n < K; ++n) {
            const int t = law.draw_child_type(rng);
            if (t < 0) continue;
            bool found = false;
            for (auto& [ty, cnt] : sparse)
                if (ty == t) { ++cnt; found = true; break; }
            if (!found) sparse.emplace_back(t, 1);
        }
        std::sort(sparse.begin(), sparse.end());
    } else {
        std::vector<long long> dense(law.trunc_N, 0);
        for (long long n = 0; n < K; ++n) {
            const int t = law.draw_child_type(rng);
            if (t >= 0) ++dense[t];
        }
        for (int t = 0; t < law.trunc_N; ++t)
            if (dense[t] > 0) sparse.emplace_back(t, dense[t]);
    }
    return sparse;
}

Model Model::compile(const ModelSpec& spec) {
    ValidationReport rep = validate_spec(spec);
    if (!rep.valid()) {
        std::string joined = "invalid model spec:";
        for (const auto& v : rep.violations) joined += "\n  " + v;
        throw std::invalid_argument(joined);
    }

    Model m;
    m.spec_ = spec;
    m.N_ = spec.truncation_N;
    m.linear_ = rep.linear_excluded;
    m.laws_.resize(m.N_);

    std::map<double, std::shared_ptr<const std::vector<double>>> tables;

    for (int i = 0; i < m.N_; ++i) {
        OffspringLaw& law = m.laws_[i];
        law.type_index = i;
        law.family = spec.family;
        law.alpha = spec.alpha;
        law.trunc_N = m.N_;
        law.policy = spec.tail_policy;

        if (spec.family == Family::Tabulated) {
            const auto& row =
                spec.tabulated_rows[static_cast<std::size_t>(i) % spec.tabulated_rows.size()];
            law.mean_row.assign(m.N_, 0.0);
            double full_sum = 0.0;
            double cdf = 0.0;
            // Longest original type label defines the full mean row.
            int maxt = m.N_;
            for (const auto& o : row.outcomes)
                for (auto [t, cnt] : o.children) maxt = std::max(maxt, t + 1);
            std::vector<double> full_mean(maxt, 0.0);
            for (const auto& o : row.outcomes) {
                TabulatedOutcome mapped;
                mapped.prob = o.prob;
                mapped.children = apply_policy(o.children, m.N_, spec.tail_policy);
                for (auto [t, cnt] : mapped.children)
                    law.mean_row[t] += o.prob * static_cast<double>(cnt);
                for (auto [t, cnt] : o.children) {
                    full_mean[t] += o.prob * static_cast<double>(cnt);
                    full_sum += o.prob * static_cast<double>(cnt);
                }
                cdf += o.prob;
                law.outcomes.push_back(std::move(mapped));
                law.outcome_cdf.push_back(cdf);
            }
            law.full_row_sum = full_sum;
            double dropped = 0.0;
            for (int t = m.N_; t < maxt; ++t) dropped += full_mean[t];
            law.dropped_mass = spec.tail_policy == TailPolicy::Discard ? dropped : 0.0;
            law.full_mean_row = std::move(full_mean);
            continue;
        }

        RowInfo info = resolve_kernel_row(spec.kernel, i, m.N_, spec.tail_policy);
        law.mean_row = std::move(info.row);
        law.dropped_mass = info.dropped;
        law.full_row_sum = info.full_sum;
        law.geo_rho = info.geo_rho;
        law.full_mean_row = std::move(info.full_row);
        if (law.geo_rho <= 0.0) {
            law.type_cdf.resize(m.N_);
            double acc = 0.0;
            for (int j = 0; j < m.N_; ++j) {
                acc += law.mean_row[j];
                law.type_cdf[j] = acc;
            }
        }

        if (spec.family == Family::SlackKernel) {
            law.c = cycled(spec.slack_coeffs, i);
            auto it = tables.find(law.c);
            if (it == tables.end()) {
                auto tab = std::make_shared<const std::vector<double>>(
                    build_count_table(spec.alpha, law.c, kDefaultCountTable));
                it = tables.emplace(law.c, std::move(tab)).first;
            }
            law.count_pmf = it->second;
        }
    }
    return m;
}

double Model::truncated_tail_sup(int n0) const {
    double sup = 0.0;
    for (const auto& law : laws_) {
        double tail;
        if (law.geo_rho > 0.0) {
            const double r = 1.0 - law.geo_rho;
            tail = std::pow(r, n0) - std::pow(r, N_);
            if (law.policy == TailPolicy::ProjectLast)
                tail = n0 < N_ ? std::pow(r, n0) : 0.0;
        } else {
            CompensatedSum s;
            for (int j = n0; j < N_; ++j) s.add(law.mean_row[j]);
            tail = s.value();
        }
        sup = std::max(sup, tail);
    }
    return sup;
}

double Model::kernel_tail_sup(int n0, bool scaled) const {
    double sup = 0.0;
    for (const auto& law : laws_) {
        double tail;
        if (law.geo_rho > 0.0) {
            tail = std::pow(1.0 - law.geo_rho, n0);
        } else {
            CompensatedSum s;
            for (std::size_t j = n0; j < law.full_mean_row.size(); ++j)
                s.add(law.full_mean_row[j]);
            tail = s.value();
        }
        if (scaled && law.full_row_sum > 0.0) tail /= law.full_row_sum;
        sup = std::max(sup, tail);
    }
    return sup;
}

double Model::truncation_error_bound() const {
    double sup = 0.0;
    for (const auto& law : laws_) {
        if (law.geo_rho > 0.0)
            sup = std::max(sup, std::pow(1.0 - law.geo_rho, N_));
        else
            sup = std::max(sup, law.dropped_mass);
    }
    return sup;
}

void Model::qstep(std::span<const double> Q, std::span<double> tbuf,
                  std::span<double> Qnext) const {
    const int N = N_;
    for (int i = 0; i < N; ++i) {
        const double* row = laws_[i].mean_row.data();
        double acc = 0.0;
        for (int j = 0; j < N; ++j) acc += row[j] * Q[j];
        tbuf[i] = acc;
    }
    for (int i = 0; i < N; ++i) Qnext[i] = laws_[i].q_image(tbuf[i], Q);
}

double Model::slack_phi_coeff(std::span<const double> v) const {
    CompensatedSum s;
    for (int i = 0; i < N_; ++i) s.add(v[i] * laws_[i].c);
    return s.value();
}

double tail_mass(const ModelSpec& spec, int N0) {
    return Model::compile(spec).truncated_tail_sup(N0);
}

} // namespace gwinf
