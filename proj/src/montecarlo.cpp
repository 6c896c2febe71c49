#include "gwinf/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "gwinf/numeric.hpp"

namespace gwinf {

namespace {

// Reusable dense buffer with a touch list, so stepping small critical
// populations does not pay for zeroing N slots every generation.
class PopulationStepper {
public:
    explicit PopulationStepper(const Model& model)
        : model_(&model), dense_(model.num_types(), 0), touched_() {
        touched_.reserve(model.num_types());
    }

    void step(Population& pop, RngStream& rng) {
        for (auto [type, count] : pop.counts) {
            const OffspringLaw& law = model_->law(type);
            if (law.family == Family::Tabulated) {
                for (long long p = 0; p < count; ++p)
                    for (auto [t, c] : sample_offspring(law, rng)) deposit(t, c);
            } else {
                for (long long p = 0; p < count; ++p) {
                    const long long K = law.draw_child_count(rng);
                    for (long long k = 0; k < K; ++k) {
                        const int t = law.draw_child_type(rng);
                        if (t >= 0) deposit(t, 1);
                    }
                }
            }
        }
        pop.counts.clear();
        std::sort(touched_.begin(), touched_.end());
        long long total = 0;
        for (int t : touched_) {
            pop.counts.emplace_back(t, dense_[t]);
            total += dense_[t];
            dense_[t] = 0;
        }
        touched_.clear();
        pop.total = total;
    }

private:
    void deposit(int t, long long c) {
        if (dense_[t] == 0) touched_.push_back(t);
        dense_[t] += c;
    }

    const Model* model_;
    std::vector<long long> dense_;
    std::vector<int> touched_;
};

TrialResult run_one(const SimConfig& cfg, long long trial, PopulationStepper& stepper) {
    RngStream rng(cfg.root_seed, static_cast<std::uint64_t>(trial));
    Population pop;
    pop.counts.emplace_back(cfg.start_type, 1);
    pop.total = 1;

    TrialResult tr;
    tr.alive.assign(cfg.record_at.size(), 0);
    tr.snapshots.resize(cfg.record_at.size());

    std::size_t ci = 0;
    for (int n = 0; n <= cfg.horizon; ++n) {
        while (ci < cfg.record_at.size() && cfg.record_at[ci] == n) {
            tr.alive[ci] = tr.exploded || !pop.empty();
            if (!tr.exploded) tr.snapshots[ci] = pop;
            ++ci;
        }
        if (n == cfg.horizon || tr.exploded || pop.empty()) {
            if (ci == cfg.record_at.size() && (tr.exploded || pop.empty())) break;
            if (n == cfg.horizon) break;
            continue;  // dead or exploded: state is absorbing, skip stepping
        }
        stepper.step(pop, rng);
        if (pop.total > cfg.explosion_cap) tr.exploded = true;
    }
    return tr;
}

std::size_t checkpoint_index(const RunResult& run, int n) {
    const auto& rec = run.cfg.record_at;
    auto it = std::find(rec.begin(), rec.end(), n);
    if (it == rec.end())
        throw std::invalid_argument("checkpoint not recorded: n = " + std::to_string(n));
    return static_cast<std::size_t>(it - rec.begin());
}

} // namespace

Population step_population(const Population& pop, const Model& model, RngStream& rng) {
    PopulationStepper stepper(model);
    Population next = pop;
    stepper.step(next, rng);
    return next;
}

RunResult run_trials(const SimConfig& cfg, const Model& model) {
    if (cfg.trials < 1) throw std::invalid_argument("run_trials: trials must be >= 1");
    for (std::size_t k = 0; k < cfg.record_at.size(); ++k) {
        if (cfg.record_at[k] > cfg.horizon || cfg.record_at[k] < 0)
            throw std::invalid_argument("run_trials: checkpoint outside [0, horizon]");
        if (k > 0 && cfg.record_at[k] <= cfg.record_at[k - 1])
            throw std::invalid_argument("run_trials: checkpoints must be strictly increasing");
    }
    if (cfg.start_type < 0 || cfg.start_type >= model.num_types())
        throw std::invalid_argument("run_trials: start type outside the truncation");

    RunResult out;
    out.cfg = cfg;
    out.trials.resize(cfg.trials);

    const int threads = std::max(1, cfg.threads);
    if (threads == 1) {
        PopulationStepper stepper(model);
        for (long long k = 0; k < cfg.trials; ++k)
            out.trials[k] = run_one(cfg, k, stepper);
    } else {
        const long long chunk = (cfg.trials + threads - 1) / threads;
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
            const long long lo = t * chunk;
            const long long hi = std::min<long long>(cfg.trials, lo + chunk);
            if (lo >= hi) break;
            pool.emplace_back([&, lo, hi]() {
                PopulationStepper stepper(model);
                for (long long k = lo; k < hi; ++k)
                    out.trials[k] = run_one(cfg, k, stepper);
            });
        }
        for (auto& th : pool) th.join();
    }
    for (const auto& tr : out.trials)
        if (tr.exploded) ++out.exploded_count;
    return out;
}

SurvivalEstimate estimate_survival(const RunResult& run, int n) {
    const std::size_t ci = checkpoint_index(run, n);
    SurvivalEstimate est;
    est.n = n;
    est.trials = static_cast<long long>(run.trials.size());
    const int n_types = 5;
    std::vector<CompensatedSum> sums(n_types);
    long long cond_count = 0;
    for (const auto& tr : run.trials) {
        if (!tr.alive[ci]) continue;
        ++est.survivors;
        if (tr.exploded) {
            ++est.exploded;
            continue;
        }
        ++cond_count;
        for (auto [t, c] : tr.snapshots[ci].counts)
            if (t < n_types) sums[t].add(static_cast<double>(c));
    }
    est.p_hat = double(est.survivors) / double(est.trials);
    est.stderr_ = std::sqrt(est.p_hat * (1.0 - est.p_hat) / double(est.trials));
    if (cond_count > 0)
        for (int t = 0; t < n_types; ++t)
            est.cond_mean_per_type.push_back(sums[t].value() / double(cond_count));
    return est;
}

LaplaceEstimate empirical_laplace(const RunResult& run, int n, std::span<const double> lambda,
                                  double q_n, int bootstrap_resamples) {
    const std::size_t ci = checkpoint_index(run, n);
    LaplaceEstimate est;
    std::vector<double> values;
    for (const auto& tr : run.trials) {
        if (!tr.alive[ci]) continue;
        if (tr.exploded) {
            ++est.excluded_exploded;
            continue;
        }
        double dot = 0.0;
        for (auto [t, c] : tr.snapshots[ci].counts)
            if (static_cast<std::size_t>(t) < lambda.size())
                dot += lambda[t] * static_cast<double>(c);
        values.push_back(std::exp(-q_n * dot));
    }
    est.survivors = static_cast<long long>(values.size());
    if (est.survivors < 30)
        throw std::runtime_error("empirical_laplace: fewer than 30 survivors, need more trials");

    CompensatedSum mean;
    for (double v : values) mean.add(v);
    est.value = mean.value() / double(est.survivors);

    // Percentile bootstrap, deterministic in the run's root seed.
    RngStream brng(run.cfg.root_seed, (1ULL << 62) | static_cast<std::uint64_t>(n));
    std::vector<double> boots(bootstrap_resamples);
    const std::size_t m = values.size();
    for (int b = 0; b < bootstrap_resamples; ++b) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            acc += values[brng.next_u64() % m];
        boots[b] = acc / double(m);
    }
    std::sort(boots.begin(), boots.end());
    const auto pick = [&](double p) {
        const double idx = p * (bootstrap_resamples - 1);
        return boots[static_cast<std::size_t>(idx + 0.5)];
    };
    est.ci_lo = pick(0.025);
    est.ci_hi = pick(0.975);
    return est;
}

double dichotomy_check(const RunResult& run, int n, long long K) {
    const std::size_t ci = checkpoint_index(run, n);
    long long stuck = 0;
    for (const auto& tr : run.trials) {
        if (!tr.alive[ci] || tr.exploded) continue;
        const long long total = tr.snapshots[ci].total;
        if (total >= 1 && total <= K) ++stuck;
    }
    return double(stuck) / double(run.trials.size());
}

} // namespace gwinf
