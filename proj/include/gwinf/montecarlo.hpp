#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gwinf/model.hpp"
#include "gwinf/rng.hpp"

namespace gwinf {

// Sparse population vector: sorted (type, count) pairs, absent types zero.
struct Population {
    std::vector<std::pair<int, long long>> counts;
    long long total = 0;

    bool empty() const { return total == 0; }
    long long count_of(int type) const {
        for (auto [t, c] : counts)
            if (t == type) return c;
        return 0;
    }
};

struct SimConfig {
    std::uint64_t root_seed = 0;
    long long trials = 1;
    int horizon = 0;
    int start_type = 0;  // 0-based
    std::vector<int> record_at;  // strictly increasing checkpoints <= horizon
    int threads = 1;
    long long explosion_cap = 100'000'000;
};

struct TrialResult {
    std::vector<std::uint8_t> alive;   // per checkpoint
    std::vector<Population> snapshots; // population at each checkpoint
    bool exploded = false;
};

struct RunResult {
    SimConfig cfg;
    std::vector<TrialResult> trials;  // indexed by trial; deterministic in root_seed
    long long exploded_count = 0;
};

// One generation: every particle draws an independent offspring vector.
Population step_population(const Population& pop, const Model& model, RngStream& rng);

// Trial k always consumes stream (root_seed, k), so results are identical
// for any thread count.
RunResult run_trials(const SimConfig& cfg, const Model& model);

struct SurvivalEstimate {
    int n = 0;
    long long trials = 0;
    long long survivors = 0;       // exploded trials count as survivors
    long long exploded = 0;
    double p_hat = 0.0;
    double stderr_ = 0.0;          // binomial
    std::vector<double> cond_mean_per_type;  // survivor mean of Z_j, first types
};
SurvivalEstimate estimate_survival(const RunResult& run, int n);

struct LaplaceEstimate {
    double value = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  // bootstrap percentile interval
    long long survivors = 0;
    long long excluded_exploded = 0;
};

// Mean of exp(-q_n (lambda, Z(n))) over surviving trials with a bootstrap
// confidence interval. Throws when fewer than 30 survivors are available.
LaplaceEstimate empirical_laplace(const RunResult& run, int n, std::span<const double> lambda,
                                  double q_n, int bootstrap_resamples = 1000);

// Fraction of trials stuck in 1 <= ||Z(n)|| <= K.
double dichotomy_check(const RunResult& run, int n, long long K);

} // namespace gwinf
