#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gwinf {

// Neumaier compensated summation. The survival functionals decay to ~1e-6
// while being assembled from N terms of comparable size, so plain
// accumulation would contaminate the asymptotic regime.
class CompensatedSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

inline double compensated_dot(std::span<const double> a, std::span<const double> b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
    return s.value();
}

// t^(1+alpha) with exact fast paths for the two tail indices used throughout.
inline double pow1pa(double t, double alpha) {
    if (alpha == 1.0) return t * t;
    if (alpha == 0.5) return t * std::sqrt(t);
    return std::pow(t, 1.0 + alpha);
}

inline double sup_norm_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline std::vector<double> log_spaced_grid(double lo, double hi, int n) {
    std::vector<double> g(n);
    const double llo = std::log(lo), lhi = std::log(hi);
    for (int k = 0; k < n; ++k)
        g[k] = std::exp(llo + (lhi - llo) * (n == 1 ? 0.0 : double(k) / (n - 1)));
    return g;
}

} // namespace gwinf
