#ifndef RMF_STATS_HPP
#define RMF_STATS_HPP

#include "rmf/errors.hpp"
#include "rmf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace rmf
{

/// Welford running mean and variance.
class MeanAccumulator
{
  public:
    void add(double v) noexcept
    {
        ++n_;
        const double d = v - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d * (v - mean_);
    }

    [[nodiscard]] std::uint64_t count() const noexcept { return n_; }
    [[nodiscard]] double mean() const noexcept { return mean_; }

    [[nodiscard]] double variance() const noexcept
    {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    }

    /// Standard error of the mean.
    [[nodiscard]] double std_error() const noexcept
    {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

  private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Monte Carlo estimate checked against a one-sided upper bound.
struct MomentReport
{
    double estimate = 0.0;
    double std_error = 0.0;
    double bound = 0.0;
    std::uint64_t trials = 0;
    bool violated = false;

    /// violated iff estimate - 3 SE > bound.
    static MomentReport upper(double estimate, double std_error, double bound, std::uint64_t trials)
    {
        return {estimate, std_error, bound, trials, estimate - 3.0 * std_error > bound};
    }

    /// Two-sided agreement: violated iff |estimate - target| > 3 SE.
    static MomentReport equal(double estimate, double std_error, double target, std::uint64_t trials)
    {
        return {estimate, std_error, target, trials, std::abs(estimate - target) > 3.0 * std_error};
    }
};

inline MomentReport upper_report(const MeanAccumulator& acc, double bound)
{
    return MomentReport::upper(acc.mean(), acc.std_error(), bound, acc.count());
}

/// Linear-interpolated quantile (type 7) of unsorted data.
inline double quantile(std::vector<double> v, double q)
{
    require(!v.empty(), "quantile: empty sample");
    require(q >= 0.0 && q <= 1.0, "quantile: q outside [0, 1]");
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline double median(std::vector<double> v)
{
    return quantile(std::move(v), 0.5);
}

/// Bootstrap standard error of the median, deterministic in key.
inline double median_std_error(std::span<const double> v, std::uint64_t key, int resamples = 1000)
{
    require(!v.empty(), "median_std_error: empty sample");
    CounterEngine eng(key);
    MeanAccumulator acc;
    std::vector<double> draw(v.size());
    for (int b = 0; b < resamples; ++b) {
        for (auto& d : draw)
            d = v[eng() % v.size()];
        acc.add(median(draw));
    }
    return std::sqrt(acc.variance());
}

} // namespace rmf

#endif // RMF_STATS_HPP
