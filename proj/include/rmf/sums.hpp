#ifndef RMF_SUMS_HPP
#define RMF_SUMS_HPP

// Partial sums over integers with a large prime factor.
//
// "p > sqrt(x)" is always decided as p > isqrt(x), i.e. p * p > x, in exact
// integer arithmetic.

#include "rmf/errors.hpp"
#include "rmf/rmf.hpp"
#include "rmf/sieve.hpp"
#include "rmf/summation.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace rmf
{

/// Largest r with r * r <= n.
inline constexpr std::uint64_t isqrt(std::uint64_t n) noexcept
{
    if (n < 2)
        return n;
    auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n)
        --r;
    while ((r + 1) * (r + 1) <= n)
        ++r;
    return r;
}

inline constexpr std::uint64_t kBruteForceCap = 1'000'000;

struct SumStatistics
{
    std::uint64_t x = 0;
    Complex m_f;     ///< M_f(x)
    double v = 0.0;  ///< V(x)
    Complex a_full;  ///< sum_{n <= x} f(n)
};

namespace detail
{

inline void check_x(std::uint64_t x, const SampledFunction& f, const char* who)
{
    require(x >= 1 && x <= f.tables().limit(), std::string(who) + ": x must lie in [1, table limit]");
}

/// Calls g(p, q) for every prime isqrt(x) < p <= x with q = floor(x / p).
template <class G>
void for_each_large_prime(std::uint64_t x, const PrimeTables& tables, G&& g)
{
    const auto& primes = tables.primes();
    for (std::size_t i = tables.prime_count(isqrt(x)); i < primes.size() && primes[i] <= x; ++i)
        g(static_cast<std::uint64_t>(primes[i]), x / primes[i]);
}

} // namespace detail

/// M_f(x) = sum_{isqrt(x) < p <= x} f(p) A_f(floor(x/p)); only A_f up to isqrt(x) is formed.
inline Complex large_prime_sum(const SampledFunction& f, std::uint64_t x)
{
    detail::check_x(x, f, "large_prime_sum");
    const auto a = prefix_sums(f, isqrt(x));
    CompensatedComplexSum s;
    detail::for_each_large_prime(x, f.tables(), [&](std::uint64_t p, std::uint64_t q) {
        s.add(f.prime_value(p) * a[q]);
    });
    return s.value();
}

/// Direct enumeration of sum_{n <= x, P(n) > sqrt(x)} f(n).
inline Complex large_prime_sum_bruteforce(const SampledFunction& f, std::uint64_t x)
{
    detail::check_x(x, f, "large_prime_sum_bruteforce");
    require(x <= kBruteForceCap, "large_prime_sum_bruteforce: x above the oracle cap");
    CompensatedComplexSum s;
    for (std::uint64_t n = 2; n <= x; ++n) {
        const std::uint64_t p = largest_prime_factor(n, f.tables());
        if (p * p > x)
            s.add(f.value_at(n));
    }
    return s.value();
}

/// V(x) = sum_{isqrt(x) < p <= x} |A_f(floor(x/p))|^2.
inline double conditional_variance(const SampledFunction& f, std::uint64_t x)
{
    detail::check_x(x, f, "conditional_variance");
    const auto a = prefix_sums(f, isqrt(x));
    CompensatedSum s;
    detail::for_each_large_prime(x, f.tables(), [&](std::uint64_t, std::uint64_t q) { s.add(std::norm(a[q])); });
    return s.value();
}

/// E[V(x)], exactly: sum over large primes of Q(floor(x/p)), with Q the
/// squarefree counting function (Rademacher) or Q(y) = y (Steinhaus).
inline double exact_expected_variance(std::uint64_t x, Model model, const PrimeTables& tables)
{
    require(x >= 1 && x <= tables.limit(), "exact_expected_variance: x must lie in [1, table limit]");
    const std::uint64_t r = isqrt(x);
    std::vector<std::uint64_t> q;
    if (model == Model::Rademacher)
        q = squarefree_counts(r, tables);
    std::uint64_t total = 0;
    detail::for_each_large_prime(x, tables, [&](std::uint64_t, std::uint64_t k) {
        total += model == Model::Rademacher ? q[k] : k;
    });
    return static_cast<double>(total);
}

/// Sum of f(n) over n_lo < n <= n_hi with p_lo < P(n) <= p_hi. n = 1 never counts.
inline Complex interval_sum_pconstraint(const SampledFunction& f, std::uint64_t n_lo, std::uint64_t n_hi,
                                        std::uint64_t p_lo, std::uint64_t p_hi)
{
    require(n_lo <= n_hi && n_hi <= f.tables().limit(), "interval_sum_pconstraint: need n_lo <= n_hi <= limit");
    require(p_lo <= p_hi, "interval_sum_pconstraint: need p_lo <= p_hi");
    CompensatedComplexSum s;
    if (p_lo == p_hi)
        return s.value();
    for (std::uint64_t n = std::max<std::uint64_t>(n_lo + 1, 2); n <= n_hi; ++n) {
        const std::uint64_t p = largest_prime_factor(n, f.tables());
        if (p > p_lo && p <= p_hi)
            s.add(f.value_at(n));
    }
    return s.value();
}

struct IncrementDecomposition
{
    Complex base;      ///< M_f(x_prev)
    Complex dropped;   ///< -sum_{n <= x_prev, sqrt(x_prev) < P(n) <= sqrt(x)} f(n)
    Complex added;     ///< sum_{x_prev < n <= x, P(n) > sqrt(x)} f(n)

    [[nodiscard]] Complex total() const noexcept { return base + dropped + added; }
};

/// Splits M_f(x) into its value at x_prev plus the two increment sums.
inline IncrementDecomposition increment_decomposition_check(const SampledFunction& f, std::uint64_t x_prev,
                                                            std::uint64_t x)
{
    require(x_prev >= 2 && x_prev <= x && x <= f.tables().limit(),
            "increment_decomposition_check: need 2 <= x_prev <= x <= limit");
    const std::uint64_t r_prev = isqrt(x_prev);
    const std::uint64_t r = isqrt(x);
    return {large_prime_sum(f, x_prev), -interval_sum_pconstraint(f, 0, x_prev, r_prev, r),
            interval_sum_pconstraint(f, x_prev, x, r, x)};
}

/// M_f(x) and V(x) for every 1 <= x <= x_max in O(x_max) time.
///
/// Stepping x -> x + 1 changes M_f and V only through n = x + 1 itself (when
/// P(x + 1)^2 > x + 1) and through the prime r leaving the range when
/// x + 1 = r^2.
class LargePrimeSweep
{
  public:
    LargePrimeSweep(const SampledFunction& f, std::uint64_t x_max)
    {
        require(x_max >= 1 && x_max <= f.tables().limit(), "LargePrimeSweep: x_max must lie in [1, limit]");
        try {
            values_ = f.dense_values(x_max);
            m_.assign(x_max + 1, Complex{});
            v_.assign(x_max + 1, 0.0);
            a_.assign(x_max + 1, Complex{});
        }
        catch (const std::bad_alloc&) {
            throw ResourceError("LargePrimeSweep: allocation failed for x_max = " + std::to_string(x_max));
        }
        const auto& spf = f.tables().spf();
        CompensatedComplexSum a;
        for (std::uint64_t n = 1; n <= x_max; ++n) {
            a.add(values_[n]);
            a_[n] = a.value();
        }
        CompensatedComplexSum m;
        CompensatedSum v;
        m_[1] = Complex{};
        std::uint64_t root = 1;
        for (std::uint64_t x = 2; x <= x_max; ++x) {
            std::uint64_t n = x;
            std::uint64_t p = 1;
            while (n > 1) {
                p = spf[n];
                n /= p;
            }
            if (p * p > x) {
                const std::uint64_t q = x / p;
                m.add(values_[x]);
                v.add(std::norm(a_[q]) - std::norm(a_[q - 1]));
            }
            if ((root + 1) * (root + 1) == x) {
                ++root;
                if (spf[root] == root) {
                    m.add(-values_[root] * a_[root - 1]);
                    v.add(-std::norm(a_[root - 1]));
                }
            }
            m_[x] = m.value();
            v_[x] = std::max(0.0, v.value());
        }
    }

    [[nodiscard]] std::uint64_t x_max() const noexcept { return m_.size() - 1; }
    [[nodiscard]] Complex m_f(std::uint64_t x) const { return m_.at(x); }
    [[nodiscard]] double v(std::uint64_t x) const { return v_.at(x); }
    [[nodiscard]] Complex a_full(std::uint64_t x) const { return a_.at(x); }

    [[nodiscard]] SumStatistics at(std::uint64_t x) const { return {x, m_f(x), v(x), a_full(x)}; }

  private:
    std::vector<Complex> values_;
    std::vector<Complex> a_;
    std::vector<Complex> m_;
    std::vector<double> v_;
};

} // namespace rmf

#endif // RMF_SUMS_HPP
