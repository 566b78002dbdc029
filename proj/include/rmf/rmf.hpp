#ifndef RMF_RMF_HPP
#define RMF_RMF_HPP

// Rademacher and Steinhaus random multiplicative functions.
//
// The value at a prime p is a pure function of (seed, p) through a keyed
// counter hash; nothing is drawn from a sequential stream. Composite values
// are always recomputed from the factorization.

#include "rmf/errors.hpp"
#include "rmf/rng.hpp"
#include "rmf/sieve.hpp"
#include "rmf/summation.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

namespace rmf
{

enum class Model
{
    Rademacher,
    Steinhaus,
};

inline std::string_view to_string(Model m) noexcept
{
    return m == Model::Rademacher ? "rademacher" : "steinhaus";
}

inline Model parse_model(std::string_view s)
{
    if (s == "rademacher")
        return Model::Rademacher;
    if (s == "steinhaus")
        return Model::Steinhaus;
    throw InvalidArgument("unknown model '" + std::string(s) + "'");
}

/// Value of the model at a prime from 64 uniform bits.
inline Complex prime_value_from_bits(Model model, std::uint64_t bits) noexcept
{
    if (model == Model::Rademacher)
        return (bits >> 63) != 0 ? Complex{-1.0, 0.0} : Complex{1.0, 0.0};
    // theta = 2 pi u / 2^64
    const double theta = static_cast<double>(bits) * (2.0 * std::numbers::pi * 0x1.0p-64);
    return {std::cos(theta), std::sin(theta)};
}

/// One realization of f. Cheap to copy; immutable after construction, so a
/// single instance may be evaluated from several threads.
class SampledFunction
{
  public:
    SampledFunction(Model model, std::uint64_t seed, const PrimeTables& tables)
        : model_(model), seed_(seed), seed_large_(seed), tables_(&tables)
    {
    }

    /// f on primes <= cutoff keyed by seed_small, on primes > cutoff keyed by
    /// seed_large. Realizes conditioning on the sigma-algebra of small primes.
    static SampledFunction split(Model model, std::uint64_t seed_small, std::uint64_t cutoff,
                                 std::uint64_t seed_large, const PrimeTables& tables)
    {
        SampledFunction f(model, seed_small, tables);
        f.cutoff_ = cutoff;
        f.seed_large_ = seed_large;
        return f;
    }

    /// Diagnostic realization with explicit values, indexed like tables.primes().
    /// Missing trailing entries are zero. Values need not lie on the model's support.
    static SampledFunction from_prime_values(Model model, std::vector<Complex> values, const PrimeTables& tables)
    {
        SampledFunction f(model, 0, tables);
        f.fixed_ = std::make_shared<const std::vector<Complex>>(std::move(values));
        return f;
    }

    [[nodiscard]] Model model() const noexcept { return model_; }
    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] const PrimeTables& tables() const noexcept { return *tables_; }

    [[nodiscard]] Complex prime_value(std::uint64_t p) const
    {
        require(tables_->is_prime(p), "prime_value: argument is not a prime within the table");
        return prime_value_unchecked(p);
    }

    [[nodiscard]] Complex value_at(std::uint64_t n) const
    {
        require(n >= 1 && n <= tables_->limit(), "value_at: n out of range");
        const auto& spf = tables_->spf();
        Complex v{1.0, 0.0};
        while (n > 1) {
            const std::uint32_t p = spf[n];
            n /= p;
            if (model_ == Model::Rademacher && n % p == 0)
                return {0.0, 0.0};
            v *= prime_value_unchecked(p);
        }
        return v;
    }

    /// f(0..y) with f(0) = 0, computed in one multiplicative pass.
    [[nodiscard]] std::vector<Complex> dense_values(std::uint64_t y) const
    {
        require(y <= tables_->limit(), "dense_values: y exceeds table limit");
        std::vector<Complex> f(y + 1, Complex{});
        if (y >= 1)
            f[1] = 1.0;
        const auto& spf = tables_->spf();
        for (std::uint64_t n = 2; n <= y; ++n) {
            const std::uint32_t p = spf[n];
            if (p == n) {
                f[n] = prime_value_unchecked(n);
                continue;
            }
            const std::uint64_t m = n / p;
            if (model_ == Model::Rademacher && m % p == 0)
                continue;
            f[n] = f[p] * f[m];
        }
        return f;
    }

    /// f(p) for every prime p <= x, in increasing order of p.
    [[nodiscard]] std::vector<Complex> prime_values_upto(std::uint64_t x) const
    {
        require(x <= tables_->limit(), "prime_values_upto: x exceeds table limit");
        const auto& primes = tables_->primes();
        std::vector<Complex> v;
        v.reserve(tables_->prime_count(x));
        for (std::size_t i = 0; i < primes.size() && primes[i] <= x; ++i)
            v.push_back(prime_value_unchecked(primes[i]));
        return v;
    }

  private:
    [[nodiscard]] Complex prime_value_unchecked(std::uint64_t p) const
    {
        if (fixed_) {
            const std::size_t i = tables_->prime_count(p) - 1;
            return i < fixed_->size() ? (*fixed_)[i] : Complex{};
        }
        const std::uint64_t key = p <= cutoff_ ? seed_ : seed_large_;
        return prime_value_from_bits(model_, keyed_bits(key, p));
    }

    Model model_;
    std::uint64_t seed_;
    std::uint64_t seed_large_;
    std::uint64_t cutoff_ = std::numeric_limits<std::uint64_t>::max();
    const PrimeTables* tables_;
    std::shared_ptr<const std::vector<Complex>> fixed_;
};

/// A[k] = sum_{m <= k} f(m) for 0 <= k <= y.
inline std::vector<Complex> prefix_sums(const SampledFunction& f, std::uint64_t y)
{
    std::vector<Complex> a;
    try {
        a = f.dense_values(y);
    }
    catch (const std::bad_alloc&) {
        throw ResourceError("prefix_sums: allocation failed for y = " + std::to_string(y));
    }
    CompensatedComplexSum s;
    for (auto& v : a) {
        s.add(v);
        v = s.value();
    }
    return a;
}

} // namespace rmf

#endif // RMF_RMF_HPP
