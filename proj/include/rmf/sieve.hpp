#ifndef RMF_SIEVE_HPP
#define RMF_SIEVE_HPP

// Smallest-prime-factor tables and the arithmetic functions built on them.
//
// Memory: one 32-bit word per integer up to the limit, plus the prime list
// (about limit / log(limit) words). A limit of 10^8 needs roughly 430 MB.

#include "rmf/errors.hpp"
#include "rmf/summation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <string>
#include <utility>
#include <vector>

namespace rmf
{

/// Hard cap on the table limit: spf entries are stored as uint32_t.
inline constexpr std::uint64_t kMaxTableLimit = 4'000'000'000ULL;

struct PrimePower
{
    std::uint32_t prime;
    std::uint32_t exponent;

    friend bool operator==(const PrimePower&, const PrimePower&) = default;
};

struct Factorization
{
    std::uint64_t n = 1;
    std::vector<PrimePower> factors;
};

class PrimeTables
{
  public:
    PrimeTables() = default;

    [[nodiscard]] std::uint64_t limit() const noexcept { return limit_; }
    [[nodiscard]] const std::vector<std::uint32_t>& spf() const noexcept { return spf_; }
    [[nodiscard]] const std::vector<std::uint32_t>& primes() const noexcept { return primes_; }

    [[nodiscard]] std::uint32_t smallest_factor(std::uint64_t n) const { return spf_[checked(n)]; }

    [[nodiscard]] bool is_prime(std::uint64_t n) const { return n >= 2 && n <= limit_ && spf_[n] == n; }

    /// Number of primes <= x, for 0 <= x <= limit.
    [[nodiscard]] std::size_t prime_count(std::uint64_t x) const
    {
        const auto it = std::upper_bound(primes_.begin(), primes_.end(), x,
                                         [](std::uint64_t v, std::uint32_t p) { return v < p; });
        return static_cast<std::size_t>(it - primes_.begin());
    }

    /// Index of the prime p in primes(); p must be prime.
    [[nodiscard]] std::size_t prime_index(std::uint64_t p) const
    {
        require(is_prime(p), "prime_index: argument is not a prime within the table");
        return prime_count(p) - 1;
    }

  private:
    friend PrimeTables build_tables(std::uint64_t limit);
    friend PrimeTables tables_from_spf(std::vector<std::uint32_t> spf);

    [[nodiscard]] std::uint64_t checked(std::uint64_t n) const
    {
        require(n >= 1 && n <= limit_, "argument out of table range");
        return n;
    }

    std::uint64_t limit_ = 0;
    std::vector<std::uint32_t> spf_;
    std::vector<std::uint32_t> primes_;
};

/// Linear sieve. spf[0] = 0, spf[1] = 1.
inline PrimeTables build_tables(std::uint64_t limit)
{
    require(limit >= 2, "build_tables: limit must be at least 2");
    if (limit > kMaxTableLimit)
        throw ResourceError("build_tables: limit exceeds the 32-bit table cap");

    PrimeTables t;
    try {
        t.spf_.assign(limit + 1, 0);
        const double est = 1.3 * static_cast<double>(limit) / std::log(static_cast<double>(limit)) + 16;
        t.primes_.reserve(static_cast<std::size_t>(est));
    }
    catch (const std::bad_alloc&) {
        throw ResourceError("build_tables: allocation failed for limit " + std::to_string(limit));
    }
    t.limit_ = limit;
    t.spf_[1] = 1;
    auto& spf = t.spf_;
    auto& primes = t.primes_;
    for (std::uint64_t i = 2; i <= limit; ++i) {
        if (spf[i] == 0) {
            spf[i] = static_cast<std::uint32_t>(i);
            primes.push_back(static_cast<std::uint32_t>(i));
        }
        const std::uint32_t si = spf[i];
        for (const std::uint32_t p : primes) {
            if (p > si)
                break;
            const std::uint64_t ip = i * p;
            if (ip > limit)
                break;
            spf[ip] = p;
        }
    }
    return t;
}

/// Rebuilds the prime list from a loaded spf array.
inline PrimeTables tables_from_spf(std::vector<std::uint32_t> spf)
{
    require(spf.size() >= 3, "tables_from_spf: array too short");
    PrimeTables t;
    t.limit_ = spf.size() - 1;
    t.spf_ = std::move(spf);
    for (std::uint64_t n = 2; n <= t.limit_; ++n)
        if (t.spf_[n] == n)
            t.primes_.push_back(static_cast<std::uint32_t>(n));
    return t;
}

inline Factorization factorize(std::uint64_t n, const PrimeTables& tables)
{
    require(n >= 1 && n <= tables.limit(), "factorize: n out of range");
    Factorization f;
    f.n = n;
    const auto& spf = tables.spf();
    while (n > 1) {
        const std::uint32_t p = spf[n];
        std::uint32_t e = 0;
        while (n % p == 0) {
            n /= p;
            ++e;
        }
        f.factors.push_back({p, e});
    }
    return f;
}

/// P(n). Undefined for n = 1, which is rejected.
inline std::uint64_t largest_prime_factor(std::uint64_t n, const PrimeTables& tables)
{
    require(n >= 2 && n <= tables.limit(), "largest_prime_factor: n must lie in [2, limit]");
    const auto& spf = tables.spf();
    std::uint64_t p = 1;
    while (n > 1) {
        p = spf[n];
        n /= p;
    }
    return p;
}

/// P(n) with the convention P(1) = 1, so that "P(n) > y" is false for n = 1 and every y >= 1.
inline std::uint64_t largest_prime_factor_or_one(std::uint64_t n, const PrimeTables& tables)
{
    return n == 1 ? 1 : largest_prime_factor(n, tables);
}

inline int mobius(std::uint64_t n, const PrimeTables& tables)
{
    require(n >= 1 && n <= tables.limit(), "mobius: n out of range");
    const auto& spf = tables.spf();
    int sign = 1;
    while (n > 1) {
        const std::uint32_t p = spf[n];
        n /= p;
        if (n % p == 0)
            return 0;
        sign = -sign;
    }
    return sign;
}

namespace detail
{

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r = 0;
    if (__builtin_mul_overflow(a, b, &r))
        throw OverflowError("divisor function value overflows 64 bits");
    return r;
}

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t r = 0;
    if (__builtin_add_overflow(a, b, &r))
        throw OverflowError("divisor partial sum overflows 64 bits");
    return r;
}

/// binomial(e + m - 1, m - 1) = binomial(e + m - 1, e), exact.
inline std::uint64_t local_divisor_count(std::uint64_t e, std::uint64_t m)
{
    unsigned __int128 c = 1;
    for (std::uint64_t i = 1; i <= e; ++i) {
        c = c * (m - 1 + i);
        if (c % i != 0)
            throw OverflowError("local_divisor_count: inexact intermediate");
        c /= i;
        if (c > std::numeric_limits<std::uint64_t>::max())
            throw OverflowError("divisor function value overflows 64 bits");
    }
    return static_cast<std::uint64_t>(c);
}

} // namespace detail

/// d_m(n): the number of ordered m-tuples of positive integers with product n.
inline std::uint64_t divisor_m(std::uint64_t n, std::uint64_t m, const PrimeTables& tables)
{
    require(n >= 1 && n <= tables.limit(), "divisor_m: n out of range");
    require(m >= 1, "divisor_m: m must be positive");
    const auto& spf = tables.spf();
    std::uint64_t d = 1;
    while (n > 1) {
        const std::uint32_t p = spf[n];
        std::uint64_t e = 0;
        while (n % p == 0) {
            n /= p;
            ++e;
        }
        d = detail::checked_mul(d, detail::local_divisor_count(e, m));
    }
    return d;
}

/// Exact sum of d_m(n) over 1 <= n <= x (zero for x = 0).
inline std::uint64_t divisor_partial_sum(std::uint64_t x, std::uint64_t m, const PrimeTables& tables)
{
    require(x <= tables.limit(), "divisor_partial_sum: x exceeds table limit");
    std::uint64_t s = 0;
    for (std::uint64_t n = 1; n <= x; ++n)
        s = detail::checked_add(s, divisor_m(n, m, tables));
    return s;
}

/// #{n <= x : mu(n) != 0}.
inline std::uint64_t squarefree_count(std::uint64_t x, const PrimeTables& tables)
{
    require(x <= tables.limit(), "squarefree_count: x exceeds table limit");
    std::uint64_t c = 0;
    for (std::uint64_t n = 1; n <= x; ++n)
        c += mobius(n, tables) != 0 ? 1 : 0;
    return c;
}

/// Squarefree counts Q(0..y) in one pass.
inline std::vector<std::uint64_t> squarefree_counts(std::uint64_t y, const PrimeTables& tables)
{
    require(y <= tables.limit(), "squarefree_counts: y exceeds table limit");
    std::vector<std::uint64_t> q(y + 1, 0);
    for (std::uint64_t n = 1; n <= y; ++n)
        q[n] = q[n - 1] + (mobius(n, tables) != 0 ? 1 : 0);
    return q;
}

namespace detail
{

template <class Weight>
double prime_interval_sum(std::uint64_t a, std::uint64_t b, const PrimeTables& tables, Weight w)
{
    require(a <= b && b <= tables.limit(), "prime sum: need a <= b <= limit");
    const auto& primes = tables.primes();
    CompensatedSum s;
    for (std::size_t i = tables.prime_count(a); i < primes.size() && primes[i] <= b; ++i)
        s.add(w(static_cast<double>(primes[i])));
    return s.value();
}

} // namespace detail

/// Sum of 1/p over primes a < p <= b.
inline double mertens_reciprocal_sum(std::uint64_t a, std::uint64_t b, const PrimeTables& tables)
{
    return detail::prime_interval_sum(a, b, tables, [](double p) { return 1.0 / p; });
}

/// Sum of log(p)/p over primes a < p <= b.
inline double mertens_log_sum(std::uint64_t a, std::uint64_t b, const PrimeTables& tables)
{
    return detail::prime_interval_sum(a, b, tables, [](double p) { return std::log(p) / p; });
}

// ---------------------------------------------------------------------------
// On-disk cache: 8-byte magic, 8-byte little-endian limit, then limit + 1
// little-endian uint32 spf entries.

inline constexpr std::array<char, 8> kTableMagic{'R', 'M', 'F', 'S', 'P', 'F', '0', '1'};

namespace detail
{

inline void put_le(std::ostream& os, std::uint64_t v, int bytes)
{
    for (int i = 0; i < bytes; ++i)
        os.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(const unsigned char* p, int bytes)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

} // namespace detail

inline void save_tables(const std::string& path, const PrimeTables& tables)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os)
        throw ResourceError("save_tables: cannot open " + path);
    os.write(kTableMagic.data(), kTableMagic.size());
    detail::put_le(os, tables.limit(), 8);
    std::vector<char> buf(4 * 4096);
    const auto& spf = tables.spf();
    std::size_t k = 0;
    for (std::uint32_t v : spf) {
        for (int i = 0; i < 4; ++i)
            buf[k++] = static_cast<char>((v >> (8 * i)) & 0xFF);
        if (k == buf.size()) {
            os.write(buf.data(), static_cast<std::streamsize>(k));
            k = 0;
        }
    }
    os.write(buf.data(), static_cast<std::streamsize>(k));
    if (!os)
        throw ResourceError("save_tables: write failed for " + path);
}

/// Loads a cache file; throws InvalidArgument on bad magic, a limit other than
/// expected_limit, or a truncated/inconsistent payload.
inline PrimeTables load_tables(const std::string& path, std::uint64_t expected_limit)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw ResourceError("load_tables: cannot open " + path);
    std::array<char, 8> magic{};
    unsigned char lim[8];
    is.read(magic.data(), 8);
    is.read(reinterpret_cast<char*>(lim), 8);
    require(static_cast<bool>(is) && magic == kTableMagic, "load_tables: bad magic in " + path);
    const std::uint64_t limit = detail::get_le(lim, 8);
    require(limit == expected_limit, "load_tables: cached limit " + std::to_string(limit) +
                                         " does not match requested " + std::to_string(expected_limit));
    if (limit < 2 || limit > kMaxTableLimit)
        throw InvalidArgument("load_tables: stored limit out of range");
    std::vector<std::uint32_t> spf;
    try {
        spf.resize(limit + 1);
    }
    catch (const std::bad_alloc&) {
        throw ResourceError("load_tables: allocation failed");
    }
    std::vector<unsigned char> buf(4 * 4096);
    std::uint64_t n = 0;
    while (n <= limit) {
        const std::uint64_t want = std::min<std::uint64_t>(4096, limit + 1 - n);
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(4 * want));
        require(static_cast<std::uint64_t>(is.gcount()) == 4 * want, "load_tables: truncated payload");
        for (std::uint64_t i = 0; i < want; ++i)
            spf[n + i] = static_cast<std::uint32_t>(detail::get_le(&buf[4 * i], 4));
        n += want;
    }
    require(spf[1] == 1, "load_tables: spf[1] sentinel missing");
    for (std::uint64_t i = 2; i <= limit; ++i)
        require(spf[i] >= 2 && spf[i] <= i && i % spf[i] == 0, "load_tables: corrupt spf entry");
    return tables_from_spf(std::move(spf));
}

} // namespace rmf

#endif // RMF_SIEVE_HPP
