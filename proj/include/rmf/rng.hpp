#ifndef RMF_RNG_HPP
#define RMF_RNG_HPP

// Counter-based hashing: every random quantity is a pure function of a key
// and a counter, so draws never depend on evaluation order or thread layout.

#include <cstdint>

namespace rmf
{

inline constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// 64 uniform bits keyed by (key, counter).
inline constexpr std::uint64_t keyed_bits(std::uint64_t key, std::uint64_t counter) noexcept
{
    const std::uint64_t k = splitmix64(key ^ 0x6A09E667F3BCC909ULL);
    return splitmix64(k ^ splitmix64(counter + 0x632BE59BD9B4E019ULL));
}

/// Child seed for (base, stream, index); used to key trials and resamples.
inline constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t index) noexcept
{
    return keyed_bits(keyed_bits(base, stream), index);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline constexpr double to_unit(std::uint64_t bits) noexcept
{
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Small sequential generator for resampling statistics (bootstrap).
/// Satisfies UniformRandomBitGenerator.
class CounterEngine
{
  public:
    using result_type = std::uint64_t;

    explicit CounterEngine(std::uint64_t key) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return keyed_bits(key_, counter_++); }

  private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace rmf

#endif // RMF_RNG_HPP
