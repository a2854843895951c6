#ifndef LFPP_RNG_HPP
#define LFPP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lfpp {

/// splitmix64 finalizer; bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a list of integer tags.
/// Used to give each (n, replicate) job its own independent stream.
template <typename... Tags>
constexpr std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) noexcept {
    std::uint64_t h = mix64(seed ^ 0x6c66707073656564ULL);
    ((h = mix64(h ^ static_cast<std::uint64_t>(tags))), ...);
    return h;
}

/// Counter-based generator: every (seed, stream, index) triple maps to a fixed
/// standard normal variate, so fields can be generated in any order or in
/// parallel and still be bit-identical.
class CounterRng {
public:
    constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_(mix64(mix64(seed) ^ (stream * 0xd1b54a32d192ed03ULL))) {}

    constexpr std::uint64_t bits(std::uint64_t index, std::uint64_t lane = 0) const noexcept {
        return mix64(key_ ^ mix64(2 * index + lane + 1));
    }

    /// Uniform in the open interval (0, 1).
    double uniform(std::uint64_t index, std::uint64_t lane = 0) const noexcept {
        return (static_cast<double>(bits(index, lane) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Box-Muller on the two lanes of `index`.
    double normal(std::uint64_t index) const noexcept {
        const double u1 = uniform(index, 0);
        const double u2 = uniform(index, 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t key_;
};

// Stream identifiers, one per independent random object in a coupling.
inline constexpr std::uint64_t kStreamCoarse = 1;
inline constexpr std::uint64_t kStreamFine = 2;
inline constexpr std::uint64_t kStreamPairs = 3;

}  // namespace lfpp

#endif  // LFPP_RNG_HPP
