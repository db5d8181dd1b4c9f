#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace bdsde {

// Counter-based generator: every draw is a pure function of (seed, stream, counter).
namespace stream {
inline constexpr std::uint64_t W = 0x57;
inline constexpr std::uint64_t B = 0x42;
inline constexpr std::uint64_t Aux = 0x41;
}  // namespace stream

inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream_id)
        : key_(mix64(mix64(seed) ^ (stream_id * 0xd1b54a32d192ed03ULL))) {}

    std::uint64_t bits(std::uint64_t counter) const { return mix64(key_ ^ mix64(counter)); }

    // Uniform on (0, 1).
    double uniform(std::uint64_t counter) const {
        return (double(bits(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal from the Box-Muller pair at counters 2k, 2k+1.
    double normal(std::uint64_t k) const {
        const double u1 = uniform(2 * k);
        const double u2 = uniform(2 * k + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double sign(std::uint64_t k) const { return (bits(k) >> 63) ? 1.0 : -1.0; }

    CounterRng substream(std::uint64_t id) const { return CounterRng(key_, id + 1); }

private:
    std::uint64_t key_;
};

}  // namespace bdsde
