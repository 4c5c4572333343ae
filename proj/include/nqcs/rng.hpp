#pragma once

#include <cstdint>

namespace nqcs {

/// Stream identifiers of the counter-based generator.
enum class Stream : std::uint64_t { Timing = 1, Dropout = 2, Dither = 3, Initial = 4, Solver = 5, Containment = 6 };

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Stateless generator: every draw is a hash of (seed, stream, counter, draw index),
/// so results depend only on those keys and never on evaluation order.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, Stream stream, std::uint64_t counter)
        : key_(splitmix64(splitmix64(seed) ^ splitmix64(static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL) ^
                          splitmix64(counter + 0x8CB92BA72F3D8DD7ULL))) {}

    std::uint64_t next() { return splitmix64(key_ ^ splitmix64(++draw_)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::uint64_t key_;
    std::uint64_t draw_ = 0;
};

}  // namespace nqcs
