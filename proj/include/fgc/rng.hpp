#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace fgc {

/// SplitMix64 (Steele, Lea & Flood 2014): state += 0x9E3779B97F4A7C15, then the
/// output mix below. Chosen because it is a few lines in any language, so
/// simulator streams can be reproduced outside C++.
///
/// Stream splitting: the stream for (seed, image, lane) starts from
///   state = mix(mix(mix(seed) ^ (image + 1) * 0xD1B54A32D192ED03) ^ (lane + 1) * 0x8CB92BA72F3D8DD7)
/// where mix is the SplitMix64 finalizer. Lane 0 drives scene layout and labels;
/// lane 1 + u drives user u.
///
/// Derived draws (all consume whole 64-bit outputs):
///   uniform  = (next() >> 11) * 2^-53                          in [0, 1)
///   normal   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)              Box-Muller, one value per two uniforms
///   poisson  = Knuth's product method, applied to chunks of mean <= 16 and summed
class SplitMix64 {
public:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    static SplitMix64 stream(std::uint64_t seed, std::uint64_t image, std::uint64_t lane) {
        std::uint64_t s = mix(seed);
        s = mix(s ^ ((image + 1) * 0xD1B54A32D192ED03ULL));
        s = mix(s ^ ((lane + 1) * 0x8CB92BA72F3D8DD7ULL));
        return SplitMix64(s);
    }

    std::uint64_t next() {
        state_ += kGamma;
        return mix(state_);
    }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log1p(-u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::uint64_t poisson(double mean) {
        std::uint64_t total = 0;
        while (mean > 0.0) {
            const double chunk = mean > 16.0 ? 16.0 : mean;
            mean -= chunk;
            const double limit = std::exp(-chunk);
            double product = uniform();
            while (product > limit) {
                ++total;
                product *= uniform();
            }
        }
        return total;
    }

private:
    std::uint64_t state_;
};

}  // namespace fgc
