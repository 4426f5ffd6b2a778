#pragma once

#include <cmath>
#include <cstdint>

namespace threatlang {

// Name of the per-trial seeding scheme, recorded in simulation report
// headers so results can be reproduced elsewhere:
//   state_i = splitmix64 seeded with (master_seed + (trial+1) * 0x9E3779B97F4A7C15)
//   generator_i = xoshiro256++ seeded with four successive splitmix64 outputs
inline constexpr const char* kRngMixerName = "splitmix64/xoshiro256++ v1";

struct SplitMix64 {
    uint64_t state;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256++ generator with explicit, portable output. All sampling in
// the toolkit goes through this class so that reports are bit-reproducible
// across platforms and worker counts.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1]; safe as a log() argument.
    double next_open() { return 1.0 - next_double(); }

    // Standard normal via Box-Muller; consumes two uniforms per call.
    double next_normal() {
        double u1 = next_open();
        double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4];
};

inline uint64_t trial_seed(uint64_t master_seed, uint64_t trial) {
    return master_seed + (trial + 1) * 0x9E3779B97F4A7C15ULL;
}

inline Rng trial_rng(uint64_t master_seed, uint64_t trial) {
    return Rng(trial_seed(master_seed, trial));
}

} // namespace threatlang
