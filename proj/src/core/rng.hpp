#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stxm {

// SplitMix64 step; used both as a stand-alone mixer and to derive
// substream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless finalizer with full avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic seed derivation: fold stream tags into the master seed.
// Every parallel work unit (campaign row, replicate, mixture component,
// MC block, tree, bootstrap resample) gets its own derived seed, so
// results never depend on the thread schedule. The master is avalanched
// before the tag enters, so nearby masters and small tags cannot collide.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a) {
    return mix64(mix64(master ^ 0x9e3779b97f4a7c15ULL) +
                 a * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
    return derive_seed(derive_seed(master, a, b), c);
}

// xoshiro256++ engine. Self-contained so draw sequences are reproducible
// bit-for-bit independent of the standard library version.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
        have_gauss_ = false;
        gauss_ = 0.0;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0,1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0,1]; safe as a log argument.
    double uniform_pos() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    // Standard exponential via inversion.
    double exponential() { return -std::log(uniform_pos()); }

    // Standard normal, Box-Muller with one cached variate per pair.
    double normal() {
        if (have_gauss_) {
            have_gauss_ = false;
            return gauss_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        gauss_ = r * std::sin(a);
        have_gauss_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Lemire's multiply-shift rejection method.
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * n;
        std::uint64_t l = static_cast<std::uint64_t>(m);
        if (l < n) {
            std::uint64_t t = (0 - n) % n;
            while (l < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * n;
                l = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t state_[4];
    bool have_gauss_;
    double gauss_;
};

}  // namespace stxm
