#pragma once

// Keyed counter-based random streams. Output k of a stream is
// splitmix64(key + (k + 1) * golden_gamma), so a stream is a pure function of
// its key and position: replications can run on any thread in any order.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace cdfreg {

inline constexpr std::uint64_t splitmix64_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    using result_type = std::uint64_t;
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    explicit Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) : key_(splitmix64_mix(seed)) {
        for (std::uint64_t s : stream) key_ = splitmix64_mix(key_ ^ splitmix64_mix(s + kGamma));
    }

    // Child stream keyed by this stream's key, independent of its position.
    Rng substream(std::uint64_t id) const {
        Rng r(0);
        r.key_ = splitmix64_mix(key_ ^ splitmix64_mix(id ^ 0xD1B54A32D192ED03ULL));
        return r;
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t{0}; }

    result_type operator()() { return splitmix64_mix(key_ + (++counter_) * kGamma); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    // Uniform on the open interval (0, 1).
    double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // Standard normal via Box-Muller; each call consumes two outputs.
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift with rejection.
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::uint64_t key() const { return key_; }
    std::uint64_t position() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace cdfreg
