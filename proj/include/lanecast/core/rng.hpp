#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>
#include <utility>

namespace lanecast {

// Deterministic random source built on SplitMix64.  The standard <random>
// distributions are implementation-defined, so everything downstream of a
// seed (corpus generation, window sampling, shuffles, weight init) goes
// through this class to keep results reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in (0, hi]: the prediction-horizon draw excludes zero so a
    // sampled window never touches the transition frame itself.
    double uniform_open_closed(double hi) { return hi * (1.0 - uniform()); }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = (0xFFFFFFFFFFFFFFFFull / n) * n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates; the order of swaps is part of the reproducibility contract.
    template <typename RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::uint64_t state_;
};

// FNV-1a, used to fold string tags ("balance", "epoch", ...) into stream keys.
constexpr std::uint64_t rng_tag(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

// Derives an independent stream from a master seed and a key path, e.g.
// keyed_rng(seed, {rng_tag("lc"), recording_id, track_id, frame}).  Every
// consumer derives its own stream this way, so adding or reordering work in
// one place never perturbs the draws seen by another.
inline Rng keyed_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = seed;
    for (std::uint64_t k : keys) {
        h ^= k + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
        std::uint64_t z = h;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        h = z ^ (z >> 31);
    }
    return Rng(h);
}

}  // namespace lanecast
