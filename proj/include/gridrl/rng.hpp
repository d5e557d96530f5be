#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace gridrl {

// FNV-1a over bytes; used for stream derivation, content partitioning and
// artifact digests. Stable across platforms.
inline uint64_t fnv1a64(std::span<const unsigned char> bytes, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    return fnv1a64(std::span{reinterpret_cast<const unsigned char*>(s.data()), s.size()}, h);
}

inline uint64_t hash_combine(uint64_t h, uint64_t v) {
    // splitmix64 finalizer on the xor-combined state
    uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Named substream derivation: every random decision in the system draws from
// a stream keyed by (root seed, purpose tag, indices). Checkpoints only need
// to store the root seed and loop counters to reproduce trajectories.
inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a = 0, uint64_t b = 0,
                            uint64_t c = 0) {
    uint64_t h = fnv1a64(tag);
    h = hash_combine(h, root);
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    h = hash_combine(h, c);
    return h;
}

// mt19937_64 with hand-rolled draws; std::uniform_*_distribution is not
// bit-stable across standard libraries, these are.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0,1) with 53-bit resolution
    double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // uniform integer in [lo, hi] via rejection-free Lemire-style scaling
    int uniform_int(int lo, int hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(static_cast<uint64_t>(uniform01() * static_cast<double>(span)) %
                                     span);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, no cached spare (keeps the stream position predictable)
    double gaussian(double mean, double stddev) {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586 * u2);
    }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // index draw from non-negative weights (caller guarantees sum > 0)
    int weighted_index(std::span<const double> weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = uniform01() * total;
        for (size_t i = 0; i < weights.size(); ++i) {
            u -= weights[i];
            if (u < 0.0) return static_cast<int>(i);
        }
        return static_cast<int>(weights.size()) - 1;
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace gridrl
