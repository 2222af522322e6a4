#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace stakesim {

// All randomness in the project flows through this engine so that results are
// reproducible bit-for-bit across platforms. Standard-library distributions
// are implementation defined and must not be used.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// FNV-1a, used to fold sub-seed labels into the root seed.
inline std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& word : s_) word = splitmix64(sm);
    }

    // Deterministic stream derived from (root, label, index); used to give
    // every message/epoch/module its own independent stream.
    static Rng derive(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
        std::uint64_t sm = root ^ hash_label(label);
        std::uint64_t mixed = splitmix64(sm);
        sm = mixed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
        return Rng(splitmix64(sm));
    }

    std::uint64_t next_u64() {  // xoshiro256++
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n); n must be positive.
    std::uint64_t uniform_below(std::uint64_t n) {
        // Multiply-shift bounded draw; bias is negligible for n << 2^64 and
        // the same on every platform, which is what matters here.
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {  // inclusive bounds
        return lo + static_cast<std::int64_t>(uniform_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double uniform_range(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential(double mean) {
        double u = uniform();
        return -mean * std::log1p(-u);
    }

    double normal() {  // Box-Muller, one value per call
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = uniform_below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace stakesim
