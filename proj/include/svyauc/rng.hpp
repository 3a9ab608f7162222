#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

#include "svyauc/normal.hpp"

namespace svyauc {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

} // namespace detail

/// Reproducible stream identity: a master seed plus a stream id.
/// Concrete generators are derived from it by key, so any (seed, stream, key...) tuple maps to the
/// same sequence regardless of call order or thread count.
struct ResampleRng {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// xoshiro256** whose state is derived by hashing a key tuple with SplitMix64.
class KeyedGenerator {
public:
    using result_type = std::uint64_t;

    KeyedGenerator(std::uint64_t seed, std::initializer_list<std::uint64_t> key) {
        std::uint64_t h = seed;
        std::uint64_t mixer = 0x243F6A8885A308D3ULL;
        h ^= detail::splitmix64(mixer);
        for (std::uint64_t k : key) {
            std::uint64_t s = h ^ (k + 0x632BE59BD9B4E019ULL);
            h = detail::splitmix64(s);
        }
        std::uint64_t s = h;
        for (auto& word : state_) word = detail::splitmix64(s);
    }

    KeyedGenerator(const ResampleRng& rng, std::initializer_list<std::uint64_t> key)
        : KeyedGenerator(mix_stream(rng), key) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }

    result_type operator()() {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform integer in [0, bound) by Lemire's multiply-shift with rejection (unbiased).
    std::uint64_t bounded(std::uint64_t bound) {
        if (bound <= 1) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * bound;
        auto low = static_cast<std::uint64_t>(m);
        if (low < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * bound;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Uniform double strictly inside (0,1).
    double uniform_open() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal by inverse-CDF transform of a uniform draw.
    double normal() { return std_normal_quantile(uniform_open()); }

private:
    static std::uint64_t mix_stream(const ResampleRng& rng) {
        std::uint64_t s = rng.seed ^ detail::rotl(rng.stream * 0xD1B54A32D192ED03ULL, 29);
        return detail::splitmix64(s);
    }

    std::array<std::uint64_t, 4> state_{};
};

} // namespace svyauc
