#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace wisp {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// xoshiro256++ with splitmix64 seeding. Self-contained so that streams are
/// bit-reproducible across standard libraries and platforms.
class Rng {
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = detail::splitmix64(x);
    }

    /// Independent child stream; `tag` distinguishes streams derived from the
    /// same parent seed (replication index, purpose id, ...).
    static Rng derive(std::uint64_t seed, std::uint64_t tag) {
        std::uint64_t x = seed;
        std::uint64_t a = detail::splitmix64(x);
        x ^= 0x2545f4914f6cdd1dULL * (tag + 1);
        std::uint64_t b = detail::splitmix64(x);
        return Rng(a ^ (b + 0x9e3779b97f4a7c15ULL * tag));
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
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

    std::uint64_t operator()() { return next_u64(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ULL; }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1], safe as a log argument.
    double uniform01_open() { return 1.0 - uniform01(); }

    double exponential(double rate) { return -std::log(uniform01_open()) / rate; }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Lemire-style rejection-free enough for n << 2^64.
        return static_cast<std::uint64_t>(uniform01() * static_cast<double>(n));
    }

  private:
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace wisp
