#pragma once

#include <cmath>
#include <cstdint>

namespace maxdisc {

/// splitmix64 step; also used as the seed-mixing hash.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Stable 64-bit stream seed for (master seed, replication, component).
/// Scheduling-independent by construction: the stream identity is the
/// tuple, never the draw order.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_tag,
                                 std::uint64_t index_a, std::uint64_t index_b = 0) {
    std::uint64_t s = master;
    std::uint64_t h = splitmix64(s);
    s ^= stream_tag * 0x2545f4914f6cdd1dULL;
    h ^= splitmix64(s);
    s ^= index_a + 0x452821e638d01377ULL;
    h ^= splitmix64(s);
    s ^= index_b + 0xbe5466cf34e90c6cULL;
    h ^= splitmix64(s);
    return h;
}

namespace stream_tag {
inline constexpr std::uint64_t stationary = 1;
inline constexpr std::uint64_t latent = 2;
inline constexpr std::uint64_t fbm = 3;
}  // namespace stream_tag

/// xoshiro256++ with splitmix64 seeding. Deterministic across platforms,
/// unlike std::normal_distribution.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed) noexcept {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64(s);
    }

    std::uint64_t operator()() noexcept {
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

    /// Uniform in (0,1); never returns 0.
    double uniform() noexcept {
        return (static_cast<double>(operator()() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller. Draws are consumed in pairs and the
    /// spare is cached, so a stream yields a fixed sequence.
    double normal() noexcept {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4]{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace maxdisc
