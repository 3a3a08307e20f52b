#pragma once

#include <cstdint>

namespace camel {

/// Counter-based generator: output i is a keyed hash of the counter, so streams can be split
/// deterministically and the full state is two integers.
class Rng {
public:
    struct State {
        std::uint64_t key = 0;
        std::uint64_t counter = 0;
        friend bool operator==(const State&, const State&) = default;
    };

    explicit Rng(std::uint64_t seed = 0) : state_{mix(seed ^ 0x6a09e667f3bcc909ULL), 0} {}
    static Rng from_state(State s) {
        Rng r;
        r.state_ = s;
        return r;
    }

    State state() const noexcept { return state_; }

    std::uint64_t next_u64() noexcept { return mix(state_.key + mix(state_.counter++ * 0x9e3779b97f4a7c15ULL)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (consumes two draws, no cached state).
    double normal() noexcept;

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) noexcept;

    /// Independent child stream; does not advance this generator.
    Rng split(std::uint64_t stream) const noexcept {
        Rng r;
        r.state_ = {mix(state_.key ^ mix(stream + 0xbb67ae8584caa73bULL)), 0};
        return r;
    }

private:
    static std::uint64_t mix(std::uint64_t z) noexcept {
        z ^= z >> 33;
        z *= 0xff51afd7ed558ccdULL;
        z ^= z >> 33;
        z *= 0xc4ceb9fe1a85ec53ULL;
        z ^= z >> 33;
        return z;
    }

    State state_;
};

}  // namespace camel
