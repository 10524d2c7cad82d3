#pragma once

// Counter-based random streams.
//
// Every random decision in the library is drawn from a Philox4x32-10 stream
// addressed by (master seed, tag, a, b). A stream's output depends only on its
// address, so work items can be evaluated in any order or on any thread and
// still consume exactly the same numbers.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>

namespace irand {

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

}  // namespace detail

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
[[nodiscard]] inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) noexcept {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        if (round > 0) {
            key[0] += kW0;
            key[1] += kW1;
        }
        std::uint32_t hi0, lo0, hi1, lo1;
        detail::mulhilo32(kM0, ctr[0], hi0, lo0);
        detail::mulhilo32(kM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
}

// Stream tags keep unrelated consumers of one master seed apart.
enum class StreamTag : std::uint32_t {
    plan_uniform = 1,
    plan_balanced = 2,
    permutation = 3,
    did_permutation = 4,
    synthesis = 5,
    confounders = 10,
    treatment = 11,
    outcome = 12,
    mediator = 13,
    replicate = 20,
    test = 99,
};

/// A single addressable stream. Satisfies UniformRandomBitGenerator.
class CounterRng {
public:
    using result_type = std::uint32_t;

    CounterRng(std::uint64_t seed, StreamTag tag, std::uint32_t a = 0, std::uint32_t b = 0) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          tag_(static_cast<std::uint32_t>(tag)),
          a_(a),
          b_(b) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (lane_ == 4) {
            block_ = philox4x32_10({counter_++, tag_, a_, b_}, key_);
            lane_ = 0;
        }
        return block_[lane_++];
    }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t hi = (*this)();
        return (hi << 32) | (*this)();
    }

    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1); never returns 0.
    double uniform_open() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) by rejection, bound > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t draw;
        do {
            draw = next_u64();
        } while (draw >= limit);
        return draw % bound;
    }

    bool coin() noexcept { return ((*this)() & 1u) != 0; }

    /// Standard normal via Box-Muller; the paired value is cached.
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform_open()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    PhiloxKey key_;
    std::uint32_t tag_;
    std::uint32_t a_;
    std::uint32_t b_;
    std::uint32_t counter_ = 0;
    PhiloxCounter block_{};
    int lane_ = 4;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Derives an independent 64-bit seed from a parent seed and an address.
[[nodiscard]] inline std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag, std::uint32_t a,
                                               std::uint32_t b = 0) noexcept {
    CounterRng rng(seed, tag, a, b);
    return rng.next_u64();
}

/// Fisher-Yates shuffle driven by a counter stream.
template <typename T>
void shuffle(std::span<T> values, CounterRng& rng) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(values[i - 1], values[j]);
    }
}

}  // namespace irand
