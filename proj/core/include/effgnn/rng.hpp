#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace effgnn {

/// SplitMix64 step. Used to expand a single 64-bit seed into generator state
/// and to derive independent sub-seeds.
std::uint64_t splitmix64(std::uint64_t& state) noexcept;

/// Mixes a base seed with stream identifiers into a new seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) noexcept;

/// xoshiro256** (Blackman & Vigna). A given seed yields the same stream on
/// every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept;

    std::uint64_t next_u64() noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept;

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

    /// Uniform integer in [lo, hi] inclusive.
    std::int64_t between(std::int64_t lo, std::int64_t hi) noexcept;

    template <class T>
    void shuffle(std::span<T> items) noexcept {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

}  // namespace effgnn
