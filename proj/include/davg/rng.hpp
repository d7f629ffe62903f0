#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace davg {

/// Tags separating the independent random streams a scenario consumes.
enum class StreamPurpose : std::uint64_t {
    topology = 1,
    partition = 2,
    init = 3,
    shuffle = 4,
    synth = 5,
};

/**
 * Counter-based generator: the n-th draw is a pure function of (key, n).
 *
 * Keys are derived from (seed, node, round, purpose) by chained 64-bit
 * finalizer mixing, so every tuple addresses its own stream and no stream
 * depends on how many draws another one has consumed. Satisfies
 * UniformRandomBitGenerator.
 */
class CounterRng {
public:
    using result_type = std::uint64_t;

    explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;
    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Standard normal via Box-Muller (one value per call, the sine branch is discarded).
    double normal() noexcept;
    /// Unbiased integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

CounterRng rng_stream(std::uint64_t seed, std::uint64_t node, std::uint64_t round,
                      StreamPurpose purpose) noexcept;

/// Fisher-Yates shuffle driven by a CounterRng; platform independent unlike std::shuffle.
template <class T>
void shuffle(std::span<T> items, CounterRng& rng) noexcept
{
    for (std::size_t i = items.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace davg
