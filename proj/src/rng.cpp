#include "davg/rng.hpp"

#include <cmath>
#include <numbers>

namespace davg {

namespace {
constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t x) noexcept
{
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
}

CounterRng::result_type CounterRng::operator()() noexcept
{
    ++counter_;
    return mix64(key_ + counter_ * golden_gamma);
}

double CounterRng::uniform() noexcept
{
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() noexcept
{
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t bound) noexcept
{
    // rejection keeps the result unbiased
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x = 0;
    do {
        x = (*this)();
    } while (x >= limit);
    return x % bound;
}

CounterRng rng_stream(std::uint64_t seed, std::uint64_t node, std::uint64_t round,
                      StreamPurpose purpose) noexcept
{
    std::uint64_t k = mix64(seed + golden_gamma);
    k = mix64(k ^ (node + 0x632be59bd9b4e019ULL));
    k = mix64(k ^ (round + 0x85157af5d7a3e2c1ULL));
    k = mix64(k ^ (static_cast<std::uint64_t>(purpose) + 0xd1b54a32d192ed03ULL));
    return CounterRng{k};
}

} // namespace davg
