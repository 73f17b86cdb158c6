#include "wgf/rng.hpp"

#include <cmath>

#include "wgf/errors.hpp"

namespace wgf {

namespace {
constexpr std::uint64_t kMult = 6364136223846793005ULL;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

Rng::Rng(std::uint64_t seed, std::uint64_t stream) {
    // Same seeding dance as pcg32_srandom: advance once with the increment
    // mixed in before and after adding the seed.
    inc_ = (stream << 1u) | 1u;
    state_ = 0u;
    next_u32();
    state_ += seed;
    next_u32();
}

std::uint32_t Rng::next_u32() {
    const std::uint64_t old = state_;
    state_ = old * kMult + inc_;
    const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    const auto rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

double Rng::uniform() {
    const std::uint64_t hi = next_u32() >> 5;   // 27 bits
    const std::uint64_t lo = next_u32() >> 6;   // 26 bits
    return static_cast<double>((hi << 26) | lo) * (1.0 / 9007199254740992.0);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
    if (n <= 0xffffffffULL) {
        // Lemire multiply-shift with rejection, unbiased.
        const std::uint64_t threshold = (0x100000000ULL - n) % n;
        while (true) {
            const std::uint64_t m = static_cast<std::uint64_t>(next_u32()) * n;
            if ((m & 0xffffffffULL) >= threshold) return m >> 32;
        }
    }
    // Wide n: 64-bit draws with modulo rejection.
    const std::uint64_t limit = ~0ULL - (~0ULL % n);
    while (true) {
        const std::uint64_t x =
            (static_cast<std::uint64_t>(next_u32()) << 32) | next_u32();
        if (x < limit) return x % n;
    }
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_normal_;
    }
    // u1 in (0,1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = kTwoPi * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

void Rng::fill_normal(double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = normal();
}

std::vector<double> Rng::normal_vec(std::size_t n) {
    std::vector<double> v(n);
    fill_normal(v.data(), n);
    return v;
}

}  // namespace wgf
