#pragma once

// Portable seeded randomness. std::mt19937_64's output sequence is fixed by
// the standard, but the std distributions are not, so bounded integers,
// uniforms and normals are derived here by hand to keep every seeded result
// identical across standard libraries.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace ctvote::rng {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Combine a seed with further key material into a new seed.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t key) {
    return splitmix64(seed ^ splitmix64(key));
}

// Uniform integer in [0, bound) by rejection; bound must be > 0.
inline std::uint64_t uniform_below(Engine& eng, std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return x % bound;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& eng) {
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(Engine& eng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(eng);
}

// Standard normal via Box-Muller; consumes two engine outputs per call.
inline double normal(Engine& eng) {
    double u1 = uniform01(eng);
    const double u2 = uniform01(eng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(std::span<T> items, Engine& eng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(eng, i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace ctvote::rng
