#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace prism {

// Deterministic RNG stream derivation. Every site that needs randomness owns
// a stream keyed by (seed, problem id, iteration, particle index, tag), so
// results never depend on scheduling order and a resumed run replays the
// exact draws of an uninterrupted one.

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view problem_id,
                                 int iteration, int particle_index, std::string_view tag) {
    std::uint64_t h = mix(seed, fnv1a(problem_id));
    h = mix(h, static_cast<std::uint64_t>(iteration) + 0x1000);
    h = mix(h, static_cast<std::uint64_t>(particle_index) + 0x2000);
    h = mix(h, fnv1a(tag));
    return h;
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::string_view problem_id,
                                   int iteration, int particle_index, std::string_view tag) {
    return std::mt19937_64(stream_seed(seed, problem_id, iteration, particle_index, tag));
}

inline double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace prism
