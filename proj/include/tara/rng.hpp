#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tara {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hierarchical seed derivation: derive_seed(master, {individual, day, visit}).
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = mix64(parent);
    for (auto p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

inline Rng make_rng(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(parent, path));
}

}  // namespace tara
