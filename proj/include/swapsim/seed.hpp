// Deterministic seed splitting: every stochastic component draws from its own
// stream, derived from (root seed, component name, index), so serial and
// parallel runs produce identical results.
#pragma once

#include <cstdint>
#include <string_view>

namespace swapsim {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

/// splitmix64(splitmix64(root ^ fnv1a(component)) ^ splitmix64(index)).
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view component, std::uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ fnv1a64(component)) ^ splitmix64(index));
}

}  // namespace swapsim
