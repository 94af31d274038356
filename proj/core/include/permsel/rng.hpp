#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace permsel {

using Rng = std::mt19937_64;

/// One step of the splitmix64 mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based stream derivation: the seed of a stream depends only on the
/// master seed, a stream label and integer coordinates, never on how many
/// other streams were drawn before it.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view label,
                                 std::initializer_list<std::uint64_t> coords = {}) {
    std::uint64_t h = splitmix64(master ^ splitmix64(fnv1a(label)));
    for (std::uint64_t c : coords) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
    return h;
}

inline Rng make_rng(std::uint64_t master, std::string_view label,
                    std::initializer_list<std::uint64_t> coords = {}) {
    return Rng(derive_seed(master, label, coords));
}

}  // namespace permsel
