#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace starsent {

// FNV-1a, 64 bit. Stable across platforms and process runs; not cryptographic.
inline uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ull) {
    uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Stage-local seed derived from the pipeline seed and a stage name, so that
// stages do not share random streams.
inline uint64_t derive_seed(uint64_t seed, std::string_view stage) {
    return splitmix64(seed ^ fnv1a64(stage));
}

inline std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace starsent
