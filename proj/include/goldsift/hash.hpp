#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace goldsift {

// FNV-1a, 64-bit. Used for content fingerprints and store line checksums.
// Byte-oriented, so results are identical across platforms and processes.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::string_view data, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : data) {
        state ^= static_cast<std::uint64_t>(c);
        state *= kFnvPrime;
    }
    return state;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t value, std::uint64_t state = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        state ^= (value >> (8 * i)) & 0xffULL;
        state *= kFnvPrime;
    }
    return state;
}

inline std::string to_hex(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

// Fingerprint of arbitrary text, as a fixed-width hex string.
inline std::string fingerprint(std::string_view text) {
    return to_hex(fnv1a64(text));
}

}  // namespace goldsift
