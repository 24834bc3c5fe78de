#pragma once

#include <cstdint>
#include <string_view>

namespace nvsm {

// 64-bit FNV-1a. Used for vocabulary fingerprints and artifact content
// hashes in run manifests.
inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

}  // namespace nvsm
