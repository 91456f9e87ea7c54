#ifndef BCFP_HASH_H_
#define BCFP_HASH_H_

#include <cstdint>
#include <string_view>

namespace bcfp {

inline constexpr uint64_t kFnv64Offset = 0xcbf29ce484222325ULL;
inline constexpr uint64_t kFnv64Prime = 0x100000001b3ULL;

// FNV-1a 64-bit. Pass a previous result as |state| to hash incrementally.
constexpr uint64_t Fnv1a64(std::string_view bytes,
                           uint64_t state = kFnv64Offset) {
  for (char c : bytes) {
    state ^= static_cast<uint8_t>(c);
    state *= kFnv64Prime;
  }
  return state;
}

// FNV-1a 32-bit, used for subword bucket hashing.
constexpr uint32_t Fnv1a32(std::string_view bytes) {
  uint32_t h = 2166136261u;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 16777619u;
  }
  return h;
}

}  // namespace bcfp

#endif  // BCFP_HASH_H_
