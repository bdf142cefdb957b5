#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace cwmi {

/// Incremental FNV-1a 64-bit hash. Used for dataset and checkpoint
/// content hashes; stable across platforms by construction.
class Fnv1a64 {
 public:
  void update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ull;
    }
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  Fnv1a64 h;
  h.update(data, len);
  return h.digest();
}

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

}  // namespace cwmi
