#pragma once

#include <cstdint>
#include <string_view>

namespace kgqa {

// 64-bit FNV-1a, used for vocabulary fingerprints stored in checkpoints.
class Fnv1a64 {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }

  // Appends a record separator so that ["ab","c"] and ["a","bc"] differ.
  void update_record(std::string_view bytes) {
    update(bytes);
    update(std::string_view("\x1f", 1));
  }

  uint64_t digest() const { return state_; }

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace kgqa
