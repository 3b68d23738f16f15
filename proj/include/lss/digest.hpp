#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lss {

/// 64-bit FNV-1a, the kernel's deterministic digest for view sequences and
/// replay comparisons.
class Fnv64 {
 public:
  Fnv64& mix(std::string_view s) {
    for (unsigned char c : s) {
      h_ ^= c;
      h_ *= 1099511628211ull;
    }
    h_ ^= 0xff;
    h_ *= 1099511628211ull;
    return *this;
  }

  std::uint64_t value() const { return h_; }

  std::string hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    std::uint64_t v = h_;
    for (int i = 15; i >= 0; --i) {
      out[i] = digits[v & 0xf];
      v >>= 4;
    }
    return out;
  }

 private:
  std::uint64_t h_ = 14695981039346656037ull;
};

inline std::uint64_t fnv64(std::string_view s) { return Fnv64().mix(s).value(); }

}  // namespace lss
