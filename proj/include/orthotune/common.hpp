#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace orthotune {

/// Thrown on contract violations (bad shapes, out-of-range indices,
/// invalid configuration values).
class contract_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw contract_error(msg);
}

// FNV-1a, used for stable content hashes in reports and checkpoints.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string fnv1a_hex(const std::string& s) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a(s);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace detail
}  // namespace orthotune
