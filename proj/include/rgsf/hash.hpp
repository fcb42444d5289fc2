#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "rgsf/errors.hpp"

namespace rgsf {

/// 64-bit FNV-1a, used for content hashes in reports and cache keys.
class Fnv1a {
public:
  Fnv1a& update(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001B3ULL;
    }
    return *this;
  }
  Fnv1a& update(std::string_view s) { return update(s.data(), s.size()); }

  std::uint64_t value() const { return state_; }
  std::string hex() const { return to_hex(state_); }

  static std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::string hash_hex(std::string_view s) { return Fnv1a{}.update(s).hex(); }

inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for hashing");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hash_hex(bytes);
}

}  // namespace rgsf
