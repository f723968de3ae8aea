#pragma once
// Shared substrate: error types, token normalization, deterministic RNG,
// and hashing helpers used across every module.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace seren {

// ---------------------------------------------------------------------------
// Errors

class SerenError : public std::runtime_error {
 public:
  explicit SerenError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input record; carries file path and 1-based line number.
class ParseError : public SerenError {
 public:
  ParseError(const std::string& path, size_t line, const std::string& what)
      : SerenError(path + ":" + std::to_string(line) + ": " + what),
        path_(path),
        line_(line) {}
  const std::string& path() const { return path_; }
  size_t line() const { return line_; }

 private:
  std::string path_;
  size_t line_;
};

// Semantic violation (referential integrity, contract precondition, ...).
class ValidationError : public SerenError {
 public:
  using SerenError::SerenError;
};

// ---------------------------------------------------------------------------
// Token normalization
//
// Lowercase, split on whitespace and punctuation. ASCII alphanumerics and any
// byte >= 0x80 (multi-byte UTF-8 sequences) count as token characters.

inline bool token_char(unsigned char c) {
  return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
         (c >= 'A' && c <= 'Z') || c >= 0x80;
}

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (token_char(c)) {
      if (c >= 'A' && c <= 'Z') c = static_cast<unsigned char>(c - 'A' + 'a');
      cur.push_back(static_cast<char>(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hashing

inline uint64_t fnv1a64(std::string_view s, uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t hash_mix(uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// SHA-256 hex digest (OpenSSL-backed); used for artifact manifests.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::string& path);

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// mt19937_64 with hand-rolled mappings. std::*_distribution is
// implementation-defined, so all draws go through the explicit helpers below;
// output is bit-stable for a given seed.

class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 bits of entropy.
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(gen_()) * n) >> 64);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Substream derivation: fold arbitrary labels into a child seed.
  template <typename... Parts>
  static uint64_t derive(uint64_t seed, const Parts&... parts) {
    uint64_t h = hash_mix(seed);
    (fold(h, parts), ...);
    return hash_mix(h);
  }

 private:
  template <typename I>
    requires std::is_integral_v<I>
  static void fold(uint64_t& h, I v) {
    h = hash_mix(h ^ static_cast<uint64_t>(v));
  }
  static void fold(uint64_t& h, std::string_view s) { h = hash_mix(h ^ fnv1a64(s)); }
  static void fold(uint64_t& h, const std::string& s) { fold(h, std::string_view(s)); }
  static void fold(uint64_t& h, const char* s) { fold(h, std::string_view(s)); }

  std::mt19937_64 gen_;
};

}  // namespace seren
