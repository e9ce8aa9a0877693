#pragma once
// SHA-256 (via OpenSSL) for encoder fingerprints and cache binding digests,
// plus a small stable string hash for tokenization and per-sample seeding.

#include <openssl/evp.h>

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>

#include "pfdet/errors.hpp"

namespace pfdet {

using Digest32 = std::array<unsigned char, 32>;

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      fail(ErrorKind::Io, "failed to initialize SHA-256 context");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t size) {
    if (EVP_DigestUpdate(ctx_, data, size) != 1)
      fail(ErrorKind::Io, "SHA-256 update failed");
  }
  void update(std::string_view text) { update(text.data(), text.size()); }
  void update_u64(std::uint64_t v) { update(&v, sizeof(v)); }
  void update_doubles(std::span<const double> values) {
    if (!values.empty()) update(values.data(), values.size() * sizeof(double));
  }

  Digest32 finish() {
    Digest32 out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, out.data(), &len) != 1 || len != out.size())
      fail(ErrorKind::Io, "SHA-256 finalize failed");
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string to_hex(std::span<const unsigned char> bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (unsigned char b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

inline Digest32 sha256_of(std::string_view text) {
  Sha256 h;
  h.update(text);
  return h.finish();
}

// FNV-1a, 64-bit. Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace pfdet
