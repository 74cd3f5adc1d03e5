#include "pcdiff/sha1.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "pcdiff/check.hpp"

namespace pcdiff {

namespace {

struct Sha1Ctx {
  uint32_t h[5] = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u,
                   0xC3D2E1F0u};
  uint64_t total = 0;
  uint8_t buf[64];
  size_t buf_len = 0;

  static uint32_t rol(uint32_t v, int s) { return (v << s) | (v >> (32 - s)); }

  void process(const uint8_t* p) {
    uint32_t w[80];
    for (int i = 0; i < 16; ++i)
      w[i] = (uint32_t(p[4 * i]) << 24) | (uint32_t(p[4 * i + 1]) << 16) |
             (uint32_t(p[4 * i + 2]) << 8) | uint32_t(p[4 * i + 3]);
    for (int i = 16; i < 80; ++i)
      w[i] = rol(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    uint32_t a = h[0], b = h[1], c = h[2], d = h[3], e = h[4];
    for (int i = 0; i < 80; ++i) {
      uint32_t f, k;
      if (i < 20) {
        f = (b & c) | (~b & d);
        k = 0x5A827999u;
      } else if (i < 40) {
        f = b ^ c ^ d;
        k = 0x6ED9EBA1u;
      } else if (i < 60) {
        f = (b & c) | (b & d) | (c & d);
        k = 0x8F1BBCDCu;
      } else {
        f = b ^ c ^ d;
        k = 0xCA62C1D6u;
      }
      const uint32_t tmp = rol(a, 5) + f + e + k + w[i];
      e = d;
      d = c;
      c = rol(b, 30);
      b = a;
      a = tmp;
    }
    h[0] += a;
    h[1] += b;
    h[2] += c;
    h[3] += d;
    h[4] += e;
  }

  void update(const uint8_t* p, size_t len) {
    total += len;
    while (len > 0) {
      const size_t take = std::min(len, size_t(64) - buf_len);
      std::memcpy(buf + buf_len, p, take);
      buf_len += take;
      p += take;
      len -= take;
      if (buf_len == 64) {
        process(buf);
        buf_len = 0;
      }
    }
  }

  std::string finish() {
    const uint64_t bits = total * 8;
    const uint8_t pad = 0x80;
    update(&pad, 1);
    const uint8_t zero = 0;
    while (buf_len != 56) update(&zero, 1);
    uint8_t len_be[8];
    for (int i = 0; i < 8; ++i) len_be[i] = uint8_t(bits >> (56 - 8 * i));
    update(len_be, 8);
    static const char* hexd = "0123456789abcdef";
    std::string out;
    out.reserve(40);
    for (uint32_t word : h)
      for (int i = 3; i >= 0; --i) {
        const uint8_t byte = uint8_t(word >> (8 * i));
        out.push_back(hexd[byte >> 4]);
        out.push_back(hexd[byte & 0xF]);
      }
    return out;
  }
};

}  // namespace

std::string sha1_hex(const void* data, size_t len) {
  Sha1Ctx ctx;
  ctx.update(static_cast<const uint8_t*>(data), len);
  return ctx.finish();
}

std::string git_blob_hash(const std::vector<uint8_t>& bytes) {
  Sha1Ctx ctx;
  const std::string header = "blob " + std::to_string(bytes.size());
  ctx.update(reinterpret_cast<const uint8_t*>(header.data()), header.size() + 1);
  if (!bytes.empty()) ctx.update(bytes.data(), bytes.size());
  return ctx.finish();
}

std::string git_blob_hash_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  PCD_CHECK(f.good(), "git_blob_hash_file: cannot open ", path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return git_blob_hash(bytes);
}

}  // namespace pcdiff
