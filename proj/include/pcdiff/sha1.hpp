#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pcdiff {

// SHA-1 digest as lowercase hex.
std::string sha1_hex(const void* data, size_t len);
inline std::string sha1_hex(const std::string& s) {
  return sha1_hex(s.data(), s.size());
}

// Git blob-style content hash: sha1("blob <len>\0" + bytes).
std::string git_blob_hash(const std::vector<uint8_t>& bytes);
std::string git_blob_hash_file(const std::string& path);

}  // namespace pcdiff
