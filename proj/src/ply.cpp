#include "pcdiff/ply.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace pcdiff {

namespace {
const char* kProps[6] = {"x", "y", "z", "red", "green", "blue"};
}

void save_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  PCD_CHECK(f.good(), "save_ply: cannot write ", path);
  const int64_t n = cloud.size();
  std::ostringstream head;
  head << "ply\nformat binary_little_endian 1.0\nelement vertex " << n << "\n"
       << "property float x\nproperty float y\nproperty float z\n"
       << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
       << "end_header\n";
  const std::string h = head.str();
  f.write(h.data(), std::streamsize(h.size()));
  std::vector<char> rec(15);
  for (int64_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const float v = float(cloud.at(i, c));
      std::memcpy(rec.data() + 4 * c, &v, 4);
    }
    for (int c = 0; c < 3; ++c) {
      const double col = cloud.at(i, 3 + c);
      const double clamped = col < 0.0 ? 0.0 : (col > 1.0 ? 1.0 : col);
      rec[size_t(12 + c)] = char(uint8_t(std::lround(clamped * 255.0)));
    }
    f.write(rec.data(), 15);
  }
  PCD_CHECK(f.good(), "save_ply: write failure on ", path);
}

PointCloud load_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  PCD_CHECK(f.good(), "load_ply: cannot open ", path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                          std::istreambuf_iterator<char>());

  // Header: ascii lines up to and including "end_header\n".
  size_t pos = 0;
  auto next_line = [&]() -> std::string {
    PCD_CHECK(pos < bytes.size(), "load_ply: truncated header at byte ", pos);
    const size_t start = pos;
    while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    PCD_CHECK(pos < bytes.size(), "load_ply: unterminated header line at byte ",
              start);
    std::string line(bytes.data() + start, pos - start);
    ++pos;
    return line;
  };

  PCD_CHECK(next_line() == "ply", "load_ply: missing 'ply' magic at byte 0 in ",
            path);
  PCD_CHECK(next_line() == "format binary_little_endian 1.0",
            "load_ply: unsupported format (expected binary_little_endian 1.0)");

  int64_t n = -1;
  int prop_index = 0;
  for (;;) {
    const size_t line_at = pos;
    const std::string line = next_line();
    if (line == "end_header") break;
    std::istringstream is(line);
    std::string tok;
    is >> tok;
    if (tok == "comment") continue;
    if (tok == "element") {
      std::string what;
      is >> what >> n;
      PCD_CHECK(what == "vertex" && n >= 0,
                "load_ply: unsupported element '", what, "' at byte ", line_at);
      continue;
    }
    if (tok == "property") {
      std::string type, name;
      is >> type >> name;
      PCD_CHECK(prop_index < 6, "load_ply: too many properties at byte ",
                line_at);
      const bool want_float = prop_index < 3;
      PCD_CHECK(type == (want_float ? "float" : "uchar") &&
                    name == kProps[prop_index],
                "load_ply: expected 'property ",
                (want_float ? "float " : "uchar "), kProps[prop_index],
                "', got '", line, "' at byte ", line_at);
      ++prop_index;
      continue;
    }
    PCD_CHECK(false, "load_ply: unexpected header token '", tok, "' at byte ",
              line_at);
  }
  PCD_CHECK(n >= 0, "load_ply: missing 'element vertex' declaration");
  PCD_CHECK(prop_index == 6, "load_ply: expected 6 properties, found ",
            prop_index);

  const size_t need = size_t(n) * 15;
  PCD_CHECK(bytes.size() - pos >= need, "load_ply: truncated payload at byte ",
            bytes.size(), " (need ", pos + need, " bytes)");

  PointCloud cloud(n);
  for (int64_t i = 0; i < n; ++i) {
    const char* rec = bytes.data() + pos + size_t(i) * 15;
    for (int c = 0; c < 3; ++c) {
      float v;
      std::memcpy(&v, rec + 4 * c, 4);
      cloud.at(i, c) = double(v);
    }
    for (int c = 0; c < 3; ++c)
      cloud.at(i, 3 + c) = double(uint8_t(rec[12 + c])) / 255.0;
  }
  return cloud;
}

}  // namespace pcdiff
