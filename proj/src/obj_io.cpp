#include "pcdiff/obj_io.hpp"

#include <fstream>
#include <sstream>

namespace pcdiff {

void save_obj(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream f(path);
  PCD_CHECK(f.good(), "save_obj: cannot write ", path);
  f.precision(17);
  for (const auto& v : mesh.vertices)
    f << "v " << v[0] << " " << v[1] << " " << v[2] << "\n";
  for (const auto& t : mesh.triangles)
    f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
  PCD_CHECK(f.good(), "save_obj: write failure on ", path);
}

TriangleMesh load_obj(const std::string& path) {
  std::ifstream f(path);
  PCD_CHECK(f.good(), "load_obj: cannot open ", path);
  TriangleMesh mesh;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string tag;
    is >> tag;
    if (tag == "v") {
      std::array<double, 3> v{};
      is >> v[0] >> v[1] >> v[2];
      PCD_CHECK(!is.fail(), "load_obj: malformed vertex line: ", line);
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::array<int64_t, 3> t{};
      is >> t[0] >> t[1] >> t[2];
      PCD_CHECK(!is.fail(), "load_obj: malformed face line: ", line);
      for (auto& idx : t) {
        PCD_CHECK(idx >= 1 && idx <= int64_t(mesh.vertices.size()),
                  "load_obj: face index ", idx, " out of range");
        idx -= 1;
      }
      mesh.triangles.push_back(t);
    }
  }
  return mesh;
}

}  // namespace pcdiff
