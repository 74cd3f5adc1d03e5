#pragma once

#include <string>

#include "pcdiff/marching_cubes.hpp"

namespace pcdiff {

// Wavefront OBJ with `v` and 1-indexed `f` records.
void save_obj(const TriangleMesh& mesh, const std::string& path);
TriangleMesh load_obj(const std::string& path);

}  // namespace pcdiff
