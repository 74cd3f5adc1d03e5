#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pcdiff/field.hpp"

namespace pcdiff {

struct TriangleMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<int64_t, 3>> triangles;
};

// Isosurface of {field = threshold} with linear interpolation along grid
// edges. 256-case marching cubes; faces with the diagonal sign ambiguity
// are resolved with the bilinear asymptotic decider, which keeps adjacent
// cubes consistent (watertight output). Triangles are wound so the normal
// points toward decreasing field values.
TriangleMesh marching_cubes(const ScalarField& field, double threshold);

// Every boundary-counted edge is shared by exactly two triangles.
bool watertight(const TriangleMesh& mesh);

}  // namespace pcdiff
