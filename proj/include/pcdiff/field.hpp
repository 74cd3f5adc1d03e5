#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pcdiff/pointcloud.hpp"

namespace pcdiff {

// Regular grid of mean distance to the k nearest cloud points. Sampled on
// grid *vertices*: extents count points per axis.
struct ScalarField {
  int64_t gx = 0, gy = 0, gz = 0;
  double bmin[3] = {0, 0, 0};
  double bmax[3] = {0, 0, 0};
  std::vector<double> values;  // x-fastest, then y, then z

  int64_t index(int64_t ix, int64_t iy, int64_t iz) const {
    return ix + gx * (iy + gy * iz);
  }
  double at(int64_t ix, int64_t iy, int64_t iz) const {
    return values[size_t(index(ix, iy, iz))];
  }
  std::array<double, 3> position(int64_t ix, int64_t iy, int64_t iz) const;
};

// Exact k-NN mean distance at every grid vertex; the grid covers the
// cloud's bounding box expanded by `margin` of its extent per side.
ScalarField mean_distance_field(const PointCloud& cloud, int64_t grid_res,
                                int64_t k, double margin = 0.1,
                                int threads = 0);

// Median nearest-neighbor spacing of the cloud; 1.5x this is the default
// marching-cubes threshold.
double median_nn_spacing(const PointCloud& cloud);

// Raw dump: a small text header (extents + bbox) followed by float64 grid
// values in index order.
void save_field(const ScalarField& field, const std::string& path);
ScalarField load_field(const std::string& path);

}  // namespace pcdiff
