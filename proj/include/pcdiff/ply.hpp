#pragma once

#include <string>

#include "pcdiff/pointcloud.hpp"

namespace pcdiff {

// Binary little-endian PLY: float x/y/z, uchar red/green/blue. XYZ
// round-trips at float32 precision, RGB at 1/255.
void save_ply(const PointCloud& cloud, const std::string& path);
PointCloud load_ply(const std::string& path);

}  // namespace pcdiff
