#pragma once

#include <cstdint>
#include <vector>

#include "pcdiff/check.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

// n x 6 point cloud, row-major: x y z r g b. RGB lives in [0, 1].
struct PointCloud {
  std::vector<double> pts;

  PointCloud() = default;
  explicit PointCloud(int64_t n) : pts(size_t(n) * 6, 0.0) {}

  int64_t size() const { return int64_t(pts.size() / 6); }

  double* point(int64_t i) { return pts.data() + i * 6; }
  const double* point(int64_t i) const { return pts.data() + i * 6; }

  double& at(int64_t i, int64_t c) { return pts[size_t(i * 6 + c)]; }
  double at(int64_t i, int64_t c) const { return pts[size_t(i * 6 + c)]; }

  Tensor to_tensor() const { return Tensor::from(pts, size(), 6); }

  static PointCloud from_tensor(const Tensor& t, bool clamp_rgb = false) {
    PCD_CHECK(t.cols() == 6, "PointCloud: tensor must be nx6, got ", t.rows(),
              "x", t.cols());
    PointCloud c;
    c.pts = t.data();
    if (clamp_rgb) c.clamp_rgb();
    return c;
  }

  void clamp_rgb() {
    const int64_t n = size();
    for (int64_t i = 0; i < n; ++i)
      for (int64_t k = 3; k < 6; ++k) {
        double& v = pts[size_t(i * 6 + k)];
        if (v < 0.0) v = 0.0;
        if (v > 1.0) v = 1.0;
      }
  }

  PointCloud permuted(const std::vector<int64_t>& perm) const {
    PCD_CHECK(int64_t(perm.size()) == size(), "permuted: size mismatch");
    PointCloud out(size());
    for (int64_t i = 0; i < size(); ++i)
      for (int64_t c = 0; c < 6; ++c) out.at(i, c) = at(perm[size_t(i)], c);
    return out;
  }
};

// Concatenates clouds in order.
inline PointCloud concat(const std::vector<PointCloud>& clouds) {
  PointCloud out;
  for (const auto& c : clouds) out.pts.insert(out.pts.end(), c.pts.begin(), c.pts.end());
  return out;
}

}  // namespace pcdiff
