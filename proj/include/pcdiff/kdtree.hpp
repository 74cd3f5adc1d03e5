#pragma once

#include <cstdint>
#include <vector>

#include "pcdiff/pointcloud.hpp"

namespace pcdiff {

// Exact nearest-neighbor search over the XYZ channels of a point cloud.
// Median-split kd-tree; queries prune with the current best radius, so
// results are exact (approximate NN would mask small metric trends).
class KdTree {
 public:
  explicit KdTree(const PointCloud& cloud);

  int64_t size() const { return int64_t(index_.size()); }

  // Index into the source cloud and squared distance of the nearest point.
  struct Hit {
    int64_t index;
    double dist_sq;
  };
  Hit nearest(const double* xyz) const;

  // k nearest (k <= size), ascending by distance.
  void knearest(const double* xyz, int64_t k, std::vector<Hit>& out) const;

 private:
  struct Node {
    double split = 0.0;
    int32_t axis = -1;   // -1 marks a leaf
    int32_t left = -1;
    int32_t right = -1;
    int32_t begin = 0;
    int32_t end = 0;
  };

  int32_t build(int32_t begin, int32_t end);
  void search(int32_t node, const double* xyz, Hit& best) const;
  void search_k(int32_t node, const double* xyz, int64_t k,
                std::vector<Hit>& heap) const;

  std::vector<double> xyz_;     // packed n x 3
  std::vector<int64_t> index_;  // permutation into the source cloud
  std::vector<Node> nodes_;
  int32_t root_ = -1;

  static constexpr int32_t kLeafSize = 16;
};

}  // namespace pcdiff
