#include "pcdiff/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pcdiff {

namespace {
inline double dist_sq(const double* a, const double* b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}
}  // namespace

KdTree::KdTree(const PointCloud& cloud) {
  const int64_t n = cloud.size();
  PCD_CHECK(n >= 1, "KdTree: empty cloud");
  xyz_.resize(size_t(n) * 3);
  index_.resize(size_t(n));
  for (int64_t i = 0; i < n; ++i) {
    xyz_[size_t(i) * 3 + 0] = cloud.at(i, 0);
    xyz_[size_t(i) * 3 + 1] = cloud.at(i, 1);
    xyz_[size_t(i) * 3 + 2] = cloud.at(i, 2);
    index_[size_t(i)] = i;
  }
  nodes_.reserve(size_t(2 * n / kLeafSize + 8));
  root_ = build(0, int32_t(n));
}

int32_t KdTree::build(int32_t begin, int32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  if (end - begin <= kLeafSize) {
    nodes_.push_back(node);
    return int32_t(nodes_.size() - 1);
  }
  // Split on the widest axis at the median.
  double lo[3] = {std::numeric_limits<double>::max(),
                  std::numeric_limits<double>::max(),
                  std::numeric_limits<double>::max()};
  double hi[3] = {-std::numeric_limits<double>::max(),
                  -std::numeric_limits<double>::max(),
                  -std::numeric_limits<double>::max()};
  for (int32_t i = begin; i < end; ++i) {
    const double* p = xyz_.data() + index_[size_t(i)] * 3;
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  int axis = 0;
  for (int a = 1; a < 3; ++a)
    if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
  if (hi[axis] - lo[axis] == 0.0) {  // all points coincide
    nodes_.push_back(node);
    return int32_t(nodes_.size() - 1);
  }
  const int32_t mid = begin + (end - begin) / 2;
  std::nth_element(index_.begin() + begin, index_.begin() + mid,
                   index_.begin() + end, [&](int64_t a, int64_t b) {
                     return xyz_[size_t(a) * 3 + axis] < xyz_[size_t(b) * 3 + axis];
                   });
  node.axis = axis;
  node.split = xyz_[size_t(index_[size_t(mid)]) * 3 + axis];
  const int32_t self = int32_t(nodes_.size());
  nodes_.push_back(node);
  const int32_t left = build(begin, mid);
  const int32_t right = build(mid, end);
  nodes_[size_t(self)].left = left;
  nodes_[size_t(self)].right = right;
  return self;
}

void KdTree::search(int32_t ni, const double* q, Hit& best) const {
  const Node& node = nodes_[size_t(ni)];
  if (node.axis < 0) {
    for (int32_t i = node.begin; i < node.end; ++i) {
      const int64_t idx = index_[size_t(i)];
      const double d = dist_sq(q, xyz_.data() + idx * 3);
      if (d < best.dist_sq) best = {idx, d};
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int32_t near = delta < 0.0 ? node.left : node.right;
  const int32_t far = delta < 0.0 ? node.right : node.left;
  search(near, q, best);
  if (delta * delta < best.dist_sq) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const double* xyz) const {
  Hit best{-1, std::numeric_limits<double>::max()};
  search(root_, xyz, best);
  return best;
}

void KdTree::search_k(int32_t ni, const double* q, int64_t k,
                      std::vector<Hit>& heap) const {
  const Node& node = nodes_[size_t(ni)];
  auto cmp = [](const Hit& a, const Hit& b) { return a.dist_sq < b.dist_sq; };
  if (node.axis < 0) {
    for (int32_t i = node.begin; i < node.end; ++i) {
      const int64_t idx = index_[size_t(i)];
      const double d = dist_sq(q, xyz_.data() + idx * 3);
      if (int64_t(heap.size()) < k) {
        heap.push_back({idx, d});
        std::push_heap(heap.begin(), heap.end(), cmp);
      } else if (d < heap.front().dist_sq) {
        std::pop_heap(heap.begin(), heap.end(), cmp);
        heap.back() = {idx, d};
        std::push_heap(heap.begin(), heap.end(), cmp);
      }
    }
    return;
  }
  const double delta = q[node.axis] - node.split;
  const int32_t near = delta < 0.0 ? node.left : node.right;
  const int32_t far = delta < 0.0 ? node.right : node.left;
  search_k(near, q, k, heap);
  if (int64_t(heap.size()) < k || delta * delta < heap.front().dist_sq)
    search_k(far, q, k, heap);
}

void KdTree::knearest(const double* xyz, int64_t k, std::vector<Hit>& out) const {
  PCD_CHECK(k >= 1 && k <= size(), "knearest: k=", k, " out of range for ",
            size(), " points");
  out.clear();
  out.reserve(size_t(k));
  search_k(root_, xyz, k, out);
  std::sort(out.begin(), out.end(),
            [](const Hit& a, const Hit& b) { return a.dist_sq < b.dist_sq; });
}

}  // namespace pcdiff
