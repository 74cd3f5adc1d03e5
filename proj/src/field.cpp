#include "pcdiff/field.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pcdiff/kdtree.hpp"
#include "pcdiff/threading.hpp"

namespace pcdiff {

std::array<double, 3> ScalarField::position(int64_t ix, int64_t iy,
                                            int64_t iz) const {
  auto lerp = [](double lo, double hi, int64_t i, int64_t g) {
    return g <= 1 ? lo : lo + (hi - lo) * double(i) / double(g - 1);
  };
  return {lerp(bmin[0], bmax[0], ix, gx), lerp(bmin[1], bmax[1], iy, gy),
          lerp(bmin[2], bmax[2], iz, gz)};
}

ScalarField mean_distance_field(const PointCloud& cloud, int64_t grid_res,
                                int64_t k, double margin, int threads) {
  const int64_t n = cloud.size();
  PCD_CHECK(n >= 1, "mean_distance_field: empty cloud");
  PCD_CHECK(grid_res >= 2, "mean_distance_field: grid_res must be >= 2");
  PCD_CHECK(k >= 1 && k <= n, "mean_distance_field: k=", k,
            " exceeds cloud size ", n);

  ScalarField field;
  field.gx = field.gy = field.gz = grid_res;
  for (int c = 0; c < 3; ++c) {
    double lo = cloud.at(0, c), hi = cloud.at(0, c);
    for (int64_t i = 1; i < n; ++i) {
      lo = std::min(lo, cloud.at(i, c));
      hi = std::max(hi, cloud.at(i, c));
    }
    double ext = hi - lo;
    if (ext <= 0.0) ext = 1.0;
    field.bmin[c] = lo - margin * ext;
    field.bmax[c] = hi + margin * ext;
  }
  field.values.assign(size_t(grid_res * grid_res * grid_res), 0.0);

  const KdTree tree(cloud);
  parallel_for(
      grid_res,
      [&](int64_t iz) {
        std::vector<KdTree::Hit> hits;
        for (int64_t iy = 0; iy < grid_res; ++iy)
          for (int64_t ix = 0; ix < grid_res; ++ix) {
            const auto pos = field.position(ix, iy, iz);
            tree.knearest(pos.data(), k, hits);
            double acc = 0.0;
            for (const auto& h : hits) acc += std::sqrt(h.dist_sq);
            field.values[size_t(field.index(ix, iy, iz))] = acc / double(k);
          }
      },
      threads);
  return field;
}

double median_nn_spacing(const PointCloud& cloud) {
  const int64_t n = cloud.size();
  PCD_CHECK(n >= 2, "median_nn_spacing: needs at least 2 points");
  const KdTree tree(cloud);
  std::vector<double> d(size_t(n), 0.0);
  std::vector<KdTree::Hit> hits;
  for (int64_t i = 0; i < n; ++i) {
    tree.knearest(cloud.point(i), 2, hits);  // hits[0] is the point itself
    d[size_t(i)] = std::sqrt(hits[1].dist_sq);
  }
  std::nth_element(d.begin(), d.begin() + n / 2, d.end());
  return d[size_t(n / 2)];
}

void save_field(const ScalarField& field, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  PCD_CHECK(f.good(), "save_field: cannot write ", path);
  f << "pcdiff-field v1 " << field.gx << " " << field.gy << " " << field.gz;
  f.precision(17);
  for (int c = 0; c < 3; ++c) f << " " << field.bmin[c];
  for (int c = 0; c < 3; ++c) f << " " << field.bmax[c];
  f << "\n";
  f.write(reinterpret_cast<const char*>(field.values.data()),
          std::streamsize(field.values.size() * sizeof(double)));
  PCD_CHECK(f.good(), "save_field: write failure on ", path);
}

ScalarField load_field(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  PCD_CHECK(f.good(), "load_field: cannot open ", path);
  std::string tag, ver;
  ScalarField field;
  f >> tag >> ver >> field.gx >> field.gy >> field.gz;
  PCD_CHECK(tag == "pcdiff-field" && ver == "v1",
            "load_field: bad header in ", path);
  for (int c = 0; c < 3; ++c) f >> field.bmin[c];
  for (int c = 0; c < 3; ++c) f >> field.bmax[c];
  f.get();  // newline
  field.values.resize(size_t(field.gx * field.gy * field.gz));
  f.read(reinterpret_cast<char*>(field.values.data()),
         std::streamsize(field.values.size() * sizeof(double)));
  PCD_CHECK(f.good(), "load_field: truncated payload in ", path);
  return field;
}

}  // namespace pcdiff
