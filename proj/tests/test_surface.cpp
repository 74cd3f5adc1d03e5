#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <functional>
#include <map>

#include "doctest.h"
#include "pcdiff/field.hpp"
#include "pcdiff/kdtree.hpp"
#include "pcdiff/marching_cubes.hpp"
#include "pcdiff/obj_io.hpp"
#include "pcdiff/shapes.hpp"

using namespace pcdiff;

namespace {

PointCloud unit_sphere(int64_t n, uint64_t seed) {
  ShapeSpec s;
  s.family = ShapeFamily::kSphere;
  s.p[0] = 1.0;
  Rng rng(seed);
  return sample_shape(s, n, rng);
}

ScalarField analytic_field(int64_t res, double extent,
                           const std::function<double(double, double, double)>& f) {
  ScalarField field;
  field.gx = field.gy = field.gz = res;
  for (int c = 0; c < 3; ++c) {
    field.bmin[c] = -extent;
    field.bmax[c] = extent;
  }
  field.values.resize(size_t(res * res * res));
  for (int64_t iz = 0; iz < res; ++iz)
    for (int64_t iy = 0; iy < res; ++iy)
      for (int64_t ix = 0; ix < res; ++ix) {
        const auto p = field.position(ix, iy, iz);
        field.values[size_t(field.index(ix, iy, iz))] = f(p[0], p[1], p[2]);
      }
  return field;
}

}  // namespace

TEST_CASE("mean distance field basics") {
  // single-point cloud, k=1: field value equals the distance to the point
  PointCloud one(1);
  one.at(0, 0) = 0.25;
  const ScalarField field = mean_distance_field(one, 5, 1, 0.5);
  for (int64_t iz = 0; iz < 5; ++iz)
    for (int64_t iy = 0; iy < 5; ++iy)
      for (int64_t ix = 0; ix < 5; ++ix) {
        const auto p = field.position(ix, iy, iz);
        const double expect = std::sqrt((p[0] - 0.25) * (p[0] - 0.25) +
                                        p[1] * p[1] + p[2] * p[2]);
        CHECK(field.at(ix, iy, iz) == doctest::Approx(expect).epsilon(1e-12));
      }

  // grid vertex coincident with a cloud point has value 0 (margin 0 puts
  // the cloud's bbox corners on the grid)
  PointCloud corners(2);
  corners.at(0, 0) = corners.at(0, 1) = corners.at(0, 2) = -1.0;
  corners.at(1, 0) = corners.at(1, 1) = corners.at(1, 2) = 1.0;
  const ScalarField f2 = mean_distance_field(corners, 3, 1, 0.0);
  CHECK(f2.at(0, 0, 0) == 0.0);
  CHECK(f2.at(2, 2, 2) == 0.0);

  CHECK_THROWS_AS(mean_distance_field(one, 4, 2, 0.1), Error);
}

TEST_CASE("field at the center of a dense sphere is the radius") {
  const PointCloud cloud = unit_sphere(16384, 3);
  const ScalarField field = mean_distance_field(cloud, 9, 8, 0.1);
  // center of the grid is the origin
  const double center = field.at(4, 4, 4);
  CHECK(std::abs(center - 1.0) < 0.02);
}

TEST_CASE("k=1 field is 1-Lipschitz in the probe position") {
  Rng rng(5);
  PointCloud cloud(40);
  for (auto& v : cloud.pts) v = rng.normal();
  const ScalarField field = mean_distance_field(cloud, 7, 1, 0.2);
  for (int trial = 0; trial < 200; ++trial) {
    const int64_t a = int64_t(rng.below(7)), b = int64_t(rng.below(7)),
                  c = int64_t(rng.below(7));
    const int64_t d = int64_t(rng.below(7)), e = int64_t(rng.below(7)),
                  f = int64_t(rng.below(7));
    const auto pa = field.position(a, b, c);
    const auto pb = field.position(d, e, f);
    const double dist = std::sqrt((pa[0] - pb[0]) * (pa[0] - pb[0]) +
                                  (pa[1] - pb[1]) * (pa[1] - pb[1]) +
                                  (pa[2] - pb[2]) * (pa[2] - pb[2]));
    CHECK(std::abs(field.at(a, b, c) - field.at(d, e, f)) <= dist + 1e-12);
  }
}

TEST_CASE("denser clouds shrink the field at on-surface probes") {
  int wins = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const PointCloud coarse = unit_sphere(256, 100 + trial);
    const PointCloud dense = unit_sphere(4096, 200 + trial);
    const KdTree tc(coarse);
    const KdTree td(dense);
    // probe at fresh surface points; mean distance to the 4 nearest
    // samples falls as the sampling gets denser
    const PointCloud probes = unit_sphere(64, 300 + trial);
    double mc = 0.0, md = 0.0;
    std::vector<KdTree::Hit> hits;
    for (int64_t i = 0; i < probes.size(); ++i) {
      tc.knearest(probes.point(i), 4, hits);
      for (const auto& h : hits) mc += std::sqrt(h.dist_sq);
      td.knearest(probes.point(i), 4, hits);
      for (const auto& h : hits) md += std::sqrt(h.dist_sq);
    }
    if (md < mc) ++wins;
  }
  CHECK(wins >= 18);
}

TEST_CASE("field dump round-trips") {
  const PointCloud cloud = unit_sphere(128, 9);
  const ScalarField field = mean_distance_field(cloud, 6, 2, 0.1);
  save_field(field, "field_rt.bin");
  const ScalarField back = load_field("field_rt.bin");
  CHECK(back.gx == field.gx);
  REQUIRE(back.values.size() == field.values.size());
  for (size_t i = 0; i < field.values.size(); ++i)
    CHECK(back.values[i] == field.values[i]);
  for (int c = 0; c < 3; ++c) {
    CHECK(back.bmin[c] == field.bmin[c]);
    CHECK(back.bmax[c] == field.bmax[c]);
  }
}

TEST_CASE("marching cubes: empty when nothing crosses") {
  const ScalarField field =
      analytic_field(9, 1.0, [](double, double, double) { return 5.0; });
  const TriangleMesh mesh = marching_cubes(field, 1.0);
  CHECK(mesh.triangles.empty());
}

TEST_CASE("marching cubes on the analytic sphere field") {
  const ScalarField field = analytic_field(33, 2.0, [](double x, double y, double z) {
    return std::sqrt(x * x + y * y + z * z);
  });
  const TriangleMesh mesh = marching_cubes(field, 1.0);
  REQUIRE(!mesh.triangles.empty());

  // every vertex sits on the unit sphere within interpolation error
  for (const auto& v : mesh.vertices) {
    const double r = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    CHECK(std::abs(r - 1.0) < 0.05);
  }

  CHECK(watertight(mesh));

  // orientation: normals face the decreasing-field side (the origin)
  int64_t bad = 0;
  for (const auto& t : mesh.triangles) {
    const auto& a = mesh.vertices[size_t(t[0])];
    const auto& b = mesh.vertices[size_t(t[1])];
    const auto& c = mesh.vertices[size_t(t[2])];
    const double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2];
    const double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2];
    const double nx = uy * vz - uz * vy;
    const double ny = uz * vx - ux * vz;
    const double nz = ux * vy - uy * vx;
    const double cx = (a[0] + b[0] + c[0]) / 3.0;
    const double cy = (a[1] + b[1] + c[1]) / 3.0;
    const double cz = (a[2] + b[2] + c[2]) / 3.0;
    if (nx * cx + ny * cy + nz * cz >= 0.0) ++bad;
  }
  CHECK(bad == 0);

  // no degenerate triangles
  for (const auto& t : mesh.triangles) {
    CHECK(t[0] != t[1]);
    CHECK(t[1] != t[2]);
    CHECK(t[0] != t[2]);
  }
}

TEST_CASE("marching cubes vertices sit exactly on a linear field's plane") {
  const ScalarField field = analytic_field(9, 1.0, [](double x, double y, double z) {
    return 2.0 + 0.5 * x + 0.25 * y - 0.125 * z;
  });
  const TriangleMesh mesh = marching_cubes(field, 2.1);
  REQUIRE(!mesh.vertices.empty());
  for (const auto& v : mesh.vertices) {
    const double value = 2.0 + 0.5 * v[0] + 0.25 * v[1] - 0.125 * v[2];
    CHECK(std::abs(value - 2.1) < 1e-9);
  }
}

TEST_CASE("marching cubes handles threshold-touching grid values") {
  // plane of exact threshold values: must not crash or leak degenerate
  // triangles; the nudge treats equality as outside
  const ScalarField field = analytic_field(7, 1.0, [](double x, double, double) {
    return x <= 0.0 ? 1.0 : 2.0;
  });
  const TriangleMesh mesh = marching_cubes(field, 1.0);
  for (const auto& t : mesh.triangles) {
    CHECK(t[0] != t[1]);
    CHECK(t[1] != t[2]);
    CHECK(t[0] != t[2]);
  }
}

TEST_CASE("mean-distance shell of a dense generated sphere is watertight") {
  const PointCloud cloud = unit_sphere(16384, 17);
  const ScalarField field = mean_distance_field(cloud, 64, 8, 0.1);
  const double threshold = 1.5 * median_nn_spacing(cloud);
  const TriangleMesh mesh = marching_cubes(field, threshold);
  CHECK(!mesh.triangles.empty());
  CHECK(watertight(mesh));
}

TEST_CASE("obj writer examples and round trip") {
  save_obj(TriangleMesh{}, "empty.obj");
  {
    std::ifstream f("empty.obj");
    std::string content((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
    CHECK(content.empty());
  }

  TriangleMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.triangles = {{0, 1, 2}};
  save_obj(tri, "tri.obj");
  {
    std::ifstream f("tri.obj");
    std::string line;
    int v_lines = 0;
    std::string f_line;
    while (std::getline(f, line)) {
      if (line.rfind("v ", 0) == 0) ++v_lines;
      if (line.rfind("f ", 0) == 0) f_line = line;
    }
    CHECK(v_lines == 3);
    CHECK(f_line == "f 1 2 3");
  }

  const ScalarField field = analytic_field(17, 2.0, [](double x, double y, double z) {
    return std::sqrt(x * x + y * y + z * z);
  });
  const TriangleMesh sphere = marching_cubes(field, 1.0);
  save_obj(sphere, "sphere.obj");
  const TriangleMesh back = load_obj("sphere.obj");
  CHECK(back.vertices.size() == sphere.vertices.size());
  CHECK(back.triangles.size() == sphere.triangles.size());
}
