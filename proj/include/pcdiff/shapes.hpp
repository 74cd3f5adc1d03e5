#pragma once

#include <cstdint>
#include <string>

#include "pcdiff/metrics.hpp"
#include "pcdiff/pointcloud.hpp"
#include "pcdiff/rng.hpp"

namespace pcdiff {

// Parametric ground-truth surfaces. Every family supports exact
// area-weighted i.i.d. surface sampling at any resolution, which is what
// makes "many resolutions, one underlying surface" testable.

enum class ShapeFamily : int32_t {
  kSphere = 0,
  kTorus = 1,
  kBox = 2,
  kSuperquadric = 3,
};

const char* family_name(ShapeFamily f);
ShapeFamily family_from_name(const std::string& name);

enum class ColorKind : int32_t {
  kConstant = 0,
  kTwoTone = 1,
  kAxisGradient = 2,
};

struct ColorFieldSpec {
  ColorKind kind = ColorKind::kConstant;
  double c0[3] = {0.5, 0.5, 0.5};
  double c1[3] = {0.5, 0.5, 0.5};
  int32_t axis = 2;  // local axis driving two-tone / gradient fields
};

struct Pose {
  double quat[4] = {1, 0, 0, 0};  // unit quaternion, w x y z
  double trans[3] = {0, 0, 0};
};

struct ShapeSpec {
  int64_t id = 0;
  ShapeFamily family = ShapeFamily::kSphere;
  // Family parameters:
  //   sphere        p[0] = radius
  //   torus         p[0] = ring radius R, p[1] = tube radius r (r < R)
  //   box           p[0..2] = half extents
  //   superquadric  p[0..2] = semi-axes, p[3] = e1, p[4] = e2 (in [1, 1.6])
  double p[5] = {1, 0, 0, 0, 0};
  ColorFieldSpec color;
  Pose pose;

  void validate() const;
};

// n i.i.d. area-weighted surface samples with colors, posed in world
// coordinates. Pure in (spec, n, rng state).
PointCloud sample_shape(const ShapeSpec& spec, int64_t n, Rng& rng);

// Canonical standardization of the object: computed once from a fixed
// 4096-point draw so clouds of every resolution (and the conditioning
// observation) share one frame.
StandardizeTransform reference_transform(const ShapeSpec& spec);
constexpr int64_t kReferencePoints = 4096;

// `count` surface points from a random half-space cut (plane through the
// standardized centroid with rng-drawn normal), in standardized coords.
PointCloud sample_observation(const ShapeSpec& spec, int64_t count, Rng& rng,
                              const StandardizeTransform& tf);

}  // namespace pcdiff
