#include "pcdiff/shapes.hpp"

#include <algorithm>
#include <cmath>

namespace pcdiff {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 6.28318530717958647692;

// sgn(cos t)|cos t|^e and friends, the superellipse basis functions.
inline double sgn_pow(double v, double e) {
  if (v > 0.0) return std::pow(v, e);
  if (v < 0.0) return -std::pow(-v, e);
  return 0.0;
}

struct LocalSample {
  double pos[3];
};

void sphere_sample(const ShapeSpec& s, Rng& rng, LocalSample& out) {
  const double r = s.p[0];
  const double z = rng.uniform(-r, r);
  const double phi = rng.uniform(0.0, kTwoPi);
  const double rho = std::sqrt(std::max(0.0, r * r - z * z));
  out.pos[0] = rho * std::cos(phi);
  out.pos[1] = rho * std::sin(phi);
  out.pos[2] = z;
}

void torus_sample(const ShapeSpec& s, Rng& rng, LocalSample& out) {
  const double R = s.p[0], r = s.p[1];
  // Tube angle is rejection-sampled with weight (R + r cos phi)/(R + r)
  // so samples are area-uniform, not parameter-uniform.
  double phi;
  for (;;) {
    phi = rng.uniform(-kPi, kPi);
    const double w = (R + r * std::cos(phi)) / (R + r);
    if (rng.uniform() < w) break;
  }
  const double theta = rng.uniform(0.0, kTwoPi);
  const double rho = R + r * std::cos(phi);
  out.pos[0] = rho * std::cos(theta);
  out.pos[1] = rho * std::sin(theta);
  out.pos[2] = r * std::sin(phi);
}

void box_sample(const ShapeSpec& s, Rng& rng, LocalSample& out) {
  const double ext[3] = {s.p[0], s.p[1], s.p[2]};
  const double areas[3] = {ext[1] * ext[2], ext[0] * ext[2], ext[0] * ext[1]};
  const double total = 2.0 * (areas[0] + areas[1] + areas[2]);
  double pick = rng.uniform(0.0, total);
  int face_axis = 2;
  double side = -1.0;
  for (int k = 0; k < 6; ++k) {
    if (pick < areas[k / 2]) {
      face_axis = k / 2;
      side = (k % 2 == 0) ? 1.0 : -1.0;
      break;
    }
    pick -= areas[k / 2];
  }
  for (int axis = 0; axis < 3; ++axis)
    out.pos[axis] = axis == face_axis ? side * ext[axis]
                                      : rng.uniform(-ext[axis], ext[axis]);
}

struct SuperquadricGeom {
  double a, b, c, e1, e2;

  void position(double eta, double omega, double* pos) const {
    const double ce = sgn_pow(std::cos(eta), e1);
    const double se = sgn_pow(std::sin(eta), e1);
    pos[0] = a * ce * sgn_pow(std::cos(omega), e2);
    pos[1] = b * ce * sgn_pow(std::sin(omega), e2);
    pos[2] = c * se;
  }

  // |d pos/d eta x d pos/d omega|, the surface area element.
  double area_element(double eta, double omega) const {
    const double ch = std::cos(eta), sh = std::sin(eta);
    const double cw = std::cos(omega), sw = std::sin(omega);
    const double ce = sgn_pow(ch, e1);
    const double dce = -e1 * std::pow(std::abs(ch), e1 - 1.0) * sh;
    const double dse = e1 * std::pow(std::abs(sh), e1 - 1.0) * ch;
    const double cw2 = sgn_pow(cw, e2);
    const double sw2 = sgn_pow(sw, e2);
    const double dcw2 = -e2 * std::pow(std::abs(cw), e2 - 1.0) * sw;
    const double dsw2 = e2 * std::pow(std::abs(sw), e2 - 1.0) * cw;

    const double du[3] = {a * dce * cw2, b * dce * sw2, c * dse};
    const double dv[3] = {a * ce * dcw2, b * ce * dsw2, 0.0};
    const double cx = du[1] * dv[2] - du[2] * dv[1];
    const double cy = du[2] * dv[0] - du[0] * dv[2];
    const double cz = du[0] * dv[1] - du[1] * dv[0];
    return std::sqrt(cx * cx + cy * cy + cz * cz);
  }

  double bound() const {
    // Upper envelope for rejection sampling, probed on a fixed grid. The
    // area element is smooth for e >= 1 so a 1.5x margin is conservative.
    double mx = 0.0;
    for (int i = 0; i <= 64; ++i)
      for (int j = 0; j <= 128; ++j) {
        const double eta = -kPi / 2 + kPi * double(i) / 64.0;
        const double omega = -kPi + kTwoPi * double(j) / 128.0;
        mx = std::max(mx, area_element(eta, omega));
      }
    return 1.5 * mx + 1e-12;
  }
};

void superquadric_sample(const ShapeSpec&, Rng& rng,
                         const SuperquadricGeom& geom, double bound,
                         LocalSample& out) {
  for (;;) {
    const double eta = rng.uniform(-kPi / 2, kPi / 2);
    const double omega = rng.uniform(-kPi, kPi);
    if (rng.uniform(0.0, bound) < geom.area_element(eta, omega)) {
      geom.position(eta, omega, out.pos);
      return;
    }
  }
}

void local_extent(const ShapeSpec& s, double* ext) {
  switch (s.family) {
    case ShapeFamily::kSphere:
      ext[0] = ext[1] = ext[2] = s.p[0];
      break;
    case ShapeFamily::kTorus:
      ext[0] = ext[1] = s.p[0] + s.p[1];
      ext[2] = s.p[1];
      break;
    case ShapeFamily::kBox:
    case ShapeFamily::kSuperquadric:
      ext[0] = s.p[0];
      ext[1] = s.p[1];
      ext[2] = s.p[2];
      break;
  }
}

void color_at(const ShapeSpec& s, const double* local, double* rgb) {
  const ColorFieldSpec& cf = s.color;
  switch (cf.kind) {
    case ColorKind::kConstant:
      for (int c = 0; c < 3; ++c) rgb[c] = cf.c0[c];
      return;
    case ColorKind::kTwoTone: {
      const double* pick = local[cf.axis] >= 0.0 ? cf.c0 : cf.c1;
      for (int c = 0; c < 3; ++c) rgb[c] = pick[c];
      return;
    }
    case ColorKind::kAxisGradient: {
      double ext[3];
      local_extent(s, ext);
      const double e = std::max(ext[cf.axis], 1e-12);
      const double t = std::clamp((local[cf.axis] + e) / (2.0 * e), 0.0, 1.0);
      for (int c = 0; c < 3; ++c) rgb[c] = cf.c0[c] + t * (cf.c1[c] - cf.c0[c]);
      return;
    }
  }
}

void rotate(const double* q, const double* v, double* out) {
  // q = (w, x, y, z), unit. out = q v q^-1.
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  const double tx = 2.0 * (y * v[2] - z * v[1]);
  const double ty = 2.0 * (z * v[0] - x * v[2]);
  const double tz = 2.0 * (x * v[1] - y * v[0]);
  out[0] = v[0] + w * tx + (y * tz - z * ty);
  out[1] = v[1] + w * ty + (z * tx - x * tz);
  out[2] = v[2] + w * tz + (x * ty - y * tx);
}

}  // namespace

const char* family_name(ShapeFamily f) {
  switch (f) {
    case ShapeFamily::kSphere: return "sphere";
    case ShapeFamily::kTorus: return "torus";
    case ShapeFamily::kBox: return "box";
    case ShapeFamily::kSuperquadric: return "superquadric";
  }
  return "?";
}

ShapeFamily family_from_name(const std::string& name) {
  if (name == "sphere") return ShapeFamily::kSphere;
  if (name == "torus") return ShapeFamily::kTorus;
  if (name == "box") return ShapeFamily::kBox;
  if (name == "superquadric") return ShapeFamily::kSuperquadric;
  throw Error("unknown shape family: " + name);
}

void ShapeSpec::validate() const {
  switch (family) {
    case ShapeFamily::kSphere:
      PCD_CHECK(p[0] > 0.0, "shape ", id, ": sphere radius must be positive");
      break;
    case ShapeFamily::kTorus:
      PCD_CHECK(p[0] > 0.0 && p[1] > 0.0 && p[1] < p[0], "shape ", id,
                ": torus needs 0 < r < R, got R=", p[0], " r=", p[1]);
      break;
    case ShapeFamily::kBox:
      PCD_CHECK(p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0, "shape ", id,
                ": box extents must be positive");
      break;
    case ShapeFamily::kSuperquadric:
      PCD_CHECK(p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0, "shape ", id,
                ": superquadric semi-axes must be positive");
      PCD_CHECK(p[3] >= 1.0 && p[3] <= 1.6 && p[4] >= 1.0 && p[4] <= 1.6,
                "shape ", id, ": superquadric exponents must lie in [1, 1.6]");
      break;
  }
  const double qn = pose.quat[0] * pose.quat[0] + pose.quat[1] * pose.quat[1] +
                    pose.quat[2] * pose.quat[2] + pose.quat[3] * pose.quat[3];
  PCD_CHECK(std::abs(qn - 1.0) < 1e-9, "shape ", id,
            ": pose quaternion is not unit length");
}

PointCloud sample_shape(const ShapeSpec& spec, int64_t n, Rng& rng) {
  PCD_CHECK(n >= 1, "sample_shape: n must be >= 1, got ", n);
  spec.validate();

  SuperquadricGeom geom{spec.p[0], spec.p[1], spec.p[2], spec.p[3], spec.p[4]};
  double sq_bound = 0.0;
  if (spec.family == ShapeFamily::kSuperquadric) sq_bound = geom.bound();

  PointCloud cloud(n);
  LocalSample local;
  for (int64_t i = 0; i < n; ++i) {
    switch (spec.family) {
      case ShapeFamily::kSphere: sphere_sample(spec, rng, local); break;
      case ShapeFamily::kTorus: torus_sample(spec, rng, local); break;
      case ShapeFamily::kBox: box_sample(spec, rng, local); break;
      case ShapeFamily::kSuperquadric:
        superquadric_sample(spec, rng, geom, sq_bound, local);
        break;
    }
    double rgb[3] = {0, 0, 0};
    color_at(spec, local.pos, rgb);
    double world[3];
    rotate(spec.pose.quat, local.pos, world);
    for (int c = 0; c < 3; ++c) {
      cloud.at(i, c) = world[c] + spec.pose.trans[c];
      cloud.at(i, 3 + c) = rgb[c];
    }
  }
  return cloud;
}

namespace {
constexpr uint64_t kReferenceStream = 0x5245464652414d45ULL;  // "REFFRAME"
}

StandardizeTransform reference_transform(const ShapeSpec& spec) {
  Rng rng(mix_seed(kReferenceStream, uint64_t(spec.id)));
  const PointCloud ref = sample_shape(spec, kReferencePoints, rng);
  StandardizeTransform tf;
  standardize(ref, &tf);
  return tf;
}

PointCloud sample_observation(const ShapeSpec& spec, int64_t count, Rng& rng,
                              const StandardizeTransform& tf) {
  PCD_CHECK(count >= 1, "sample_observation: count must be >= 1");
  double dir[3];
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& d : dir) {
      d = rng.normal();
      norm += d * d;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  for (double& d : dir) d /= norm;

  PointCloud obs(count);
  int64_t got = 0;
  const int64_t max_rounds = 4000;
  for (int64_t round = 0; got < count; ++round) {
    PCD_CHECK(round < max_rounds,
              "sample_observation: half-space cut rejected too many samples");
    PointCloud chunk = apply_transform(sample_shape(spec, count, rng), tf);
    for (int64_t i = 0; i < chunk.size() && got < count; ++i) {
      const double dot = dir[0] * chunk.at(i, 0) + dir[1] * chunk.at(i, 1) +
                         dir[2] * chunk.at(i, 2);
      if (dot < 0.0) continue;
      for (int c = 0; c < 6; ++c) obs.at(got, c) = chunk.at(i, c);
      ++got;
    }
  }
  return obs;
}

}  // namespace pcdiff
