#include "pcdiff/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pcdiff {

std::vector<const ShapeSpec*> Dataset::split_specs(Split s) const {
  std::vector<const ShapeSpec*> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(&e.spec);
  return out;
}

int64_t Dataset::count(Split s) const {
  int64_t n = 0;
  for (const auto& e : entries) n += e.split == s ? 1 : 0;
  return n;
}

Split split_for_id(int64_t id) {
  return splitmix64(uint64_t(id)) % 10 == 9 ? Split::kVal : Split::kTrain;
}

namespace {

void random_unit_quat(Rng& rng, double* q) {
  // Shoemake's uniform rotation from three uniforms.
  const double u1 = rng.uniform(), u2 = rng.uniform(), u3 = rng.uniform();
  const double twopi = 6.28318530717958647692;
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  q[0] = b * std::cos(twopi * u3);
  q[1] = a * std::sin(twopi * u2);
  q[2] = a * std::cos(twopi * u2);
  q[3] = b * std::sin(twopi * u3);
}

void random_rgb(Rng& rng, double* c) {
  for (int i = 0; i < 3; ++i) c[i] = rng.uniform(0.1, 0.9);
}

ShapeSpec random_spec(int64_t id, Rng& rng) {
  ShapeSpec s;
  s.id = id;
  s.family = ShapeFamily(int32_t(rng.below(4)));
  switch (s.family) {
    case ShapeFamily::kSphere:
      s.p[0] = rng.uniform(0.5, 1.5);
      break;
    case ShapeFamily::kTorus:
      s.p[0] = rng.uniform(0.7, 1.2);
      s.p[1] = s.p[0] * rng.uniform(0.15, 0.45);
      break;
    case ShapeFamily::kBox:
      for (int i = 0; i < 3; ++i) s.p[i] = rng.uniform(0.4, 1.2);
      break;
    case ShapeFamily::kSuperquadric:
      for (int i = 0; i < 3; ++i) s.p[i] = rng.uniform(0.5, 1.2);
      s.p[3] = rng.uniform(1.0, 1.6);
      s.p[4] = rng.uniform(1.0, 1.6);
      break;
  }
  s.color.kind = ColorKind(int32_t(rng.below(3)));
  random_rgb(rng, s.color.c0);
  random_rgb(rng, s.color.c1);
  s.color.axis = int32_t(rng.below(3));
  random_unit_quat(rng, s.pose.quat);
  for (int i = 0; i < 3; ++i) s.pose.trans[i] = rng.uniform(-0.3, 0.3);
  return s;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Dataset build_dataset(int64_t count, uint64_t seed) {
  PCD_CHECK(count >= 1, "build_dataset: count must be >= 1, got ", count);
  Dataset ds;
  ds.seed = seed;
  ds.entries.reserve(size_t(count));
  for (int64_t id = 0; id < count; ++id) {
    // Per-shape stream so corpus prefixes agree across sizes.
    Rng rng(mix_seed(seed, uint64_t(id), 0x5348415045ULL));
    DatasetEntry e;
    e.spec = random_spec(id, rng);
    e.split = split_for_id(id);
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

void save_manifest(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  PCD_CHECK(f.good(), "save_manifest: cannot write ", path);
  f << "# pcdiff dataset v1 seed=" << ds.seed << " count=" << ds.entries.size()
    << "\n";
  for (const auto& e : ds.entries) {
    const ShapeSpec& s = e.spec;
    f << s.id << " " << family_name(s.family) << " "
      << (e.split == Split::kVal ? "val" : "train");
    for (double v : s.p) f << " " << fmt_double(v);
    f << " " << int(s.color.kind) << " " << s.color.axis;
    for (double v : s.color.c0) f << " " << fmt_double(v);
    for (double v : s.color.c1) f << " " << fmt_double(v);
    for (double v : s.pose.quat) f << " " << fmt_double(v);
    for (double v : s.pose.trans) f << " " << fmt_double(v);
    f << "\n";
  }
  PCD_CHECK(f.good(), "save_manifest: write failure on ", path);
}

Dataset load_manifest(const std::string& path) {
  std::ifstream f(path);
  PCD_CHECK(f.good(), "load_manifest: cannot open ", path);
  std::string header;
  std::getline(f, header);
  Dataset ds;
  {
    uint64_t seed = 0;
    unsigned long long count = 0;
    const int got = std::sscanf(header.c_str(),
                                "# pcdiff dataset v1 seed=%llu count=%llu",
                                reinterpret_cast<unsigned long long*>(&seed),
                                &count);
    PCD_CHECK(got == 2, "load_manifest: bad header line: ", header);
    ds.seed = seed;
  }
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    DatasetEntry e;
    std::string family, split;
    is >> e.spec.id >> family >> split;
    e.spec.family = family_from_name(family);
    PCD_CHECK(split == "train" || split == "val",
              "load_manifest: bad split token '", split, "'");
    e.split = split == "val" ? Split::kVal : Split::kTrain;
    for (double& v : e.spec.p) is >> v;
    int kind = 0;
    is >> kind >> e.spec.color.axis;
    e.spec.color.kind = ColorKind(kind);
    for (double& v : e.spec.color.c0) is >> v;
    for (double& v : e.spec.color.c1) is >> v;
    for (double& v : e.spec.pose.quat) is >> v;
    for (double& v : e.spec.pose.trans) is >> v;
    PCD_CHECK(!is.fail(), "load_manifest: malformed line: ", line);
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

}  // namespace pcdiff
