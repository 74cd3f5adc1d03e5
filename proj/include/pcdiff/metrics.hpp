#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcdiff/pointcloud.hpp"
#include "pcdiff/rng.hpp"

namespace pcdiff {

// Translation + isotropic scale mapping a cloud to zero centroid and unit
// RMS radius. Kept so results can be mapped back to the source frame.
struct StandardizeTransform {
  double centroid[3] = {0, 0, 0};
  double scale = 1.0;  // divisor applied after centering
};

// Zero-mean / unit-RMS-radius standardization of XYZ; RGB untouched.
PointCloud standardize(const PointCloud& cloud, StandardizeTransform* out_tf = nullptr);

// Applies an existing transform: xyz -> (xyz - centroid) / scale.
PointCloud apply_transform(const PointCloud& cloud, const StandardizeTransform& tf);

// Symmetric Chamfer distance over XYZ (Euclidean, not squared):
// mean nearest-neighbor distance averaged over both directions.
double chamfer(const PointCloud& s1, const PointCloud& s2);

// Uniform subsample without replacement to min(k, n) points.
PointCloud subsample(const PointCloud& cloud, int64_t k, Rng& rng);

// Chamfer on clouds subsampled to k points (CD@k). Deterministic in seed.
double cd_at_k(const PointCloud& s1, const PointCloud& s2, int64_t k = 1024,
               uint64_t seed = 0);

// F-score at distance threshold tau over the same subsampled sets as
// cd_at_k. Inputs are expected in standardized units.
double fscore(const PointCloud& pred, const PointCloud& gt, double tau = 0.2,
              int64_t k = 1024, uint64_t seed = 0);

// RGB PSNR in dB: each predicted point scored against the color of its
// XYZ-nearest ground-truth point. Zero MSE reports the 99 dB cap.
double psnr(const PointCloud& pred, const PointCloud& gt);
constexpr double kPsnrCap = 99.0;

// Mean pairwise CD@k over all unordered pairs of samples.
double variability(const std::vector<PointCloud>& samples, int64_t k = 1024,
                   uint64_t seed = 0);

// ---- evaluation report -----------------------------------------------------

struct EvalRow {
  int64_t object_id = 0;
  std::string family;
  double cd_full = 0.0;
  double cd_at_k = 0.0;
  double fscore = 0.0;
  double psnr = 0.0;
  std::optional<double> variability;
};

struct EvalReport {
  int64_t k = 1024;
  double tau = 0.2;
  std::vector<EvalRow> rows;

  // Unweighted means over objects.
  EvalRow aggregate() const;
  // CSV with one row per object plus a final "aggregate" row. The first
  // line records the config hash and checkpoint content hash.
  void save_csv(const std::string& path, const std::string& config_hash,
                const std::string& checkpoint_hash) const;
};

}  // namespace pcdiff
