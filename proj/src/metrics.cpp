#include "pcdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pcdiff/kdtree.hpp"

namespace pcdiff {

PointCloud standardize(const PointCloud& cloud, StandardizeTransform* out_tf) {
  const int64_t n = cloud.size();
  PCD_CHECK(n >= 2, "standardize: needs at least 2 points, got ", n);
  StandardizeTransform tf;
  for (int64_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) tf.centroid[c] += cloud.at(i, c);
  for (int c = 0; c < 3; ++c) tf.centroid[c] /= double(n);
  double ms = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double d = cloud.at(i, c) - tf.centroid[c];
      r2 += d * d;
    }
    ms += r2;
  }
  tf.scale = std::sqrt(ms / double(n));
  PCD_CHECK(tf.scale > 0.0, "standardize: degenerate cloud (all points identical)");
  if (out_tf) *out_tf = tf;
  return apply_transform(cloud, tf);
}

PointCloud apply_transform(const PointCloud& cloud, const StandardizeTransform& tf) {
  PointCloud out = cloud;
  const int64_t n = out.size();
  const double inv = 1.0 / tf.scale;
  for (int64_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c)
      out.at(i, c) = (out.at(i, c) - tf.centroid[c]) * inv;
  return out;
}

namespace {
// Mean nearest-neighbor distance from each point of `from` into `tree`.
double directed_mean_nn(const PointCloud& from, const KdTree& tree) {
  const int64_t n = from.size();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i)
    acc += std::sqrt(tree.nearest(from.point(i)).dist_sq);
  return acc / double(n);
}
}  // namespace

double chamfer(const PointCloud& s1, const PointCloud& s2) {
  PCD_CHECK(s1.size() >= 1 && s2.size() >= 1, "chamfer: empty input cloud");
  const KdTree t1(s1);
  const KdTree t2(s2);
  return 0.5 * directed_mean_nn(s1, t2) + 0.5 * directed_mean_nn(s2, t1);
}

PointCloud subsample(const PointCloud& cloud, int64_t k, Rng& rng) {
  const int64_t n = cloud.size();
  if (k >= n) return cloud;
  std::vector<int64_t> idx(size_t(n), 0);
  std::iota(idx.begin(), idx.end(), 0);
  for (int64_t i = 0; i < k; ++i) {
    const int64_t j = i + int64_t(rng.below(uint64_t(n - i)));
    std::swap(idx[size_t(i)], idx[size_t(j)]);
  }
  PointCloud out(k);
  for (int64_t i = 0; i < k; ++i)
    for (int c = 0; c < 6; ++c) out.at(i, c) = cloud.at(idx[size_t(i)], c);
  return out;
}

namespace {
// Both clouds draw from identically seeded streams, so equal inputs
// yield equal subsets (CD of a cloud against itself stays exactly 0).
std::pair<PointCloud, PointCloud> subsampled_pair(const PointCloud& s1,
                                                  const PointCloud& s2,
                                                  int64_t k, uint64_t seed) {
  Rng r1(mix_seed(seed, 0x53554253ULL));
  Rng r2(mix_seed(seed, 0x53554253ULL));
  return {subsample(s1, k, r1), subsample(s2, k, r2)};
}
}  // namespace

double cd_at_k(const PointCloud& s1, const PointCloud& s2, int64_t k,
               uint64_t seed) {
  PCD_CHECK(s1.size() >= 1 && s2.size() >= 1, "cd_at_k: empty input cloud");
  auto [a, b] = subsampled_pair(s1, s2, k, seed);
  return chamfer(a, b);
}

double fscore(const PointCloud& pred, const PointCloud& gt, double tau,
              int64_t k, uint64_t seed) {
  PCD_CHECK(pred.size() >= 1 && gt.size() >= 1, "fscore: empty input cloud");
  auto [p, g] = subsampled_pair(pred, gt, k, seed);
  const KdTree tp(p);
  const KdTree tg(g);
  const double tau_sq = tau * tau;
  int64_t hit_p = 0;
  for (int64_t i = 0; i < p.size(); ++i)
    if (tg.nearest(p.point(i)).dist_sq < tau_sq) ++hit_p;
  int64_t hit_g = 0;
  for (int64_t i = 0; i < g.size(); ++i)
    if (tp.nearest(g.point(i)).dist_sq < tau_sq) ++hit_g;
  const double precision = double(hit_p) / double(p.size());
  const double recall = double(hit_g) / double(g.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double psnr(const PointCloud& pred, const PointCloud& gt) {
  PCD_CHECK(pred.size() >= 1 && gt.size() >= 1, "psnr: empty input cloud");
  const KdTree tg(gt);
  double mse = 0.0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const int64_t j = tg.nearest(pred.point(i)).index;
    for (int c = 3; c < 6; ++c) {
      const double d = pred.at(i, c) - gt.at(j, c);
      mse += d * d;
    }
  }
  mse /= double(pred.size() * 3);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double variability(const std::vector<PointCloud>& samples, int64_t k,
                   uint64_t seed) {
  PCD_CHECK(samples.size() >= 2, "variability: needs at least 2 samples, got ",
            samples.size());
  double acc = 0.0;
  int64_t pairs = 0;
  for (size_t i = 0; i < samples.size(); ++i)
    for (size_t j = i + 1; j < samples.size(); ++j) {
      acc += cd_at_k(samples[i], samples[j], k, mix_seed(seed, i, j));
      ++pairs;
    }
  return acc / double(pairs);
}

EvalRow EvalReport::aggregate() const {
  EvalRow agg;
  agg.object_id = -1;
  agg.family = "aggregate";
  if (rows.empty()) return agg;
  bool any_var = false;
  double var_acc = 0.0;
  int64_t var_n = 0;
  for (const auto& r : rows) {
    agg.cd_full += r.cd_full;
    agg.cd_at_k += r.cd_at_k;
    agg.fscore += r.fscore;
    agg.psnr += r.psnr;
    if (r.variability) {
      any_var = true;
      var_acc += *r.variability;
      ++var_n;
    }
  }
  const double inv = 1.0 / double(rows.size());
  agg.cd_full *= inv;
  agg.cd_at_k *= inv;
  agg.fscore *= inv;
  agg.psnr *= inv;
  if (any_var) agg.variability = var_acc / double(var_n);
  return agg;
}

void EvalReport::save_csv(const std::string& path, const std::string& config_hash,
                          const std::string& checkpoint_hash) const {
  std::ofstream f(path);
  PCD_CHECK(f.good(), "EvalReport: cannot write ", path);
  f << "# config_hash=" << config_hash << " checkpoint_hash=" << checkpoint_hash
    << "\n";
  f << "object_id,family,cd_full,cd_at_" << k << ",fscore_tau" << tau
    << ",psnr,variability\n";
  f.precision(17);
  auto write_row = [&](const EvalRow& r) {
    f << r.object_id << "," << r.family << "," << r.cd_full << "," << r.cd_at_k
      << "," << r.fscore << "," << r.psnr << ",";
    if (r.variability) f << *r.variability;
    f << "\n";
  };
  for (const auto& r : rows) write_row(r);
  write_row(aggregate());
}

}  // namespace pcdiff
