#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <fstream>

#include "doctest.h"
#include "pcdiff/kdtree.hpp"
#include "pcdiff/metrics.hpp"

using namespace pcdiff;

namespace {

PointCloud random_cloud(Rng& rng, int64_t n, double spread = 1.0) {
  PointCloud c(n);
  for (int64_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) c.at(i, k) = rng.normal() * spread;
    for (int k = 3; k < 6; ++k) c.at(i, k) = rng.uniform();
  }
  return c;
}

// O(n^2) oracles, independent of the kd-tree path.
double brute_nn_dist_sq(const PointCloud& cloud, const double* q) {
  double best = std::numeric_limits<double>::max();
  for (int64_t i = 0; i < cloud.size(); ++i) {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double diff = q[k] - cloud.at(i, k);
      d += diff * diff;
    }
    best = std::min(best, d);
  }
  return best;
}

int64_t brute_nn_index(const PointCloud& cloud, const double* q) {
  double best = std::numeric_limits<double>::max();
  int64_t arg = -1;
  for (int64_t i = 0; i < cloud.size(); ++i) {
    double d = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double diff = q[k] - cloud.at(i, k);
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      arg = i;
    }
  }
  return arg;
}

double brute_chamfer(const PointCloud& a, const PointCloud& b) {
  double acc_a = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    acc_a += std::sqrt(brute_nn_dist_sq(b, a.point(i)));
  double acc_b = 0.0;
  for (int64_t i = 0; i < b.size(); ++i)
    acc_b += std::sqrt(brute_nn_dist_sq(a, b.point(i)));
  return 0.5 * acc_a / double(a.size()) + 0.5 * acc_b / double(b.size());
}

double brute_psnr(const PointCloud& pred, const PointCloud& gt) {
  double mse = 0.0;
  for (int64_t i = 0; i < pred.size(); ++i) {
    const int64_t j = brute_nn_index(gt, pred.point(i));
    for (int c = 3; c < 6; ++c) {
      const double d = pred.at(i, c) - gt.at(j, c);
      mse += d * d;
    }
  }
  mse /= double(pred.size() * 3);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

}  // namespace

TEST_CASE("standardize examples") {
  // hand example: two points -> (-1,0,0), (1,0,0)
  PointCloud two(2);
  two.at(1, 0) = 2.0;
  StandardizeTransform tf;
  PointCloud std_two = standardize(two, &tf);
  CHECK(std_two.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std_two.at(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(tf.scale == doctest::Approx(1.0));

  // idempotence and shift/scale invariance
  Rng rng(5);
  PointCloud c = random_cloud(rng, 100, 3.0);
  PointCloud s1 = standardize(c);
  PointCloud s2 = standardize(s1);
  PointCloud shifted = c;
  for (int64_t i = 0; i < c.size(); ++i) {
    shifted.at(i, 0) = c.at(i, 0) * 7.0 + 1.0;
    shifted.at(i, 1) = c.at(i, 1) * 7.0 + 2.0;
    shifted.at(i, 2) = c.at(i, 2) * 7.0 + 3.0;
  }
  PointCloud s3 = standardize(shifted);
  for (size_t i = 0; i < s1.pts.size(); ++i) {
    CHECK(s1.pts[i] == doctest::Approx(s2.pts[i]).epsilon(1e-12));
    CHECK(s1.pts[i] == doctest::Approx(s3.pts[i]).epsilon(1e-12));
  }

  // standardized invariants
  double centroid[3] = {0, 0, 0};
  double ms = 0.0;
  for (int64_t i = 0; i < s1.size(); ++i)
    for (int k = 0; k < 3; ++k) centroid[k] += s1.at(i, k);
  for (int k = 0; k < 3; ++k) centroid[k] /= double(s1.size());
  for (int64_t i = 0; i < s1.size(); ++i)
    for (int k = 0; k < 3; ++k) ms += s1.at(i, k) * s1.at(i, k);
  ms = std::sqrt(ms / double(s1.size()));
  CHECK(std::abs(centroid[0]) < 1e-9);
  CHECK(std::abs(centroid[1]) < 1e-9);
  CHECK(std::abs(centroid[2]) < 1e-9);
  CHECK(std::abs(ms - 1.0) < 1e-9);

  PointCloud degenerate(3);
  for (int64_t i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) degenerate.at(i, k) = 0.5;
  CHECK_THROWS_AS(standardize(degenerate), Error);
  CHECK_THROWS_AS(standardize(PointCloud(1)), Error);
}

TEST_CASE("chamfer examples and brute-force oracle") {
  PointCloud a(1), b(1);
  b.at(0, 0) = 1.0;
  CHECK(chamfer(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(chamfer(a, a) == 0.0);
  CHECK_THROWS_AS(chamfer(a, PointCloud(0)), Error);

  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    PointCloud s1 = random_cloud(rng, 17);
    PointCloud s2 = random_cloud(rng, 31);
    const double fast = chamfer(s1, s2);
    const double slow = brute_chamfer(s1, s2);
    CHECK(std::abs(fast - slow) < 1e-12);
    CHECK(std::abs(chamfer(s2, s1) - fast) < 1e-12);
  }

  // adding matched points never hurts: chamfer(A, A u B) <= chamfer(A, B)
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud s1 = random_cloud(rng, 13);
    PointCloud s2 = random_cloud(rng, 19);
    const PointCloud unioned = concat({s1, s2});
    CHECK(chamfer(s1, unioned) <= chamfer(s1, s2) + 1e-12);
  }
}

TEST_CASE("kd-tree equals brute force on 100 random instances") {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t n = 1 + int64_t(rng.below(64));
    PointCloud cloud = random_cloud(rng, n);
    KdTree tree(cloud);
    for (int q = 0; q < 10; ++q) {
      double query[3] = {rng.normal(), rng.normal(), rng.normal()};
      const auto hit = tree.nearest(query);
      CHECK(hit.dist_sq == brute_nn_dist_sq(cloud, query));
    }
    // k-NN distances agree with a sorted brute-force list
    const int64_t k = std::min<int64_t>(n, 1 + int64_t(rng.below(8)));
    double query[3] = {rng.normal(), rng.normal(), rng.normal()};
    std::vector<KdTree::Hit> hits;
    tree.knearest(query, k, hits);
    std::vector<double> all;
    for (int64_t i = 0; i < n; ++i) {
      double d = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double diff = query[c] - cloud.at(i, c);
        d += diff * diff;
      }
      all.push_back(d);
    }
    std::sort(all.begin(), all.end());
    REQUIRE(int64_t(hits.size()) == k);
    for (int64_t i = 0; i < k; ++i)
      CHECK(hits[size_t(i)].dist_sq == all[size_t(i)]);
  }
}

TEST_CASE("cd_at_k") {
  Rng rng(31);
  PointCloud a = random_cloud(rng, 40);
  PointCloud b = random_cloud(rng, 50);
  // k >= both sizes: equals plain chamfer
  CHECK(cd_at_k(a, b, 64, 9) == doctest::Approx(chamfer(a, b)).epsilon(1e-15));
  CHECK(cd_at_k(a, a, 7, 5) == 0.0);
  // reproducible in the seed
  CHECK(cd_at_k(a, b, 16, 42) == cd_at_k(a, b, 16, 42));
  CHECK(cd_at_k(a, b, 16, 42) != cd_at_k(a, b, 16, 43));
}

TEST_CASE("cd@1k seed stability on dense same-surface clouds") {
  // two 4096-point unit spheres; subsample noise across seeds stays <10%
  Rng rng(37);
  auto sphere = [&](int64_t n) {
    PointCloud c(n);
    for (int64_t i = 0; i < n; ++i) {
      const double z = rng.uniform(-1.0, 1.0);
      const double phi = rng.uniform(0.0, 6.283185307179586);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      c.at(i, 0) = rho * std::cos(phi);
      c.at(i, 1) = rho * std::sin(phi);
      c.at(i, 2) = z;
    }
    return c;
  };
  PointCloud s1 = sphere(4096);
  PointCloud s2 = sphere(4096);
  const double v1 = cd_at_k(s1, s2, 1024, 1);
  const double v2 = cd_at_k(s1, s2, 1024, 2);
  CHECK(std::abs(v1 - v2) / v1 < 0.10);
}

TEST_CASE("fscore examples") {
  Rng rng(41);
  PointCloud gt = random_cloud(rng, 30);
  CHECK(fscore(gt, gt, 0.2, 64, 3) == doctest::Approx(1.0));

  PointCloud far = gt;
  for (int64_t i = 0; i < far.size(); ++i) far.at(i, 0) += 100.0;
  CHECK(fscore(far, gt, 0.2, 64, 3) == 0.0);

  // half of pred matches gt exactly, half is far; gt fully covered:
  // precision 0.5, recall 1 -> F = 2/3
  PointCloud pred = concat({gt, far});
  const double f = fscore(pred, gt, 0.2, 128, 3);
  CHECK(f == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  // monotone non-increasing as tau shrinks
  PointCloud noisy = gt;
  Rng jitter(43);
  for (int64_t i = 0; i < noisy.size(); ++i)
    for (int c = 0; c < 3; ++c) noisy.at(i, c) += 0.05 * jitter.normal();
  double prev = 1.0;
  for (double tau : {0.4, 0.2, 0.1, 0.05, 0.02}) {
    const double cur = fscore(noisy, gt, tau, 64, 3);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("psnr examples and oracle") {
  Rng rng(47);
  PointCloud gt = random_cloud(rng, 25);
  CHECK(psnr(gt, gt) == kPsnrCap);

  // constant 0.5 offset on every channel: 10*log10(1/0.25) ~ 6.02 dB
  PointCloud off = gt;
  for (int64_t i = 0; i < off.size(); ++i)
    for (int c = 3; c < 6; ++c)
      off.at(i, c) = gt.at(i, c) >= 0.5 ? gt.at(i, c) - 0.5 : gt.at(i, c) + 0.5;
  CHECK(psnr(off, gt) ==
        doctest::Approx(10.0 * std::log10(4.0)).epsilon(1e-12));
  CHECK(psnr(off, gt) == doctest::Approx(6.0206).epsilon(1e-4));

  for (int trial = 0; trial < 10; ++trial) {
    PointCloud pred = random_cloud(rng, 100);
    PointCloud ref = random_cloud(rng, 100);
    CHECK(psnr(pred, ref) == brute_psnr(pred, ref));
  }
}

TEST_CASE("variability") {
  Rng rng(53);
  PointCloud a = random_cloud(rng, 20);
  CHECK(variability({a, a, a}, 32, 7) == 0.0);
  CHECK_THROWS_AS(variability({a}, 32, 7), Error);

  // three disjoint single points mutually at distance 1
  PointCloud p1(1), p2(1), p3(1);
  p2.at(0, 0) = 1.0;
  p3.at(0, 0) = 0.5;
  p3.at(0, 1) = std::sqrt(3.0) / 2.0;
  CHECK(variability({p1, p2, p3}, 8, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // definition: mean of the three pairwise CDs
  PointCloud b = random_cloud(rng, 20);
  PointCloud c = random_cloud(rng, 20);
  const double expect = (cd_at_k(a, b, 32, mix_seed(7, 0, 1)) +
                         cd_at_k(a, c, 32, mix_seed(7, 0, 2)) +
                         cd_at_k(b, c, 32, mix_seed(7, 1, 2))) /
                        3.0;
  CHECK(variability({a, b, c}, 32, 7) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("metrics are invariant to point permutation") {
  Rng rng(59);
  PointCloud a = random_cloud(rng, 33);
  PointCloud b = random_cloud(rng, 44);
  std::vector<int64_t> perm(33);
  for (int64_t i = 0; i < 33; ++i) perm[size_t(i)] = i;
  for (int64_t i = 32; i > 0; --i)
    std::swap(perm[size_t(i)], perm[size_t(rng.below(uint64_t(i + 1)))]);
  const PointCloud ap = a.permuted(perm);
  CHECK(chamfer(ap, b) == doctest::Approx(chamfer(a, b)).epsilon(1e-15));
  CHECK(psnr(b, ap) == doctest::Approx(psnr(b, a)).epsilon(1e-12));
  // subsampled metrics: exact invariance needs k >= n (no-op subsample)
  CHECK(fscore(ap, b, 0.2, 64, 5) == doctest::Approx(fscore(a, b, 0.2, 64, 5)));
}

TEST_CASE("eval report aggregates unweighted means and writes csv") {
  EvalReport rep;
  rep.k = 256;
  rep.rows.push_back({0, "sphere", 0.1, 0.2, 0.5, 10.0, std::nullopt});
  rep.rows.push_back({1, "torus", 0.3, 0.4, 0.7, 20.0, 0.5});
  const EvalRow agg = rep.aggregate();
  CHECK(agg.cd_full == doctest::Approx(0.2));
  CHECK(agg.cd_at_k == doctest::Approx(0.3));
  CHECK(agg.fscore == doctest::Approx(0.6));
  CHECK(agg.psnr == doctest::Approx(15.0));
  REQUIRE(agg.variability.has_value());
  CHECK(*agg.variability == doctest::Approx(0.5));

  const std::string path = "eval_report_test.csv";
  rep.save_csv(path, "cfg123", "ckpt456");
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line.find("config_hash=cfg123") != std::string::npos);
  CHECK(line.find("checkpoint_hash=ckpt456") != std::string::npos);
  std::getline(f, line);
  CHECK(line.find("cd_at_256") != std::string::npos);
}
