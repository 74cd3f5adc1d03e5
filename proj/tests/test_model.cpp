#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "pcdiff/model.hpp"
#include "pcdiff/vanilla.hpp"

using namespace pcdiff;
using pcdiff::testing::check_gradients;

namespace {

DenoiserConfig tiny_config() {
  DenoiserConfig cfg;
  cfg.L = 1;
  cfg.H = 1;
  cfg.d = 8;
  cfg.m_init = 4;
  cfg.heads = 2;
  cfg.cond_tokens = 4;  // 2 observation points + pooled + time
  cfg.T = 64;
  return cfg;
}

Condition random_condition(Rng& rng, const DenoiserConfig& cfg) {
  Condition c;
  c.tokens = Tensor::randn(rng, cfg.encoder_tokens(), cfg.d, 0.5);
  return c;
}

Tensor random_points(Rng& rng, int64_t n) {
  return Tensor::randn(rng, n, 6, 1.0);
}

std::vector<int64_t> random_perm(Rng& rng, int64_t n) {
  std::vector<int64_t> p(size_t(n), 0);
  for (int64_t i = 0; i < n; ++i) p[size_t(i)] = i;
  for (int64_t i = n - 1; i > 0; --i)
    std::swap(p[size_t(i)], p[size_t(rng.below(uint64_t(i + 1)))]);
  return p;
}

Tensor permute_rows(const Tensor& x, const std::vector<int64_t>& perm) {
  std::vector<double> out(size_t(x.numel()));
  const int64_t c = x.cols();
  for (int64_t i = 0; i < x.rows(); ++i)
    for (int64_t j = 0; j < c; ++j)
      out[size_t(i * c + j)] = x(perm[size_t(i)], j);
  return Tensor::from(std::move(out), x.rows(), c);
}

}  // namespace

TEST_CASE("config presets and validation") {
  const DenoiserConfig desk = DenoiserConfig::desk();
  CHECK(desk.L == 3);
  CHECK(desk.H == 2);
  CHECK(desk.d == 64);
  CHECK(desk.m_init == 32);
  CHECK(desk.heads == 2);
  CHECK(desk.latent_tokens() == 32 + 66);

  const DenoiserConfig paper = DenoiserConfig::paper();
  CHECK(paper.L == 6);
  CHECK(paper.H == 4);
  CHECK(paper.d == 256);
  CHECK(paper.m_init == 256);
  CHECK(paper.cond_tokens == 198);
  CHECK(paper.latent_tokens() == 454);

  DenoiserConfig bad = desk;
  bad.heads = 5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("embed_points is a pointwise map") {
  Rng rng(1);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init(rng);

  // zero projection: every row equals the bias
  auto& p = model.params();
  std::fill(p.embed_w.data_mut().begin(), p.embed_w.data_mut().end(), 0.0);
  for (int64_t j = 0; j < cfg.d; ++j) p.embed_b.data_mut()[size_t(j)] = 0.25 * double(j);
  const Tensor pts = random_points(rng, 5);
  const Tensor embedded = model.embed_points(pts);
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t j = 0; j < cfg.d; ++j)
      CHECK(embedded(i, j) == 0.25 * double(j));

  // pointwise: permuting rows permutes outputs; duplicates stay identical
  model.init_random(rng);
  const auto perm = random_perm(rng, 5);
  const Tensor a = model.embed_points(pts);
  const Tensor b = model.embed_points(permute_rows(pts, perm));
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t j = 0; j < cfg.d; ++j)
      CHECK(b(i, j) == a(perm[size_t(i)], j));

  std::vector<double> dup;
  for (int64_t i = 0; i < 5; ++i)
    for (int64_t c = 0; c < 6; ++c) dup.push_back(pts(0, c));
  const Tensor dup_embed = model.embed_points(Tensor::from(std::move(dup), 5, 6));
  for (int64_t i = 1; i < 5; ++i)
    for (int64_t j = 0; j < cfg.d; ++j)
      CHECK(dup_embed(i, j) == dup_embed(0, j));
}

TEST_CASE("time embedding: sinusoid layout, distinctness, determinism") {
  const auto feat = sinusoidal_time_features(0.0, 12);
  for (size_t i = 0; i < feat.size(); i += 2) {
    CHECK(feat[i] == 0.0);      // sin(0)
    CHECK(feat[i + 1] == 1.0);  // cos(0)
  }

  Rng rng(2);
  DenoiserConfig cfg = tiny_config();
  cfg.T = 1024;
  TwoStreamDenoiser model(cfg);
  model.init_random(rng);

  // exhaustive distinctness over the full desk range
  std::set<std::vector<double>> seen;
  for (int64_t t = 0; t <= 1024; ++t)
    seen.insert(sinusoidal_time_features(double(t), cfg.d));
  CHECK(int64_t(seen.size()) == 1025);

  const Tensor tok1 = model.time_embedding(17.0);
  const Tensor tok2 = model.time_embedding(17.0);
  CHECK(tok1.rows() == 1);
  CHECK(tok1.cols() == cfg.d);
  for (int64_t j = 0; j < cfg.d; ++j) CHECK(tok1(0, j) == tok2(0, j));

  CHECK_THROWS_AS(model.time_embedding(-1.0), Error);
  CHECK_THROWS_AS(model.time_embedding(double(cfg.T) + 1.0), Error);
}

TEST_CASE("read: shared keys, cap identity, permutation invariance") {
  Rng rng(3);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init_random(rng);
  const int64_t m = cfg.latent_tokens();

  const Tensor z = Tensor::randn(rng, m, cfg.d, 0.7);

  // all data rows identical: output independent of how many there are
  auto repeated = [&](int64_t n) {
    std::vector<double> v;
    std::vector<double> row(size_t(cfg.d));
    for (auto& r : row) r = rng.normal();
    for (int64_t i = 0; i < n; ++i) v.insert(v.end(), row.begin(), row.end());
    return Tensor::from(std::move(v), n, cfg.d);
  };
  Rng row_rng(10);
  std::vector<double> row(size_t(cfg.d));
  for (auto& r : row) r = row_rng.normal();
  auto stack = [&](int64_t n) {
    std::vector<double> v;
    for (int64_t i = 0; i < n; ++i) v.insert(v.end(), row.begin(), row.end());
    return Tensor::from(std::move(v), n, cfg.d);
  };
  const Tensor out3 = model.read(z, stack(3), 0);
  const Tensor out9 = model.read(z, stack(9), 0);
  for (int64_t i = 0; i < out3.numel(); ++i)
    CHECK(out3.data()[size_t(i)] ==
          doctest::Approx(out9.data()[size_t(i)]).epsilon(1e-12));

  // restricted cap equal to n is bitwise identical to no cap
  const Tensor x = Tensor::randn(rng, 7, cfg.d, 0.9);
  const Tensor unrestricted = model.read(z, x, 0);
  model.set_restricted_read_cap(7);
  const Tensor capped = model.read(z, x, 0);
  model.set_restricted_read_cap(std::nullopt);
  REQUIRE(capped.numel() == unrestricted.numel());
  for (int64_t i = 0; i < capped.numel(); ++i)
    CHECK(capped.data()[size_t(i)] == unrestricted.data()[size_t(i)]);

  // cap larger than n is a config error
  model.set_restricted_read_cap(8);
  CHECK_THROWS_AS(model.read(z, x, 0), ConfigError);
  model.set_restricted_read_cap(std::nullopt);

  // permuting the data rows leaves the read output unchanged
  const auto perm = random_perm(rng, 7);
  const Tensor out_perm = model.read(z, permute_rows(x, perm), 0);
  for (int64_t i = 0; i < out_perm.numel(); ++i)
    CHECK(out_perm.data()[size_t(i)] ==
          doctest::Approx(unrestricted.data()[size_t(i)]).epsilon(1e-12));

  // output keeps the latent shape regardless of n
  CHECK(out3.rows() == m);
  CHECK(out3.cols() == cfg.d);
}

TEST_CASE("latent_process: identity at zero residuals, n-independent cost") {
  Rng rng(4);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init(rng);  // residual branch outputs start at zero

  const int64_t m = cfg.latent_tokens();
  const Tensor z = Tensor::randn(rng, m, cfg.d, 0.8);
  const Tensor out = model.latent_process(z, 0);
  REQUIRE(out.numel() == z.numel());
  for (int64_t i = 0; i < z.numel(); ++i)
    CHECK(out.data()[size_t(i)] == z.data()[size_t(i)]);
}

TEST_CASE("latent-stage flops are identical across resolutions") {
  Rng rng(5);
  DenoiserConfig cfg = DenoiserConfig::desk();
  TwoStreamDenoiser model(cfg);
  model.init_random(rng);
  const Condition cond = random_condition(rng, cfg);

  NoGradGuard no_grad;
  uint64_t reference = 0;
  for (const int64_t n : {256, 1024, 4096}) {
    const DenoiseResult res =
        model.denoise(random_points(rng, n), 3.0, cond, false, nullptr);
    CHECK(res.latent_flops > 0);
    if (reference == 0)
      reference = res.latent_flops;
    else
      CHECK(res.latent_flops == reference);
  }
}

TEST_CASE("write: row-wise function of (x_i, z)") {
  Rng rng(6);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init_random(rng);
  const int64_t m = cfg.latent_tokens();
  const Tensor z = Tensor::randn(rng, m, cfg.d, 0.6);

  // identical rows of x produce identical output rows
  std::vector<double> v;
  std::vector<double> row(size_t(cfg.d));
  for (auto& r : row) r = rng.normal();
  for (int i = 0; i < 4; ++i) v.insert(v.end(), row.begin(), row.end());
  const Tensor dup = Tensor::from(std::move(v), 4, cfg.d);
  const Tensor out = model.write(dup, z, 0);
  for (int64_t i = 1; i < 4; ++i)
    for (int64_t j = 0; j < cfg.d; ++j)
      CHECK(out(i, j) == doctest::Approx(out(0, j)).epsilon(1e-14));

  // permutation equivariance
  const Tensor x = Tensor::randn(rng, 9, cfg.d, 0.9);
  const auto perm = random_perm(rng, 9);
  const Tensor a = model.write(x, z, 0);
  const Tensor b = model.write(permute_rows(x, perm), z, 0);
  for (int64_t i = 0; i < 9; ++i)
    for (int64_t j = 0; j < cfg.d; ++j)
      CHECK(b(i, j) == doctest::Approx(a(perm[size_t(i)], j)).epsilon(1e-12));
}

TEST_CASE("denoise: shape contract, latent size, zero-init head") {
  Rng rng(7);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init(rng);
  const Condition cond = random_condition(rng, cfg);

  NoGradGuard no_grad;
  for (const int64_t n : {1, 9, 64}) {
    const DenoiseResult res =
        model.denoise(random_points(rng, n), 2.0, cond, false, nullptr);
    CHECK(res.eps.rows() == n);
    CHECK(res.eps.cols() == 6);
    CHECK(res.latent.rows() == cfg.latent_tokens());
    CHECK(res.latent.cols() == cfg.d);
    // fresh model predicts exactly zero noise
    for (int64_t i = 0; i < res.eps.numel(); ++i)
      CHECK(res.eps.data()[size_t(i)] == 0.0);
  }

  Condition wrong;
  wrong.tokens = Tensor::zeros(cfg.encoder_tokens() + 1, cfg.d);
  CHECK_THROWS_AS(model.denoise(random_points(rng, 3), 2.0, wrong, false,
                                nullptr),
                  ConfigError);
}

TEST_CASE("denoise permutation equivariance") {
  Rng rng(8);
  const DenoiserConfig cfg = tiny_config();
  NoGradGuard no_grad;
  for (int trial = 0; trial < 10; ++trial) {
    TwoStreamDenoiser model(cfg);
    model.init_random(rng);
    const Condition cond = random_condition(rng, cfg);
    const int64_t n = 3 + int64_t(rng.below(30));
    const Tensor pts = random_points(rng, n);
    const auto perm = random_perm(rng, n);

    const Tensor base = model.denoise(pts, 5.0, cond, false, nullptr).eps;
    const Tensor permuted =
        model.denoise(permute_rows(pts, perm), 5.0, cond, false, nullptr).eps;
    double max_diff = 0.0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < 6; ++j)
        max_diff = std::max(max_diff,
                            std::abs(permuted(i, j) - base(perm[size_t(i)], j)));
    CHECK(max_diff < 1e-9);
  }
}

TEST_CASE("restricted read cap equal to n leaves denoise bitwise unchanged") {
  Rng rng(9);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init_random(rng);
  const Condition cond = random_condition(rng, cfg);
  const int64_t n = 12;
  const Tensor pts = random_points(rng, n);

  NoGradGuard no_grad;
  const Tensor base = model.denoise(pts, 3.0, cond, false, nullptr).eps;
  model.set_restricted_read_cap(n);
  const Tensor capped = model.denoise(pts, 3.0, cond, false, nullptr).eps;
  model.set_restricted_read_cap(std::nullopt);
  for (int64_t i = 0; i < base.numel(); ++i)
    CHECK(capped.data()[size_t(i)] == base.data()[size_t(i)]);
}

TEST_CASE("self-conditioning adapter wiring") {
  Rng rng(10);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init(rng);
  const Condition cond = random_condition(rng, cfg);
  const Tensor pts = random_points(rng, 5);

  NoGradGuard no_grad;
  const Tensor prev =
      Tensor::randn(rng, cfg.latent_tokens(), cfg.d, 1.0);
  // zero-initialized adapter: history does not change the output yet
  const Tensor without = model.denoise(pts, 2.0, cond, false, nullptr).eps;
  const Tensor with_prev = model.denoise(pts, 2.0, cond, false, &prev).eps;
  for (int64_t i = 0; i < without.numel(); ++i)
    CHECK(with_prev.data()[size_t(i)] == without.data()[size_t(i)]);

  // a non-zero adapter routes history into the latent
  model.init_random(rng);
  const Tensor a = model.denoise(pts, 2.0, cond, false, nullptr).eps;
  const Tensor b = model.denoise(pts, 2.0, cond, false, &prev).eps;
  double diff = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i)
    diff = std::max(diff, std::abs(a.data()[size_t(i)] - b.data()[size_t(i)]));
  CHECK(diff > 0.0);
}

TEST_CASE("null condition substitutes the learned embedding") {
  Rng rng(11);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init_random(rng);
  const Condition cond = random_condition(rng, cfg);
  const Tensor pts = random_points(rng, 4);

  NoGradGuard no_grad;
  const Tensor with_cond = model.denoise(pts, 1.0, cond, false, nullptr).eps;
  const Tensor dropped = model.denoise(pts, 1.0, cond, true, nullptr).eps;
  Condition null_cond = cond;
  null_cond.null_flag = true;
  const Tensor flagged = model.denoise(pts, 1.0, null_cond, false, nullptr).eps;

  double diff = 0.0;
  for (int64_t i = 0; i < with_cond.numel(); ++i)
    diff = std::max(diff, std::abs(with_cond.data()[size_t(i)] -
                                   dropped.data()[size_t(i)]));
  CHECK(diff > 0.0);
  for (int64_t i = 0; i < dropped.numel(); ++i)
    CHECK(flagged.data()[size_t(i)] == dropped.data()[size_t(i)]);
}

TEST_CASE("tiny end-to-end gradient check") {
  Rng rng(12);
  const DenoiserConfig cfg = tiny_config();
  TwoStreamDenoiser model(cfg);
  model.init_random(rng, 0.2);
  Condition cond;
  cond.tokens = Tensor::randn(rng, cfg.encoder_tokens(), cfg.d, 0.5, true);
  Tensor pts = Tensor::randn(rng, 3, 6, 1.0, true);
  Tensor prev = Tensor::randn(rng, cfg.latent_tokens(), cfg.d, 0.5, true);

  std::vector<Tensor*> leaves{&pts, &cond.tokens, &prev};
  auto refs = model.collect();
  for (auto& r : refs) leaves.push_back(r.tensor);

  auto res = check_gradients(
      [&] { return model.denoise(pts, 7.0, cond, false, &prev).eps; }, leaves,
      rng);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}

TEST_CASE("vanilla: shape, equivariance, parameter matching") {
  Rng rng(13);
  const DenoiserConfig cfg = tiny_config();
  VanillaDenoiser vanilla(cfg);
  vanilla.init_random(rng);
  const Condition cond = random_condition(rng, cfg);

  NoGradGuard no_grad;
  const int64_t n = 11;
  const Tensor pts = random_points(rng, n);
  const DenoiseResult res = vanilla.denoise(pts, 2.0, cond, false, nullptr);
  CHECK(res.eps.rows() == n);
  CHECK(res.eps.cols() == 6);
  CHECK_FALSE(res.latent.defined());

  const auto perm = random_perm(rng, n);
  const Tensor permuted =
      vanilla.denoise(permute_rows(pts, perm), 2.0, cond, false, nullptr).eps;
  double max_diff = 0.0;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < 6; ++j)
      max_diff = std::max(
          max_diff, std::abs(permuted(i, j) - res.eps(perm[size_t(i)], j)));
  CHECK(max_diff < 1e-9);

  TwoStreamDenoiser two(cfg);
  Rng rng2(14);
  two.init(rng2);
  const double ratio = double(vanilla.param_count()) / double(two.param_count());
  CHECK(ratio > 0.95);
  CHECK(ratio < 1.05);

  // matched layer count: 12 pre-norm blocks for the desk preset
  CHECK(VanillaDenoiser::matched_layers(DenoiserConfig::desk()) == 12);
}

TEST_CASE("vanilla tiny gradient check") {
  Rng rng(15);
  DenoiserConfig cfg = tiny_config();
  cfg.L = 1;
  cfg.H = 1;
  VanillaDenoiser model(cfg);
  model.init_random(rng, 0.2);
  Condition cond;
  cond.tokens = Tensor::randn(rng, cfg.encoder_tokens(), cfg.d, 0.5, true);
  Tensor pts = Tensor::randn(rng, 3, 6, 1.0, true);

  std::vector<Tensor*> leaves{&pts, &cond.tokens};
  auto refs = model.collect();
  for (auto& r : refs) leaves.push_back(r.tensor);
  auto res = check_gradients(
      [&] { return model.denoise(pts, 7.0, cond, false, nullptr).eps; },
      leaves, rng);
  CHECK_MESSAGE(res.max_rel_err < 1e-4, res.worst);
}
