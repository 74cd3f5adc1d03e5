#include "pcdiff/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <new>

#include "pcdiff/alloc_stats.hpp"
#include "pcdiff/diffusion.hpp"
#include "pcdiff/vanilla.hpp"

namespace pcdiff {

namespace {

struct BenchModel {
  std::unique_ptr<TwoStreamDenoiser> two_stream;
  std::unique_ptr<VanillaDenoiser> vanilla;
  EpsDenoiser& iface() {
    if (two_stream) return *two_stream;
    return *vanilla;
  }
  std::vector<ParamRef> collect() {
    return two_stream ? two_stream->collect() : vanilla->collect();
  }
};

BenchModel make_bench_model(const std::string& kind, const DenoiserConfig& cfg,
                            uint64_t seed) {
  BenchModel m;
  Rng rng(mix_seed(seed, 0x42454e43ULL));  // "BENC"
  if (kind == "two_stream") {
    m.two_stream = std::make_unique<TwoStreamDenoiser>(cfg);
    m.two_stream->init_random(rng, 0.02);
  } else if (kind == "vanilla") {
    m.vanilla = std::make_unique<VanillaDenoiser>(cfg);
    m.vanilla->init_random(rng, 0.02);
  } else {
    PCD_CHECK_CFG(false, "run_bench: unknown model kind '", kind, "'");
  }
  return m;
}

Condition synth_condition(const DenoiserConfig& cfg, Rng& rng) {
  Condition c;
  c.tokens = Tensor::randn(rng, cfg.encoder_tokens(), cfg.d, 1.0);
  return c;
}

PointCloud synth_cloud(int64_t n, Rng& rng) {
  PointCloud cloud(n);
  for (int64_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) cloud.at(i, k) = rng.normal();
    for (int k = 3; k < 6; ++k) cloud.at(i, k) = rng.uniform();
  }
  return cloud;
}

double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::vector<BenchRecord> run_bench(const std::vector<std::string>& kinds,
                                   const std::vector<std::string>& phases,
                                   const std::vector<int64_t>& resolutions,
                                   const BenchOptions& opts) {
  std::vector<BenchRecord> records;
  const NoiseSchedule sched = cosine_schedule(opts.cfg.T);

  for (const auto& kind : kinds)
    for (const auto& phase : phases)
      for (const int64_t n_test : resolutions) {
        BenchRecord rec;
        rec.kind = kind;
        rec.phase = phase;
        rec.n_test = n_test;
        const bool training = phase == "train";
        PCD_CHECK_CFG(training || phase == "inference",
                      "run_bench: unknown phase '", phase, "'");
        rec.n_used = (training && kind == "two_stream") ? opts.n_train_fixed
                                                        : n_test;
        try {
          BenchModel model = make_bench_model(kind, opts.cfg, opts.seed);
          Rng rng(mix_seed(opts.seed, uint64_t(n_test), training ? 1u : 0u));
          const Condition cond = synth_condition(opts.cfg, rng);
          const PointCloud cloud = synth_cloud(rec.n_used, rng);
          const double t_mid = double(opts.cfg.T) / 2.0;

          AdamState adam;
          auto params = model.collect();

          auto one_iter = [&]() {
            if (training) {
              for (auto& p : params) p.tensor->zero_grad();
              std::vector<double> eps(cloud.pts.size());
              for (auto& v : eps) v = rng.normal();
              const Tensor loss = denoising_loss_given(
                  model.iface(), cloud, opts.cfg.T / 2, eps, cond, sched,
                  false, model.iface().has_latent());
              backward(loss);
              adam_step(params, adam);
            } else {
              NoGradGuard no_grad;
              const DenoiseResult res = model.iface().denoise(
                  cloud.to_tensor(), t_mid, cond, false, nullptr);
              rec.latent_flops = res.latent_flops;
            }
          };

          for (int64_t i = 0; i < opts.warmup; ++i) one_iter();
          alloc_stats::reset_peak();
          const double start = now_ms();
          for (int64_t i = 0; i < opts.iters; ++i) one_iter();
          rec.ms = (now_ms() - start) / double(opts.iters);
          rec.peak_bytes = alloc_stats::peak_bytes();
        } catch (const std::bad_alloc&) {
          rec.capped = true;
        }
        records.push_back(std::move(rec));
      }
  return records;
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& n_ms) {
  PCD_CHECK(n_ms.size() >= 2, "fit_loglog_slope: needs at least 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [n, ms] : n_ms) {
    PCD_CHECK(n > 0 && ms > 0, "fit_loglog_slope: nonpositive sample");
    const double x = std::log(n), y = std::log(ms);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = double(n_ms.size());
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

double slope_for(const std::vector<BenchRecord>& records,
                 const std::string& kind, const std::string& phase) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : records)
    if (r.kind == kind && r.phase == phase && !r.capped)
      pts.push_back({double(r.n_test), r.ms});
  return fit_loglog_slope(pts);
}

void save_bench_csv(const std::vector<BenchRecord>& records,
                    const std::string& path, const std::string& config_hash) {
  std::ofstream f(path);
  PCD_CHECK(f.good(), "save_bench_csv: cannot write ", path);
  f << "# config_hash=" << config_hash << " checkpoint_hash=untrained\n";
  f << "kind,phase,n_test,n_used,ms,peak_bytes,latent_flops,capped\n";
  f.precision(12);
  for (const auto& r : records)
    f << r.kind << "," << r.phase << "," << r.n_test << "," << r.n_used << ","
      << r.ms << "," << r.peak_bytes << "," << r.latent_flops << ","
      << (r.capped ? 1 : 0) << "\n";
}

}  // namespace pcdiff
