#include "pcdiff/sampler.hpp"

#include <cmath>
#include <fstream>

namespace pcdiff {

void SampleConfig::validate(const NoiseSchedule& sched) const {
  PCD_CHECK(n_test >= 1, "sample: n_test must be >= 1, got ", n_test);
  PCD_CHECK(steps >= 1, "sample: steps must be >= 1, got ", steps);
  PCD_CHECK(steps <= sched.T, "sample: steps=", steps, " exceeds T=", sched.T);
  PCD_CHECK(omega >= 0.0, "sample: omega must be >= 0, got ", omega);
  PCD_CHECK(churn >= 0.0, "sample: churn must be >= 0, got ", churn);
}

std::vector<double> karras_sigma_grid(const SampleConfig& cfg,
                                      const NoiseSchedule& sched) {
  const double smin = cfg.sigma_min > 0.0 ? cfg.sigma_min : sched.sigma_min();
  const double smax = cfg.sigma_max > 0.0 ? cfg.sigma_max : sched.sigma_max();
  PCD_CHECK(smin > 0.0 && smax > smin, "sample: bad sigma range [", smin, ", ",
            smax, "]");
  const int64_t N = cfg.steps;
  std::vector<double> sigmas(size_t(N) + 1, 0.0);
  if (N == 1) {
    sigmas[0] = smax;
    return sigmas;
  }
  const double inv_rho = 1.0 / cfg.rho;
  const double a = std::pow(smax, inv_rho);
  const double b = std::pow(smin, inv_rho);
  for (int64_t i = 0; i < N; ++i) {
    const double u = double(i) / double(N - 1);
    sigmas[size_t(i)] = std::pow(a + u * (b - a), cfg.rho);
  }
  return sigmas;
}

namespace {

// One guided model evaluation in VE coordinates x = p0 + sigma * eps.
struct EvalOut {
  std::vector<double> eps;
  Tensor latent;
};

EvalOut eval_model(const EpsDenoiser& model, const Condition& cond,
                   const SampleConfig& cfg, const NoiseSchedule& sched,
                   const std::vector<double>& x, int64_t n, double sigma,
                   const Tensor* prev_latent) {
  const double scale = 1.0 / std::sqrt(1.0 + sigma * sigma);
  std::vector<double> p_t(x.size());
  for (size_t i = 0; i < x.size(); ++i) p_t[i] = x[i] * scale;
  const double t = t_of_sigma(sched, sigma);
  const Tensor p_t_tensor = Tensor::from(std::move(p_t), n, 6);

  EvalOut out;
  const DenoiseResult cond_res =
      model.denoise(p_t_tensor, t, cond, false, prev_latent);
  out.latent = cond_res.latent;
  if (cfg.omega != 0.0) {
    const DenoiseResult unc_res =
        model.denoise(p_t_tensor, t, cond, true, prev_latent);
    out.eps = cfg_combine(cond_res.eps.data(), unc_res.eps.data(), cfg.omega);
  } else {
    out.eps = cond_res.eps.data();
  }
  return out;
}

double mean_row_norm(const std::vector<double>& eps, int64_t n) {
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double r = 0.0;
    for (int c = 0; c < 6; ++c) r += eps[size_t(i * 6 + c)] * eps[size_t(i * 6 + c)];
    acc += std::sqrt(r);
  }
  return acc / double(n);
}

}  // namespace

PointCloud sample(const EpsDenoiser& model, const Condition& cond,
                  const SampleConfig& cfg, const NoiseSchedule& sched) {
  cfg.validate(sched);
  NoGradGuard no_grad;
  Rng rng(mix_seed(cfg.seed, 0x53414d50ULL));  // "SAMP"

  const std::vector<double> sigmas = karras_sigma_grid(cfg, sched);
  const int64_t N = cfg.steps;
  const int64_t n = cfg.n_test;

  std::ofstream trace;
  if (!cfg.trace_path.empty()) {
    trace.open(cfg.trace_path);
    PCD_CHECK(trace.good(), "sample: cannot write trace to ", cfg.trace_path);
    trace << "step,sigma,mean_eps_norm\n";
    trace.precision(12);
  }

  // VE-space state x = p0 + sigma * eps; the model sees p_t = x / sqrt(1+s^2).
  std::vector<double> x(size_t(n) * 6);
  for (auto& v : x) v = sigmas[0] * rng.normal();

  Tensor carried_latent;  // main-sequence self-conditioning state
  const bool carry = cfg.self_cond && model.has_latent();

  for (int64_t i = 0; i < N; ++i) {
    const double sigma = sigmas[size_t(i)];
    const double sigma_next = sigmas[size_t(i) + 1];

    double sigma_hat = sigma;
    if (cfg.churn > 0.0) {
      const double gamma =
          std::min(cfg.churn / double(N), std::sqrt(2.0) - 1.0);
      sigma_hat = sigma * (1.0 + gamma);
      const double extra =
          std::sqrt(sigma_hat * sigma_hat - sigma * sigma) * cfg.churn_noise;
      for (auto& v : x) v += extra * rng.normal();
    }

    const Tensor* prev = carry && carried_latent.defined() ? &carried_latent
                                                           : nullptr;
    EvalOut main = eval_model(model, cond, cfg, sched, x, n, sigma_hat, prev);

    std::vector<double> x_next(x.size());
    for (size_t j = 0; j < x.size(); ++j)
      x_next[j] = x[j] + (sigma_next - sigma_hat) * main.eps[j];

    if (sigma_next > 0.0) {
      // Heun correction; reuses the latent from this step's first eval.
      const Tensor* corr_prev = carry ? &main.latent : nullptr;
      EvalOut corr = eval_model(model, cond, cfg, sched, x_next, n, sigma_next,
                                corr_prev);
      for (size_t j = 0; j < x.size(); ++j)
        x_next[j] = x[j] + (sigma_next - sigma_hat) * 0.5 *
                               (main.eps[j] + corr.eps[j]);
    }

    x = std::move(x_next);
    PCD_CHECK(all_finite(x), "sample: non-finite state after step ", i,
              " (sigma=", sigma_hat, ")");
    if (carry) carried_latent = main.latent;

    if (trace.is_open())
      trace << i << "," << sigma_hat << "," << mean_row_norm(main.eps, n)
            << "\n";
  }

  PointCloud out;
  out.pts = std::move(x);
  out.clamp_rgb();
  return out;
}

PointCloud mixture_sample(const EpsDenoiser& model, const Condition& cond,
                          int64_t k, const SampleConfig& cfg,
                          const NoiseSchedule& sched) {
  PCD_CHECK(k >= 1, "mixture_sample: k must be >= 1, got ", k);
  std::vector<PointCloud> parts;
  parts.reserve(size_t(k));
  for (int64_t j = 0; j < k; ++j) {
    SampleConfig run = cfg;
    // Run 0 keeps the base seed so k=1 reduces to a plain sample() call.
    if (j > 0) run.seed = mix_seed(cfg.seed, uint64_t(j), 0x4d4958ULL);
    run.trace_path.clear();
    parts.push_back(sample(model, cond, run, sched));
  }
  return concat(parts);
}

}  // namespace pcdiff
