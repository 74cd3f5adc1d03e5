#pragma once

#include <string>

#include "pcdiff/diffusion.hpp"

namespace pcdiff {

struct SampleConfig {
  int64_t n_test = 1024;
  int64_t steps = 64;
  double omega = 0.0;  // classifier-free guidance scale
  uint64_t seed = 0;
  // Stochasticity of the sampler (S_churn); 0 runs the deterministic
  // Heun trajectory from the seed noise.
  double churn = 0.0;
  double churn_noise = 1.0;  // S_noise
  bool self_cond = true;
  double rho = 7.0;
  // Negative values derive sigma bounds from the schedule endpoints.
  double sigma_min = -1.0;
  double sigma_max = -1.0;
  // When non-empty, writes one CSV row per step: step,sigma,mean_eps_norm.
  std::string trace_path;

  void validate(const NoiseSchedule& sched) const;
};

// Karras-style stochastic sampler (sigma-space reparameterization of the
// schedule, per-step churn, Heun second-order correction). Deterministic
// given (model parameters, cond, cfg).
PointCloud sample(const EpsDenoiser& model, const Condition& cond,
                  const SampleConfig& cfg, const NoiseSchedule& sched);

// k independent runs at cfg.n_test points each (seeds derived from
// cfg.seed), concatenated: the naive way to buy resolution.
PointCloud mixture_sample(const EpsDenoiser& model, const Condition& cond,
                          int64_t k, const SampleConfig& cfg,
                          const NoiseSchedule& sched);

// The sigma grid the sampler walks, highest first, with a trailing 0.
std::vector<double> karras_sigma_grid(const SampleConfig& cfg,
                                      const NoiseSchedule& sched);

}  // namespace pcdiff
