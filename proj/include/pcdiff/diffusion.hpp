#pragma once

#include "pcdiff/model.hpp"
#include "pcdiff/pointcloud.hpp"
#include "pcdiff/schedule.hpp"

namespace pcdiff {

// p_t = sqrt(ab_t) p0 + sqrt(1 - ab_t) eps, all 6 channels.
PointCloud forward_diffuse(const PointCloud& p0, int64_t t,
                           const std::vector<double>& eps,
                           const NoiseSchedule& sched);

// Exact inversion given the noise that was mixed in.
PointCloud invert_diffuse(const PointCloud& p_t, int64_t t,
                          const std::vector<double>& eps,
                          const NoiseSchedule& sched);

// (1 + omega) eps_cond - omega eps_uncond, elementwise.
std::vector<double> cfg_combine(const std::vector<double>& eps_cond,
                                const std::vector<double>& eps_uncond,
                                double omega);

// Denoising objective with every random draw pinned: mean squared error
// between eps and the model's prediction at (p_t(t, eps), t). This is the
// entry point property tests use; training_loss layers the sampling
// policy on top.
Tensor denoising_loss_given(const EpsDenoiser& model, const PointCloud& p0,
                            int64_t t, const std::vector<double>& eps,
                            const Condition& cond, const NoiseSchedule& sched,
                            bool drop_cond, bool use_self_cond);

struct LossOptions {
  double cond_dropout = 0.1;  // CFG null-condition probability
  bool allow_self_cond = true;
  double grad_scale = 1.0;  // 1/batch for gradient accumulation
};

struct LossStats {
  double loss = 0.0;
  int64_t t = 0;
  bool dropped_cond = false;
  bool used_self_cond = false;
};

// Full training objective for one sample: draws t ~ U[1, T], eps ~ N(0, I),
// the condition-dropout coin and the self-conditioning coin (in that
// order), runs backward, and accumulates scaled gradients into the
// model parameters. p0 is expected in standardized coordinates.
LossStats training_loss(const EpsDenoiser& model, const PointCloud& p0,
                        const Condition& cond, const NoiseSchedule& sched,
                        Rng& rng, const LossOptions& opts, int64_t batch_id);

}  // namespace pcdiff
