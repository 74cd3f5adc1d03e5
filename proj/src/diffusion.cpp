#include "pcdiff/diffusion.hpp"

#include <cmath>

namespace pcdiff {

PointCloud forward_diffuse(const PointCloud& p0, int64_t t,
                           const std::vector<double>& eps,
                           const NoiseSchedule& sched) {
  PCD_CHECK(t >= 0 && t <= sched.T, "forward_diffuse: t=", t, " outside [0, ",
            sched.T, "]");
  PCD_CHECK(eps.size() == p0.pts.size(), "forward_diffuse: noise size ",
            eps.size(), " does not match cloud size ", p0.pts.size());
  const double ab = sched.alpha_bar[size_t(t)];
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  PointCloud out(p0.size());
  for (size_t i = 0; i < p0.pts.size(); ++i)
    out.pts[i] = signal * p0.pts[i] + noise * eps[i];
  return out;
}

PointCloud invert_diffuse(const PointCloud& p_t, int64_t t,
                          const std::vector<double>& eps,
                          const NoiseSchedule& sched) {
  PCD_CHECK(t >= 0 && t <= sched.T, "invert_diffuse: t=", t, " outside [0, ",
            sched.T, "]");
  const double ab = sched.alpha_bar[size_t(t)];
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  PointCloud out(p_t.size());
  for (size_t i = 0; i < p_t.pts.size(); ++i)
    out.pts[i] = (p_t.pts[i] - noise * eps[i]) / signal;
  return out;
}

std::vector<double> cfg_combine(const std::vector<double>& eps_cond,
                                const std::vector<double>& eps_uncond,
                                double omega) {
  PCD_CHECK(eps_cond.size() == eps_uncond.size(),
            "cfg_combine: size mismatch ", eps_cond.size(), " vs ",
            eps_uncond.size());
  std::vector<double> out(eps_cond.size());
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = (1.0 + omega) * eps_cond[i] - omega * eps_uncond[i];
  return out;
}

Tensor denoising_loss_given(const EpsDenoiser& model, const PointCloud& p0,
                            int64_t t, const std::vector<double>& eps,
                            const Condition& cond, const NoiseSchedule& sched,
                            bool drop_cond, bool use_self_cond) {
  const PointCloud p_t = forward_diffuse(p0, t, eps, sched);
  const Tensor p_t_tensor = p_t.to_tensor();

  Tensor prev_latent;
  if (use_self_cond && model.has_latent()) {
    // First pass runs detached; its final latent conditions the pass that
    // carries gradients.
    NoGradGuard no_grad;
    prev_latent = model.denoise(p_t_tensor, double(t), cond, drop_cond, nullptr)
                      .latent;
  }
  const DenoiseResult res =
      model.denoise(p_t_tensor, double(t), cond, drop_cond,
                    prev_latent.defined() ? &prev_latent : nullptr);
  return mse_vs_const(res.eps, eps);
}

LossStats training_loss(const EpsDenoiser& model, const PointCloud& p0,
                        const Condition& cond, const NoiseSchedule& sched,
                        Rng& rng, const LossOptions& opts, int64_t batch_id) {
  LossStats stats;
  stats.t = 1 + int64_t(rng.below(uint64_t(sched.T)));
  std::vector<double> eps(p0.pts.size());
  for (auto& v : eps) v = rng.normal();
  stats.dropped_cond = rng.uniform() < opts.cond_dropout;
  stats.used_self_cond = opts.allow_self_cond &&
                         rng.uniform() < model.self_cond_prob();

  const Tensor loss =
      denoising_loss_given(model, p0, stats.t, eps, cond, sched,
                           stats.dropped_cond, stats.used_self_cond);
  stats.loss = loss.item();
  PCD_CHECK(std::isfinite(stats.loss), "training_loss: non-finite loss at t=",
            stats.t, ", batch item ", batch_id);
  backward(loss, opts.grad_scale);
  return stats;
}

}  // namespace pcdiff
