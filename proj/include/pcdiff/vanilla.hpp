#pragma once

#include "pcdiff/model.hpp"

namespace pcdiff {

// Single-stream baseline: point tokens and condition tokens form one
// sequence processed by full self-attention, so cost grows quadratically
// in n and the attention statistics shift with resolution. Layer count is
// parameter-matched to the two-stream model built from the same config.
class VanillaDenoiser : public EpsDenoiser {
 public:
  explicit VanillaDenoiser(const DenoiserConfig& cfg);

  static int64_t matched_layers(const DenoiserConfig& cfg) {
    return cfg.L * (cfg.H + 2);
  }

  void init(Rng& rng);
  void init_random(Rng& rng, double stddev = 0.05);

  const DenoiserConfig& config() const { return cfg_; }
  std::vector<ParamRef> collect();
  int64_t param_count() const;

  DenoiseResult denoise(const Tensor& p_t, double t, const Condition& cond,
                        bool drop_cond, const Tensor* prev_latent) const override;

  CondEncoderParams& encoder() { return encoder_; }
  const CondEncoderParams& encoder() const { return encoder_; }

 private:
  DenoiserConfig cfg_;
  Tensor embed_w_, embed_b_;
  Tensor null_cond_;
  MlpParams time_mlp_;
  std::vector<AttnBlockParams> layers_;
  LayerNormParams out_norm_;
  Tensor out_w_, out_b_;
  CondEncoderParams encoder_;
};

}  // namespace pcdiff
