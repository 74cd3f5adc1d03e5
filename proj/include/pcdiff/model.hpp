#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pcdiff/adam.hpp"
#include "pcdiff/condition.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

// The fixed-size latent stream (m x d) and the per-point data stream
// (n x d). The latent width never depends on the point count.
using LatentState = Tensor;
using DataState = Tensor;

struct DenoiserConfig {
  int64_t L = 3;        // two-stream blocks
  int64_t H = 2;        // latent transformer layers per block
  int64_t d = 64;       // token width
  int64_t m_init = 32;  // learned latent tokens
  int64_t heads = 2;
  // Condition tokens including the time token (66 desk: 64 observation
  // points + 1 pooled + 1 time; 198 paper: 197 encoder + 1 time).
  int64_t cond_tokens = 66;
  int64_t T = 1024;  // diffusion timesteps the time embedding accepts
  // When set, read attention sees only the first n_cap data tokens.
  std::optional<int64_t> restricted_read_cap;
  double self_cond_prob = 0.9;

  int64_t obs_points() const { return cond_tokens - 2; }
  int64_t encoder_tokens() const { return cond_tokens - 1; }
  int64_t latent_tokens() const { return m_init + cond_tokens; }

  void validate() const;

  static DenoiserConfig desk();
  static DenoiserConfig paper();
};

struct LayerNormParams {
  Tensor gain, bias;  // 1 x d
};

struct MlpParams {
  Tensor w1, b1;  // d x 4d
  Tensor w2, b2;  // 4d x d
};

// Pre-norm residual unit: x + Attn(LN(x), kv) then x + MLP(LN(x)).
struct AttnBlockParams {
  LayerNormParams norm;
  AttentionParams attn;
  LayerNormParams mlp_norm;
  MlpParams mlp;
};

struct TwoStreamBlockParams {
  AttnBlockParams read;
  std::vector<AttnBlockParams> latent;  // H layers
  AttnBlockParams write;
};

struct DenoiserParams {
  Tensor embed_w, embed_b;  // 6 -> d pointwise projection
  Tensor z_init;            // m_init x d learned latent
  Tensor null_cond;         // encoder_tokens x d unconditional embedding
  LayerNormParams selfcond_norm;
  Tensor selfcond_w, selfcond_b;  // d x d adapter, zero-initialized
  MlpParams time_mlp;             // on the sinusoidal time features
  std::vector<TwoStreamBlockParams> blocks;
  LayerNormParams out_norm;
  Tensor out_w, out_b;  // d -> 6 head, zero-initialized
  CondEncoderParams encoder;
};

struct DenoiseResult {
  Tensor eps;     // n x 6
  Tensor latent;  // m x d final latent, reusable for self-conditioning
  uint64_t latent_flops = 0;  // FLOPs spent in the latent stages
};

// Common surface shared by the two-stream model, the vanilla baseline
// and the test stubs; the diffusion ops are written against it.
class EpsDenoiser {
 public:
  virtual ~EpsDenoiser() = default;
  // drop_cond substitutes the learned unconditional embedding (CFG).
  virtual DenoiseResult denoise(const Tensor& p_t, double t,
                                const Condition& cond, bool drop_cond,
                                const Tensor* prev_latent) const = 0;
  virtual double self_cond_prob() const { return 0.0; }
  virtual bool has_latent() const { return false; }
};

// Sinusoidal features for a (possibly fractional) timestep: d/2
// frequencies, interleaved [sin, cos] so t = 0 maps to [0,1,0,1,...].
std::vector<double> sinusoidal_time_features(double t, int64_t d);

class TwoStreamDenoiser : public EpsDenoiser {
 public:
  explicit TwoStreamDenoiser(const DenoiserConfig& cfg);

  // Training initialization: projections N(0, 0.02^2); biases, residual
  // output projections, the output head and the self-conditioning adapter
  // start at zero so the fresh model predicts eps = 0.
  void init(Rng& rng);
  // Every tensor non-zero (property tests and benchmarks).
  void init_random(Rng& rng, double stddev = 0.05);

  const DenoiserConfig& config() const { return cfg_; }
  DenoiserParams& params() { return params_; }
  const DenoiserParams& params() const { return params_; }

  // Diagnostic mode (restricted-read analysis). Not thread-safe against
  // concurrent denoise calls; set it before evaluation fans out.
  void set_restricted_read_cap(std::optional<int64_t> cap) {
    cfg_.restricted_read_cap = cap;
  }

  std::vector<ParamRef> collect();
  int64_t param_count() const;

  // ---- stage ops (exposed for tests) ----
  DataState embed_points(const Tensor& p_t) const;
  Tensor time_embedding(double t) const;  // 1 x d
  LatentState read(const LatentState& z, const DataState& x,
                   int64_t block) const;
  LatentState latent_process(const LatentState& z, int64_t block) const;
  DataState write(const DataState& x, const LatentState& z,
                  int64_t block) const;

  DenoiseResult denoise(const Tensor& p_t, double t, const Condition& cond,
                        bool drop_cond, const Tensor* prev_latent) const override;
  double self_cond_prob() const override { return cfg_.self_cond_prob; }
  bool has_latent() const override { return true; }

 private:
  LatentState initial_latent(const Condition& cond, bool drop_cond,
                             const Tensor* prev_latent, double t) const;

  DenoiserConfig cfg_;
  DenoiserParams params_;
};

// Residual attention unit helpers shared with the vanilla baseline.
Tensor residual_attn(const Tensor& q_stream, const Tensor& kv,
                     const AttnBlockParams& p, int64_t heads,
                     const std::vector<uint8_t>* key_keep = nullptr);
Tensor residual_mlp(const Tensor& x, const AttnBlockParams& p);

void init_attn_block(AttnBlockParams& p, int64_t d, Rng& rng, double stddev,
                     bool zero_residual_out);
void collect_attn_block(const std::string& prefix, AttnBlockParams& p,
                        std::vector<ParamRef>& out);

}  // namespace pcdiff
