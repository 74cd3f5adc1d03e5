#include "pcdiff/vanilla.hpp"

namespace pcdiff {

VanillaDenoiser::VanillaDenoiser(const DenoiserConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

void VanillaDenoiser::init(Rng& rng) {
  const int64_t d = cfg_.d;
  const double stddev = 0.02;
  embed_w_ = Tensor::randn(rng, 6, d, stddev, true);
  embed_b_ = Tensor::zeros(1, d, true);
  null_cond_ = Tensor::randn(rng, cfg_.encoder_tokens(), d, stddev, true);
  time_mlp_.w1 = Tensor::randn(rng, d, 4 * d, stddev, true);
  time_mlp_.b1 = Tensor::zeros(1, 4 * d, true);
  time_mlp_.w2 = Tensor::randn(rng, 4 * d, d, stddev, true);
  time_mlp_.b2 = Tensor::zeros(1, d, true);
  layers_.resize(size_t(matched_layers(cfg_)));
  for (auto& lyr : layers_) init_attn_block(lyr, d, rng, stddev, true);
  out_norm_.gain = Tensor::row(std::vector<double>(size_t(d), 1.0), true);
  out_norm_.bias = Tensor::zeros(1, d, true);
  out_w_ = Tensor::zeros(d, 6, true);
  out_b_ = Tensor::zeros(1, 6, true);
  encoder_.init(d, rng, stddev);
}

void VanillaDenoiser::init_random(Rng& rng, double stddev) {
  init(rng);
  for (auto& r : collect()) {
    auto& data = r.tensor->data_mut();
    for (auto& v : data) v = rng.normal() * stddev;
  }
}

std::vector<ParamRef> VanillaDenoiser::collect() {
  std::vector<ParamRef> out;
  out.push_back({"embed.w", &embed_w_});
  out.push_back({"embed.b", &embed_b_});
  out.push_back({"null_cond", &null_cond_});
  out.push_back({"time_mlp.w1", &time_mlp_.w1});
  out.push_back({"time_mlp.b1", &time_mlp_.b1});
  out.push_back({"time_mlp.w2", &time_mlp_.w2});
  out.push_back({"time_mlp.b2", &time_mlp_.b2});
  for (size_t i = 0; i < layers_.size(); ++i)
    collect_attn_block("layers." + std::to_string(i), layers_[i], out);
  out.push_back({"out.norm.gain", &out_norm_.gain});
  out.push_back({"out.norm.bias", &out_norm_.bias});
  out.push_back({"out.w", &out_w_});
  out.push_back({"out.b", &out_b_});
  out.push_back({"encoder.w1", &encoder_.w1});
  out.push_back({"encoder.b1", &encoder_.b1});
  out.push_back({"encoder.w2", &encoder_.w2});
  out.push_back({"encoder.b2", &encoder_.b2});
  return out;
}

int64_t VanillaDenoiser::param_count() const {
  int64_t n = 0;
  for (const auto& r : const_cast<VanillaDenoiser*>(this)->collect())
    n += r.tensor->numel();
  return n;
}

DenoiseResult VanillaDenoiser::denoise(const Tensor& p_t, double t,
                                       const Condition& cond, bool drop_cond,
                                       const Tensor* /*prev_latent*/) const {
  PCD_CHECK(p_t.rows() >= 1 && p_t.cols() == 6,
            "vanilla denoise: expected nx6 input, got ", p_t.rows(), "x",
            p_t.cols());
  const int64_t n = p_t.rows();

  const bool use_null = drop_cond || cond.null_flag;
  Tensor cond_tok = use_null ? null_cond_ : cond.tokens;
  PCD_CHECK_CFG(cond_tok.rows() == cfg_.encoder_tokens() &&
                    cond_tok.cols() == cfg_.d,
                "vanilla denoise: condition tokens are ", cond_tok.rows(), "x",
                cond_tok.cols(), ", config expects ", cfg_.encoder_tokens(),
                "x", cfg_.d);
  PCD_CHECK(t >= 0.0 && t <= double(cfg_.T), "vanilla denoise: t=", t,
            " outside [0, ", cfg_.T, "]");

  const Tensor sinus = Tensor::row(sinusoidal_time_features(t, cfg_.d));
  const Tensor time_tok = add_rowvec(
      matmul(gelu(add_rowvec(matmul(sinus, time_mlp_.w1), time_mlp_.b1)),
             time_mlp_.w2),
      time_mlp_.b2);

  Tensor x = add_rowvec(matmul(p_t, embed_w_), embed_b_);
  Tensor seq = concat_rows({x, cond_tok, time_tok});
  for (const auto& lyr : layers_) {
    const Tensor normed = layer_norm(seq, lyr.norm.gain, lyr.norm.bias);
    seq = add(seq, multihead_attention(normed, normed, normed, lyr.attn,
                                       cfg_.heads, nullptr));
    seq = residual_mlp(seq, lyr);
  }

  const Tensor points = slice_rows(seq, 0, n);
  const Tensor head = layer_norm(points, out_norm_.gain, out_norm_.bias);
  DenoiseResult res;
  res.eps = add_rowvec(matmul(head, out_w_), out_b_);
  res.latent = Tensor();
  res.latent_flops = 0;
  return res;
}

}  // namespace pcdiff
