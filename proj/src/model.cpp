#include "pcdiff/model.hpp"

#include <cmath>

#include "pcdiff/flops.hpp"

namespace pcdiff {

void DenoiserConfig::validate() const {
  PCD_CHECK_CFG(L >= 1, "config: L must be >= 1, got ", L);
  PCD_CHECK_CFG(H >= 1, "config: H must be >= 1, got ", H);
  PCD_CHECK_CFG(m_init >= 1, "config: m_init must be >= 1, got ", m_init);
  PCD_CHECK_CFG(heads >= 1 && d % heads == 0, "config: d=", d,
                " not divisible by heads=", heads);
  PCD_CHECK_CFG(d % 2 == 0, "config: d must be even for the time embedding");
  PCD_CHECK_CFG(cond_tokens >= 3, "config: cond_tokens must be >= 3, got ",
                cond_tokens);
  PCD_CHECK_CFG(T >= 1, "config: T must be >= 1");
  if (restricted_read_cap)
    PCD_CHECK_CFG(*restricted_read_cap >= 1, "config: restricted_read_cap ",
                  *restricted_read_cap, " must be >= 1");
}

DenoiserConfig DenoiserConfig::desk() {
  DenoiserConfig c;
  c.L = 3;
  c.H = 2;
  c.d = 64;
  c.m_init = 32;
  c.heads = 2;
  c.cond_tokens = 66;
  return c;
}

DenoiserConfig DenoiserConfig::paper() {
  DenoiserConfig c;
  c.L = 6;
  c.H = 4;
  c.d = 256;
  c.m_init = 256;
  c.heads = 4;
  c.cond_tokens = 198;
  return c;
}

std::vector<double> sinusoidal_time_features(double t, int64_t d) {
  std::vector<double> out(size_t(d), 0.0);
  const int64_t half = d / 2;
  for (int64_t i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
    out[size_t(2 * i)] = std::sin(t * freq);
    out[size_t(2 * i + 1)] = std::cos(t * freq);
  }
  return out;
}

// ---- shared block helpers ---------------------------------------------------

Tensor residual_attn(const Tensor& q_stream, const Tensor& kv,
                     const AttnBlockParams& p, int64_t heads,
                     const std::vector<uint8_t>* key_keep) {
  const Tensor q = layer_norm(q_stream, p.norm.gain, p.norm.bias);
  const Tensor a = multihead_attention(q, kv, kv, p.attn, heads, key_keep);
  return add(q_stream, a);
}

// Self-attention flavor: keys/values from the normed stream itself.
static Tensor residual_self_attn(const Tensor& s, const AttnBlockParams& p,
                                 int64_t heads) {
  const Tensor q = layer_norm(s, p.norm.gain, p.norm.bias);
  const Tensor a = multihead_attention(q, q, q, p.attn, heads, nullptr);
  return add(s, a);
}

Tensor residual_mlp(const Tensor& x, const AttnBlockParams& p) {
  const Tensor h = layer_norm(x, p.mlp_norm.gain, p.mlp_norm.bias);
  const Tensor u = gelu(add_rowvec(matmul(h, p.mlp.w1), p.mlp.b1));
  return add(x, add_rowvec(matmul(u, p.mlp.w2), p.mlp.b2));
}

static Tensor ones_param(int64_t d) {
  std::vector<double> v(size_t(d), 1.0);
  return Tensor::row(std::move(v), true);
}

static void init_layer_norm(LayerNormParams& p, int64_t d) {
  p.gain = ones_param(d);
  p.bias = Tensor::zeros(1, d, true);
}

void init_attn_block(AttnBlockParams& p, int64_t d, Rng& rng, double stddev,
                     bool zero_residual_out) {
  p.norm.gain = ones_param(d);
  p.norm.bias = Tensor::zeros(1, d, true);
  p.attn.wq = Tensor::randn(rng, d, d, stddev, true);
  p.attn.bq = Tensor::zeros(1, d, true);
  p.attn.wk = Tensor::randn(rng, d, d, stddev, true);
  p.attn.bk = Tensor::zeros(1, d, true);
  p.attn.wv = Tensor::randn(rng, d, d, stddev, true);
  p.attn.bv = Tensor::zeros(1, d, true);
  p.attn.wo = zero_residual_out ? Tensor::zeros(d, d, true)
                                : Tensor::randn(rng, d, d, stddev, true);
  p.attn.bo = Tensor::zeros(1, d, true);
  p.mlp_norm.gain = ones_param(d);
  p.mlp_norm.bias = Tensor::zeros(1, d, true);
  p.mlp.w1 = Tensor::randn(rng, d, 4 * d, stddev, true);
  p.mlp.b1 = Tensor::zeros(1, 4 * d, true);
  p.mlp.w2 = zero_residual_out ? Tensor::zeros(4 * d, d, true)
                               : Tensor::randn(rng, 4 * d, d, stddev, true);
  p.mlp.b2 = Tensor::zeros(1, d, true);
}

void collect_attn_block(const std::string& prefix, AttnBlockParams& p,
                        std::vector<ParamRef>& out) {
  out.push_back({prefix + ".norm.gain", &p.norm.gain});
  out.push_back({prefix + ".norm.bias", &p.norm.bias});
  out.push_back({prefix + ".attn.wq", &p.attn.wq});
  out.push_back({prefix + ".attn.bq", &p.attn.bq});
  out.push_back({prefix + ".attn.wk", &p.attn.wk});
  out.push_back({prefix + ".attn.bk", &p.attn.bk});
  out.push_back({prefix + ".attn.wv", &p.attn.wv});
  out.push_back({prefix + ".attn.bv", &p.attn.bv});
  out.push_back({prefix + ".attn.wo", &p.attn.wo});
  out.push_back({prefix + ".attn.bo", &p.attn.bo});
  out.push_back({prefix + ".mlp_norm.gain", &p.mlp_norm.gain});
  out.push_back({prefix + ".mlp_norm.bias", &p.mlp_norm.bias});
  out.push_back({prefix + ".mlp.w1", &p.mlp.w1});
  out.push_back({prefix + ".mlp.b1", &p.mlp.b1});
  out.push_back({prefix + ".mlp.w2", &p.mlp.w2});
  out.push_back({prefix + ".mlp.b2", &p.mlp.b2});
}

// ---- TwoStreamDenoiser ------------------------------------------------------

TwoStreamDenoiser::TwoStreamDenoiser(const DenoiserConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
}

void TwoStreamDenoiser::init(Rng& rng) {
  const int64_t d = cfg_.d;
  const double stddev = 0.02;
  auto& p = params_;
  p.embed_w = Tensor::randn(rng, 6, d, stddev, true);
  p.embed_b = Tensor::zeros(1, d, true);
  p.z_init = Tensor::randn(rng, cfg_.m_init, d, stddev, true);
  p.null_cond = Tensor::randn(rng, cfg_.encoder_tokens(), d, stddev, true);
  init_layer_norm(p.selfcond_norm, d);
  p.selfcond_w = Tensor::zeros(d, d, true);
  p.selfcond_b = Tensor::zeros(1, d, true);
  p.time_mlp.w1 = Tensor::randn(rng, d, 4 * d, stddev, true);
  p.time_mlp.b1 = Tensor::zeros(1, 4 * d, true);
  p.time_mlp.w2 = Tensor::randn(rng, 4 * d, d, stddev, true);
  p.time_mlp.b2 = Tensor::zeros(1, d, true);
  p.blocks.resize(size_t(cfg_.L));
  for (auto& blk : p.blocks) {
    init_attn_block(blk.read, d, rng, stddev, true);
    blk.latent.resize(size_t(cfg_.H));
    for (auto& lyr : blk.latent) init_attn_block(lyr, d, rng, stddev, true);
    init_attn_block(blk.write, d, rng, stddev, true);
  }
  init_layer_norm(p.out_norm, d);
  p.out_w = Tensor::zeros(d, 6, true);
  p.out_b = Tensor::zeros(1, 6, true);
  p.encoder.init(d, rng, stddev);
}

void TwoStreamDenoiser::init_random(Rng& rng, double stddev) {
  init(rng);
  auto refs = collect();
  for (auto& r : refs) {
    auto& data = r.tensor->data_mut();
    for (auto& v : data) v = rng.normal() * stddev;
  }
}

std::vector<ParamRef> TwoStreamDenoiser::collect() {
  std::vector<ParamRef> out;
  auto& p = params_;
  out.push_back({"embed.w", &p.embed_w});
  out.push_back({"embed.b", &p.embed_b});
  out.push_back({"z_init", &p.z_init});
  out.push_back({"null_cond", &p.null_cond});
  out.push_back({"selfcond.norm.gain", &p.selfcond_norm.gain});
  out.push_back({"selfcond.norm.bias", &p.selfcond_norm.bias});
  out.push_back({"selfcond.w", &p.selfcond_w});
  out.push_back({"selfcond.b", &p.selfcond_b});
  out.push_back({"time_mlp.w1", &p.time_mlp.w1});
  out.push_back({"time_mlp.b1", &p.time_mlp.b1});
  out.push_back({"time_mlp.w2", &p.time_mlp.w2});
  out.push_back({"time_mlp.b2", &p.time_mlp.b2});
  for (size_t l = 0; l < p.blocks.size(); ++l) {
    const std::string base = "blocks." + std::to_string(l);
    collect_attn_block(base + ".read", p.blocks[l].read, out);
    for (size_t h = 0; h < p.blocks[l].latent.size(); ++h)
      collect_attn_block(base + ".latent." + std::to_string(h),
                         p.blocks[l].latent[h], out);
    collect_attn_block(base + ".write", p.blocks[l].write, out);
  }
  out.push_back({"out.norm.gain", &p.out_norm.gain});
  out.push_back({"out.norm.bias", &p.out_norm.bias});
  out.push_back({"out.w", &p.out_w});
  out.push_back({"out.b", &p.out_b});
  out.push_back({"encoder.w1", &p.encoder.w1});
  out.push_back({"encoder.b1", &p.encoder.b1});
  out.push_back({"encoder.w2", &p.encoder.w2});
  out.push_back({"encoder.b2", &p.encoder.b2});
  return out;
}

int64_t TwoStreamDenoiser::param_count() const {
  int64_t n = 0;
  auto refs = const_cast<TwoStreamDenoiser*>(this)->collect();
  for (const auto& r : refs) n += r.tensor->numel();
  return n;
}

DataState TwoStreamDenoiser::embed_points(const Tensor& p_t) const {
  PCD_CHECK(p_t.rows() >= 1 && p_t.cols() == 6,
            "embed_points: expected nx6 input, got ", p_t.rows(), "x",
            p_t.cols());
  return add_rowvec(matmul(p_t, params_.embed_w), params_.embed_b);
}

Tensor TwoStreamDenoiser::time_embedding(double t) const {
  PCD_CHECK(t >= 0.0 && t <= double(cfg_.T), "time_embedding: t=", t,
            " outside [0, ", cfg_.T, "]");
  const Tensor sinus = Tensor::row(sinusoidal_time_features(t, cfg_.d));
  const Tensor h =
      gelu(add_rowvec(matmul(sinus, params_.time_mlp.w1), params_.time_mlp.b1));
  return add_rowvec(matmul(h, params_.time_mlp.w2), params_.time_mlp.b2);
}

LatentState TwoStreamDenoiser::read(const LatentState& z, const DataState& x,
                                    int64_t block) const {
  const auto& blk = params_.blocks[size_t(block)];
  std::vector<uint8_t> keep;
  const std::vector<uint8_t>* mask = nullptr;
  if (cfg_.restricted_read_cap) {
    const int64_t cap = *cfg_.restricted_read_cap;
    PCD_CHECK_CFG(cap <= x.rows(), "read: restricted_read_cap=", cap,
                  " exceeds n=", x.rows());
    keep.assign(size_t(x.rows()), 0);
    for (int64_t i = 0; i < cap; ++i) keep[size_t(i)] = 1;
    mask = &keep;
  }
  Tensor out = residual_attn(z, x, blk.read, cfg_.heads, mask);
  return residual_mlp(out, blk.read);
}

LatentState TwoStreamDenoiser::latent_process(const LatentState& z,
                                              int64_t block) const {
  Tensor cur = z;
  for (const auto& lyr : params_.blocks[size_t(block)].latent) {
    cur = residual_self_attn(cur, lyr, cfg_.heads);
    cur = residual_mlp(cur, lyr);
  }
  return cur;
}

DataState TwoStreamDenoiser::write(const DataState& x, const LatentState& z,
                                   int64_t block) const {
  const auto& blk = params_.blocks[size_t(block)];
  Tensor out = residual_attn(x, z, blk.write, cfg_.heads, nullptr);
  return residual_mlp(out, blk.write);
}

LatentState TwoStreamDenoiser::initial_latent(const Condition& cond,
                                              bool drop_cond,
                                              const Tensor* prev_latent,
                                              double t) const {
  const bool use_null = drop_cond || cond.null_flag;
  Tensor cond_tok = use_null ? params_.null_cond : cond.tokens;
  PCD_CHECK_CFG(cond_tok.rows() == cfg_.encoder_tokens() &&
                    cond_tok.cols() == cfg_.d,
                "denoise: condition tokens are ", cond_tok.rows(), "x",
                cond_tok.cols(), ", config expects ", cfg_.encoder_tokens(),
                "x", cfg_.d);

  // Self-conditioning adapter always runs; absent history means zeros, so
  // both paths share one graph shape.
  Tensor prev_slice;
  if (prev_latent) {
    PCD_CHECK_CFG(prev_latent->rows() == cfg_.latent_tokens() &&
                      prev_latent->cols() == cfg_.d,
                  "denoise: prev latent is ", prev_latent->rows(), "x",
                  prev_latent->cols(), ", expected ", cfg_.latent_tokens(),
                  "x", cfg_.d);
    prev_slice = slice_rows(*prev_latent, 0, cfg_.m_init);
  } else {
    prev_slice = Tensor::zeros(cfg_.m_init, cfg_.d);
  }
  const Tensor adapted = add_rowvec(
      matmul(layer_norm(prev_slice, params_.selfcond_norm.gain,
                        params_.selfcond_norm.bias),
             params_.selfcond_w),
      params_.selfcond_b);
  const Tensor z_base = add(params_.z_init, adapted);
  return concat_rows({z_base, cond_tok, time_embedding(t)});
}

DenoiseResult TwoStreamDenoiser::denoise(const Tensor& p_t, double t,
                                         const Condition& cond, bool drop_cond,
                                         const Tensor* prev_latent) const {
  DataState x = embed_points(p_t);
  LatentState z = initial_latent(cond, drop_cond, prev_latent, t);

  uint64_t latent_flops = 0;
  for (int64_t l = 0; l < cfg_.L; ++l) {
    z = read(z, x, l);
    const uint64_t before = flops::count();
    z = latent_process(z, l);
    latent_flops += flops::count() - before;
    x = write(x, z, l);
  }

  const Tensor head =
      layer_norm(x, params_.out_norm.gain, params_.out_norm.bias);
  DenoiseResult res;
  res.eps = add_rowvec(matmul(head, params_.out_w), params_.out_b);
  res.latent = z;
  res.latent_flops = latent_flops;
  return res;
}

}  // namespace pcdiff
