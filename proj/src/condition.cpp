#include "pcdiff/condition.hpp"

namespace pcdiff {

void CondEncoderParams::init(int64_t d, Rng& rng, double stddev) {
  w1 = Tensor::randn(rng, 6, d, stddev, true);
  b1 = Tensor::zeros(1, d, true);
  w2 = Tensor::randn(rng, d, d, stddev, true);
  b2 = Tensor::zeros(1, d, true);
}

Tensor encode_observation(const PointCloud& obs, const CondEncoderParams& enc) {
  PCD_CHECK(obs.size() >= 1, "encode_observation: empty observation");
  const Tensor x = obs.to_tensor();
  const Tensor h = gelu(add_rowvec(matmul(x, enc.w1), enc.b1));
  const Tensor tokens = add_rowvec(matmul(h, enc.w2), enc.b2);
  return concat_rows({tokens, mean_rows(tokens)});
}

Condition make_condition(const ShapeSpec& spec, Rng& rng,
                         const CondEncoderParams& enc,
                         const StandardizeTransform& tf, int64_t obs_points) {
  const PointCloud obs = sample_observation(spec, obs_points, rng, tf);
  Condition c;
  c.tokens = encode_observation(obs, enc);
  return c;
}

}  // namespace pcdiff
