#pragma once

#include "pcdiff/shapes.hpp"
#include "pcdiff/tensor.hpp"

namespace pcdiff {

// Conditioning tokens handed to the denoiser: a fixed-size encoding of a
// partial observation of the target surface. Token count never depends on
// the generation resolution. The time token is appended by the model.
struct Condition {
  Tensor tokens;  // (obs_points + 1) x d
  bool null_flag = false;  // substitute the learned unconditional embedding
};

// Shared pointwise MLP (6 -> d -> d) plus one mean-pooled global token.
// Trained jointly with the denoiser, so the weights live with the model's
// parameter set.
struct CondEncoderParams {
  Tensor w1, b1;  // 6 x d, 1 x d
  Tensor w2, b2;  // d x d, 1 x d

  void init(int64_t d, Rng& rng, double stddev = 0.02);
  int64_t width() const { return w1.cols(); }
};

// Point tokens followed by the pooled token: (rows(obs) + 1) x d.
Tensor encode_observation(const PointCloud& obs, const CondEncoderParams& enc);

// Observation draw + encoding. `obs_points` fixed by the model config.
Condition make_condition(const ShapeSpec& spec, Rng& rng,
                         const CondEncoderParams& enc,
                         const StandardizeTransform& tf, int64_t obs_points);

}  // namespace pcdiff
