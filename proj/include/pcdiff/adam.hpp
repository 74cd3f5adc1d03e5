#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcdiff/tensor.hpp"

namespace pcdiff {

// Named handle to a trainable tensor. Parameter order is fixed by the
// owning model and shared by the optimizer and the checkpoint format.
struct ParamRef {
  std::string name;
  Tensor* tensor = nullptr;
};

struct AdamState {
  double lr = 1.25e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double weight_decay = 0.01;
  double eps = 1e-8;
  int64_t step = 0;
  // Moment buffers aligned with the parameter list; allocated lazily on
  // the first step so a fresh state serializes compactly.
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One decoupled-weight-decay Adam update over `params`, consuming the
// gradients accumulated in each tensor. Throws if a gradient is missing
// or non-finite, naming the parameter.
void adam_step(std::vector<ParamRef>& params, AdamState& state);

}  // namespace pcdiff
