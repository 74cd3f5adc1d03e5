#include "pcdiff/adam.hpp"

#include <cmath>

#include "pcdiff/check.hpp"

namespace pcdiff {

void adam_step(std::vector<ParamRef>& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      const size_t n = size_t(params[i].tensor->numel());
      state.m[i].assign(n, 0.0);
      state.v[i].assign(n, 0.0);
    }
  }
  PCD_CHECK(state.m.size() == params.size(),
            "adam_step: state tracks ", state.m.size(), " tensors, got ",
            params.size());

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));

  for (size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i].tensor;
    // A parameter absent from this step's graph (dropped condition path,
    // unused embedding) contributes a zero gradient.
    static const std::vector<double> kEmpty;
    const auto& g = p.has_grad() ? p.grad() : kEmpty;
    PCD_CHECK(g.empty() || state.m[i].size() == g.size(),
              "adam_step: parameter '", params[i].name, "' changed size");
    auto& data = p.data_mut();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (size_t j = 0; j < data.size(); ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      PCD_CHECK(std::isfinite(gj), "adam_step: non-finite gradient in '",
                params[i].name, "' at element ", j);
      // Decoupled weight decay, applied before the moment update.
      data[j] -= state.lr * state.weight_decay * data[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      data[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace pcdiff
