#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pcdiff/check.hpp"
#include "pcdiff/rng.hpp"

namespace pcdiff {

// Dense 2-D float64 tensor with reverse-mode autodiff. The tape is
// define-by-run: every op executed while grad mode is on records a node
// holding its inputs and a backward closure; backward() releases it.
// 1-D quantities are represented as 1 x d rows, scalars as 1 x 1.

struct TensorImpl;
using TensorImplPtr = std::shared_ptr<TensorImpl>;

bool grad_enabled();

// Disables tape recording in the enclosing scope (inference passes).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(int64_t rows, int64_t cols, bool requires_grad = false);
  static Tensor full(int64_t rows, int64_t cols, double value);
  static Tensor from(std::vector<double> data, int64_t rows, int64_t cols,
                     bool requires_grad = false);
  static Tensor randn(Rng& rng, int64_t rows, int64_t cols, double stddev,
                      bool requires_grad = false);
  // 1 x d row vector.
  static Tensor row(std::vector<double> v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  int64_t rows() const;
  int64_t cols() const;
  int64_t numel() const { return rows() * cols(); }
  std::array<int64_t, 2> shape() const { return {rows(), cols()}; }

  double operator()(int64_t i, int64_t j) const;
  double item() const;  // 1x1 only

  const std::vector<double>& data() const;
  std::vector<double>& data_mut();  // leaf mutation (optimizer updates)

  bool requires_grad() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Copy of the values with no history and no grad requirement.
  Tensor detach() const;
  Tensor clone() const;  // preserves requires_grad as a new leaf

  TensorImplPtr impl() const { return impl_; }

 private:
  explicit Tensor(TensorImplPtr impl) : impl_(std::move(impl)) {}
  TensorImplPtr impl_;

  friend Tensor make_tensor(TensorImplPtr);
};

Tensor make_tensor(TensorImplPtr impl);

// Runs reverse-mode accumulation from a scalar (1x1) root. `seed` scales
// the whole gradient (used for 1/batch averaging).
void backward(const Tensor& root, double seed = 1.0);

// ---- primitive ops -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& x, const Tensor& v);  // v: 1 x cols(x)
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);
Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1);
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);
Tensor concat_rows(const std::vector<Tensor>& xs);
Tensor concat_cols(const std::vector<Tensor>& xs);
Tensor mean_rows(const Tensor& x);  // 1 x d column-wise mean
// Scalar mean((pred - target)^2); target carries no grad.
Tensor mse_vs_const(const Tensor& pred, const std::vector<double>& target);
// Scalar sum(w .* x) against constant weights (gradient-check helper).
Tensor weighted_sum(const Tensor& x, const std::vector<double>& weights);

// ---- attention -----------------------------------------------------------

struct AttentionParams {
  Tensor wq, bq;  // d x d, 1 x d
  Tensor wk, bk;
  Tensor wv, bv;
  Tensor wo, bo;
};

// Scaled dot-product attention with `heads` heads over width d. Optional
// `key_keep` (size = rows of k/v): entries with 0 receive exactly zero
// attention weight, the rest renormalize.
Tensor multihead_attention(const Tensor& q_in, const Tensor& k_in,
                           const Tensor& v_in, const AttentionParams& p,
                           int64_t heads,
                           const std::vector<uint8_t>* key_keep = nullptr);

// ---- small utilities -----------------------------------------------------

bool all_finite(const std::vector<double>& v);

}  // namespace pcdiff
