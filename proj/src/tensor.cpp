#include "pcdiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include "pcdiff/alloc_stats.hpp"
#include "pcdiff/check.hpp"
#include "pcdiff/flops.hpp"

#ifdef PCDIFF_WITH_CBLAS
#include <cblas.h>
#endif

#ifdef PCDIFF_WITH_OPENBLAS
extern "C" void openblas_set_num_threads(int);
#endif

namespace pcdiff {

namespace {
thread_local bool g_grad_enabled = true;

#ifdef PCDIFF_WITH_OPENBLAS
// Multi-threaded GEMM would make reductions non-deterministic run to run;
// everything here is sized for single-threaded kernels anyway.
const bool g_blas_single_thread = [] {
  openblas_set_num_threads(1);
  return true;
}();
#endif
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

struct TensorImpl {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until touched by backward()
  bool requires_grad = false;

  // Tape node: inputs and the closure that scatters this node's grad
  // into them. Empty for leaves and for tensors built under NoGrad.
  std::vector<TensorImplPtr> parents;
  std::function<void(const TensorImpl&)> backward_fn;

  TensorImpl(int64_t r, int64_t c) : rows(r), cols(c), data(size_t(r * c), 0.0) {
    alloc_stats::add(int64_t(data.size()) * 8);
  }
  ~TensorImpl() {
    alloc_stats::sub(int64_t(data.size()) * 8 + int64_t(grad.size()) * 8);
  }
  TensorImpl(const TensorImpl&) = delete;
  TensorImpl& operator=(const TensorImpl&) = delete;

  void ensure_grad() {
    if (grad.empty()) {
      grad.assign(data.size(), 0.0);
      alloc_stats::add(int64_t(grad.size()) * 8);
    }
  }
};

Tensor make_tensor(TensorImplPtr impl) { return Tensor(std::move(impl)); }

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

namespace {

TensorImplPtr new_impl(int64_t r, int64_t c) {
  PCD_CHECK(r >= 0 && c >= 0, "tensor: negative extent ", r, "x", c);
  return std::make_shared<TensorImpl>(r, c);
}

// Builds the output node; records the tape edge only when grad mode is on
// and some input needs gradients.
Tensor make_op_output(TensorImplPtr out, std::vector<TensorImplPtr> parents,
                      std::function<void(const TensorImpl&)> bwd) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || (p && p->requires_grad);
  if (needs && g_grad_enabled) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backward_fn = std::move(bwd);
  }
  return make_tensor(std::move(out));
}

// ---- GEMM kernel ----------------------------------------------------------
// C (MxN) = alpha * op(A) * op(B) + beta * C, row-major.
void gemm(bool ta, bool tb, int64_t M, int64_t N, int64_t K, double alpha,
          const double* A, int64_t lda, const double* B, int64_t ldb,
          double beta, double* C, int64_t ldc) {
#ifdef PCDIFF_WITH_CBLAS
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans,
              tb ? CblasTrans : CblasNoTrans, int(M), int(N), int(K), alpha, A,
              int(lda), B, int(ldb), beta, C, int(ldc));
#else
  if (beta == 0.0) {
    for (int64_t i = 0; i < M; ++i) std::fill(C + i * ldc, C + i * ldc + N, 0.0);
  } else if (beta != 1.0) {
    for (int64_t i = 0; i < M; ++i)
      for (int64_t j = 0; j < N; ++j) C[i * ldc + j] *= beta;
  }
  auto a_at = [&](int64_t i, int64_t k) { return ta ? A[k * lda + i] : A[i * lda + k]; };
  for (int64_t i = 0; i < M; ++i) {
    double* crow = C + i * ldc;
    for (int64_t k = 0; k < K; ++k) {
      const double aik = alpha * a_at(i, k);
      if (aik == 0.0) continue;
      if (!tb) {
        const double* brow = B + k * ldb;
        for (int64_t j = 0; j < N; ++j) crow[j] += aik * brow[j];
      } else {
        for (int64_t j = 0; j < N; ++j) crow[j] += aik * B[j * ldb + k];
      }
    }
  }
#endif
}

void accumulate(TensorImpl& dst, const std::vector<double>& src) {
  dst.ensure_grad();
  for (size_t i = 0; i < src.size(); ++i) dst.grad[i] += src[i];
}

}  // namespace

// ---- Tensor methods --------------------------------------------------------

Tensor Tensor::zeros(int64_t rows, int64_t cols, bool requires_grad) {
  auto impl = new_impl(rows, cols);
  impl->requires_grad = requires_grad;
  return make_tensor(std::move(impl));
}

Tensor Tensor::full(int64_t rows, int64_t cols, double value) {
  auto impl = new_impl(rows, cols);
  std::fill(impl->data.begin(), impl->data.end(), value);
  return make_tensor(std::move(impl));
}

Tensor Tensor::from(std::vector<double> data, int64_t rows, int64_t cols,
                    bool requires_grad) {
  PCD_CHECK(int64_t(data.size()) == rows * cols,
            "tensor: data length ", data.size(), " does not match shape ",
            rows, "x", cols);
  auto impl = new_impl(rows, cols);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return make_tensor(std::move(impl));
}

Tensor Tensor::randn(Rng& rng, int64_t rows, int64_t cols, double stddev,
                     bool requires_grad) {
  auto impl = new_impl(rows, cols);
  for (auto& v : impl->data) v = rng.normal() * stddev;
  impl->requires_grad = requires_grad;
  return make_tensor(std::move(impl));
}

Tensor Tensor::row(std::vector<double> v, bool requires_grad) {
  const int64_t d = int64_t(v.size());
  return from(std::move(v), 1, d, requires_grad);
}

int64_t Tensor::rows() const { return impl_ ? impl_->rows : 0; }
int64_t Tensor::cols() const { return impl_ ? impl_->cols : 0; }

double Tensor::operator()(int64_t i, int64_t j) const {
  return impl_->data[size_t(i * impl_->cols + j)];
}

double Tensor::item() const {
  PCD_CHECK(numel() == 1, "item(): tensor has ", numel(), " elements");
  return impl_->data[0];
}

const std::vector<double>& Tensor::data() const { return impl_->data; }
std::vector<double>& Tensor::data_mut() { return impl_->data; }

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  PCD_CHECK(has_grad(), "grad(): no gradient recorded");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_ && !impl_->grad.empty())
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto impl = new_impl(rows(), cols());
  impl->data = impl_->data;
  return make_tensor(std::move(impl));
}

Tensor Tensor::clone() const {
  auto impl = new_impl(rows(), cols());
  impl->data = impl_->data;
  impl->requires_grad = impl_->requires_grad;
  return make_tensor(std::move(impl));
}

// ---- backward --------------------------------------------------------------

void backward(const Tensor& root, double seed) {
  PCD_CHECK(root.defined() && root.numel() == 1,
            "backward(): root must be a scalar");
  TensorImplPtr r = root.impl();
  if (!r->requires_grad) return;

  // Depth-first topological order (iterative; tapes can be thousands
  // deep). The order holds shared ownership: releasing a node's parent
  // edges must not free impls that still await their backward call.
  std::vector<TensorImplPtr> order;
  std::unordered_set<TensorImpl*> seen;
  std::vector<std::pair<TensorImplPtr, size_t>> stack;
  stack.push_back({r, 0});
  seen.insert(r.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorImplPtr p = node->parents[idx++];
      if (p && p->requires_grad && !seen.count(p.get())) {
        seen.insert(p.get());
        stack.push_back({std::move(p), 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  r->ensure_grad();
  r->grad[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = it->get();
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    // Release the tape edges as we go; leaves keep their grads.
    node->backward_fn = nullptr;
    node->parents.clear();
  }
}

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  PCD_CHECK(a.defined() && b.defined(), "matmul: undefined input");
  PCD_CHECK(a.cols() == b.rows(), "matmul: inner dimensions mismatch: ",
            a.rows(), "x", a.cols(), " vs ", b.rows(), "x", b.cols());
  const int64_t M = a.rows(), K = a.cols(), N = b.cols();
  auto out = new_impl(M, N);
  gemm(false, false, M, N, K, 1.0, a.data().data(), K, b.data().data(), N, 0.0,
       out->data.data(), N);
  flops::add(uint64_t(2) * M * K * N);

  auto pa = a.impl(), pb = b.impl();
  return make_op_output(
      std::move(out), {pa, pb}, [pa, pb, M, K, N](const TensorImpl& self) {
        if (pa->requires_grad) {
          pa->ensure_grad();  // gA += G * B^T
          gemm(false, true, M, K, N, 1.0, self.grad.data(), N,
               pb->data.data(), N, 1.0, pa->grad.data(), K);
        }
        if (pb->requires_grad) {
          pb->ensure_grad();  // gB += A^T * G
          gemm(true, false, K, N, M, 1.0, pa->data.data(), K,
               self.grad.data(), N, 1.0, pb->grad.data(), N);
        }
      });
}

Tensor transpose(const Tensor& a) {
  const int64_t R = a.rows(), C = a.cols();
  auto out = new_impl(C, R);
  for (int64_t i = 0; i < R; ++i)
    for (int64_t j = 0; j < C; ++j) out->data[j * R + i] = a(i, j);
  auto pa = a.impl();
  return make_op_output(std::move(out), {pa}, [pa, R, C](const TensorImpl& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (int64_t i = 0; i < R; ++i)
      for (int64_t j = 0; j < C; ++j) pa->grad[i * C + j] += self.grad[j * R + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  PCD_CHECK(a.rows() == b.rows() && a.cols() == b.cols(),
            "add: shape mismatch: ", a.rows(), "x", a.cols(), " vs ", b.rows(),
            "x", b.cols());
  auto out = new_impl(a.rows(), a.cols());
  const auto& da = a.data();
  const auto& db = b.data();
  for (size_t i = 0; i < da.size(); ++i) out->data[i] = da[i] + db[i];
  flops::add(da.size());
  auto pa = a.impl(), pb = b.impl();
  return make_op_output(std::move(out), {pa, pb}, [pa, pb](const TensorImpl& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad);
    if (pb->requires_grad) accumulate(*pb, self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  PCD_CHECK(a.rows() == b.rows() && a.cols() == b.cols(),
            "sub: shape mismatch: ", a.rows(), "x", a.cols(), " vs ", b.rows(),
            "x", b.cols());
  auto out = new_impl(a.rows(), a.cols());
  const auto& da = a.data();
  const auto& db = b.data();
  for (size_t i = 0; i < da.size(); ++i) out->data[i] = da[i] - db[i];
  flops::add(da.size());
  auto pa = a.impl(), pb = b.impl();
  return make_op_output(std::move(out), {pa, pb}, [pa, pb](const TensorImpl& self) {
    if (pa->requires_grad) accumulate(*pa, self.grad);
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor add_rowvec(const Tensor& x, const Tensor& v) {
  PCD_CHECK(v.rows() == 1 && v.cols() == x.cols(),
            "add_rowvec: expected 1x", x.cols(), ", got ", v.rows(), "x",
            v.cols());
  const int64_t R = x.rows(), C = x.cols();
  auto out = new_impl(R, C);
  const auto& dx = x.data();
  const auto& dv = v.data();
  for (int64_t i = 0; i < R; ++i)
    for (int64_t j = 0; j < C; ++j) out->data[i * C + j] = dx[i * C + j] + dv[j];
  flops::add(uint64_t(R) * C);
  auto px = x.impl(), pv = v.impl();
  return make_op_output(std::move(out), {px, pv}, [px, pv, R, C](const TensorImpl& self) {
    if (px->requires_grad) accumulate(*px, self.grad);
    if (pv->requires_grad) {
      pv->ensure_grad();
      for (int64_t i = 0; i < R; ++i)
        for (int64_t j = 0; j < C; ++j) pv->grad[j] += self.grad[i * C + j];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  auto out = new_impl(a.rows(), a.cols());
  const auto& da = a.data();
  for (size_t i = 0; i < da.size(); ++i) out->data[i] = da[i] * s;
  flops::add(da.size());
  auto pa = a.impl();
  return make_op_output(std::move(out), {pa}, [pa, s](const TensorImpl& self) {
    if (!pa->requires_grad) return;
    pa->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += s * self.grad[i];
  });
}

Tensor gelu(const Tensor& x) {
  auto out = new_impl(x.rows(), x.cols());
  const auto& dx = x.data();
  for (size_t i = 0; i < dx.size(); ++i)
    out->data[i] = 0.5 * dx[i] * (1.0 + std::erf(dx[i] * kInvSqrt2));
  flops::add(8 * dx.size());
  auto px = x.impl();
  return make_op_output(std::move(out), {px}, [px](const TensorImpl& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const double v = px->data[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      px->grad[i] += self.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor softmax_rows(const Tensor& x) {
  const int64_t R = x.rows(), C = x.cols();
  PCD_CHECK(C >= 1, "softmax: empty rows");
  auto out = new_impl(R, C);
  const auto& dx = x.data();
  for (int64_t i = 0; i < R; ++i) {
    const double* r = dx.data() + i * C;
    double mx = -std::numeric_limits<double>::infinity();
    for (int64_t j = 0; j < C; ++j) {
      PCD_CHECK(!std::isnan(r[j]), "softmax: NaN input at row ", i);
      mx = std::max(mx, r[j]);
    }
    PCD_CHECK(mx > -std::numeric_limits<double>::infinity(),
              "softmax: all entries of row ", i, " are masked");
    double sum = 0.0;
    for (int64_t j = 0; j < C; ++j) {
      const double e = std::exp(r[j] - mx);
      out->data[i * C + j] = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int64_t j = 0; j < C; ++j) out->data[i * C + j] *= inv;
  }
  flops::add(uint64_t(5) * R * C);
  auto px = x.impl();
  return make_op_output(std::move(out), {px}, [px, R, C](const TensorImpl& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (int64_t i = 0; i < R; ++i) {
      const double* y = self.data.data() + i * C;
      const double* g = self.grad.data() + i * C;
      double dot = 0.0;
      for (int64_t j = 0; j < C; ++j) dot += y[j] * g[j];
      double* gx = px->grad.data() + i * C;
      for (int64_t j = 0; j < C; ++j) gx[j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  const int64_t R = x.rows(), C = x.cols();
  PCD_CHECK(C >= 2, "layer_norm: needs width >= 2, got ", C);
  PCD_CHECK(gain.rows() == 1 && gain.cols() == C && bias.rows() == 1 &&
                bias.cols() == C,
            "layer_norm: gain/bias must be 1x", C);
  auto out = new_impl(R, C);
  std::vector<double> inv_std(size_t(R), 0.0);
  std::vector<double> xhat(size_t(R * C), 0.0);
  const auto& dx = x.data();
  const auto& dg = gain.data();
  const auto& db = bias.data();
  for (int64_t i = 0; i < R; ++i) {
    const double* r = dx.data() + i * C;
    double mean = 0.0;
    for (int64_t j = 0; j < C; ++j) mean += r[j];
    mean /= double(C);
    double var = 0.0;
    for (int64_t j = 0; j < C; ++j) {
      const double c = r[j] - mean;
      var += c * c;
    }
    var /= double(C);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[size_t(i)] = is;
    for (int64_t j = 0; j < C; ++j) {
      const double h = (r[j] - mean) * is;
      xhat[size_t(i * C + j)] = h;
      out->data[i * C + j] = h * dg[j] + db[j];
    }
  }
  flops::add(uint64_t(8) * R * C);
  auto px = x.impl(), pg = gain.impl(), pb = bias.impl();
  return make_op_output(
      std::move(out), {px, pg, pb},
      [px, pg, pb, R, C, inv_std = std::move(inv_std),
       xhat = std::move(xhat)](const TensorImpl& self) {
        const auto& g = self.grad;
        if (pg->requires_grad) {
          pg->ensure_grad();
          for (int64_t i = 0; i < R; ++i)
            for (int64_t j = 0; j < C; ++j)
              pg->grad[j] += g[i * C + j] * xhat[size_t(i * C + j)];
        }
        if (pb->requires_grad) {
          pb->ensure_grad();
          for (int64_t i = 0; i < R; ++i)
            for (int64_t j = 0; j < C; ++j) pb->grad[j] += g[i * C + j];
        }
        if (px->requires_grad) {
          px->ensure_grad();
          const auto& dg = pg->data;
          for (int64_t i = 0; i < R; ++i) {
            double mean_dy = 0.0, mean_dyx = 0.0;
            for (int64_t j = 0; j < C; ++j) {
              const double dy = g[i * C + j] * dg[j];
              mean_dy += dy;
              mean_dyx += dy * xhat[size_t(i * C + j)];
            }
            mean_dy /= double(C);
            mean_dyx /= double(C);
            const double is = inv_std[size_t(i)];
            for (int64_t j = 0; j < C; ++j) {
              const double dy = g[i * C + j] * dg[j];
              px->grad[i * C + j] +=
                  is * (dy - mean_dy - xhat[size_t(i * C + j)] * mean_dyx);
            }
          }
        }
      });
}

Tensor slice_rows(const Tensor& x, int64_t r0, int64_t r1) {
  PCD_CHECK(0 <= r0 && r0 <= r1 && r1 <= x.rows(), "slice_rows: bad range [",
            r0, ",", r1, ") for ", x.rows(), " rows");
  const int64_t C = x.cols();
  auto out = new_impl(r1 - r0, C);
  std::copy(x.data().begin() + r0 * C, x.data().begin() + r1 * C,
            out->data.begin());
  auto px = x.impl();
  return make_op_output(std::move(out), {px}, [px, r0, C](const TensorImpl& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      px->grad[size_t(r0 * C) + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
  PCD_CHECK(0 <= c0 && c0 <= c1 && c1 <= x.cols(), "slice_cols: bad range [",
            c0, ",", c1, ") for ", x.cols(), " cols");
  const int64_t R = x.rows(), C = x.cols(), W = c1 - c0;
  auto out = new_impl(R, W);
  for (int64_t i = 0; i < R; ++i)
    std::copy(x.data().begin() + i * C + c0, x.data().begin() + i * C + c1,
              out->data.begin() + i * W);
  auto px = x.impl();
  return make_op_output(std::move(out), {px}, [px, c0, R, C, W](const TensorImpl& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (int64_t i = 0; i < R; ++i)
      for (int64_t j = 0; j < W; ++j)
        px->grad[i * C + c0 + j] += self.grad[i * W + j];
  });
}

Tensor concat_rows(const std::vector<Tensor>& xs) {
  PCD_CHECK(!xs.empty(), "concat_rows: empty input list");
  const int64_t C = xs[0].cols();
  int64_t R = 0;
  for (const auto& x : xs) {
    PCD_CHECK(x.cols() == C, "concat_rows: column mismatch ", x.cols(),
              " vs ", C);
    R += x.rows();
  }
  auto out = new_impl(R, C);
  std::vector<TensorImplPtr> parents;
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& x : xs) {
    std::copy(x.data().begin(), x.data().end(), out->data.begin() + off * C);
    parents.push_back(x.impl());
    offsets.push_back(off);
    off += x.rows();
  }
  auto ps = parents;
  return make_op_output(std::move(out), std::move(parents),
                        [ps, offsets, C](const TensorImpl& self) {
                          for (size_t k = 0; k < ps.size(); ++k) {
                            if (!ps[k]->requires_grad) continue;
                            ps[k]->ensure_grad();
                            const int64_t n = int64_t(ps[k]->data.size());
                            const double* src =
                                self.grad.data() + offsets[k] * C;
                            for (int64_t i = 0; i < n; ++i)
                              ps[k]->grad[size_t(i)] += src[i];
                          }
                        });
}

Tensor concat_cols(const std::vector<Tensor>& xs) {
  PCD_CHECK(!xs.empty(), "concat_cols: empty input list");
  const int64_t R = xs[0].rows();
  int64_t C = 0;
  for (const auto& x : xs) {
    PCD_CHECK(x.rows() == R, "concat_cols: row mismatch ", x.rows(), " vs ", R);
    C += x.cols();
  }
  auto out = new_impl(R, C);
  std::vector<TensorImplPtr> parents;
  std::vector<int64_t> offsets;
  int64_t off = 0;
  for (const auto& x : xs) {
    const int64_t w = x.cols();
    for (int64_t i = 0; i < R; ++i)
      std::copy(x.data().begin() + i * w, x.data().begin() + (i + 1) * w,
                out->data.begin() + i * C + off);
    parents.push_back(x.impl());
    offsets.push_back(off);
    off += w;
  }
  auto ps = parents;
  return make_op_output(
      std::move(out), std::move(parents),
      [ps, offsets, R, C](const TensorImpl& self) {
        for (size_t k = 0; k < ps.size(); ++k) {
          if (!ps[k]->requires_grad) continue;
          ps[k]->ensure_grad();
          const int64_t w = ps[k]->cols;
          for (int64_t i = 0; i < R; ++i)
            for (int64_t j = 0; j < w; ++j)
              ps[k]->grad[i * w + j] += self.grad[i * C + offsets[k] + j];
        }
      });
}

Tensor mean_rows(const Tensor& x) {
  const int64_t R = x.rows(), C = x.cols();
  PCD_CHECK(R >= 1, "mean_rows: empty tensor");
  auto out = new_impl(1, C);
  const auto& dx = x.data();
  for (int64_t i = 0; i < R; ++i)
    for (int64_t j = 0; j < C; ++j) out->data[j] += dx[i * C + j];
  const double inv = 1.0 / double(R);
  for (int64_t j = 0; j < C; ++j) out->data[j] *= inv;
  flops::add(uint64_t(R) * C);
  auto px = x.impl();
  return make_op_output(std::move(out), {px}, [px, R, C, inv](const TensorImpl& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (int64_t i = 0; i < R; ++i)
      for (int64_t j = 0; j < C; ++j) px->grad[i * C + j] += self.grad[j] * inv;
  });
}

Tensor mse_vs_const(const Tensor& pred, const std::vector<double>& target) {
  PCD_CHECK(size_t(pred.numel()) == target.size(),
            "mse_vs_const: size mismatch ", pred.numel(), " vs ",
            target.size());
  auto out = new_impl(1, 1);
  const auto& dp = pred.data();
  double acc = 0.0;
  for (size_t i = 0; i < dp.size(); ++i) {
    const double e = dp[i] - target[i];
    acc += e * e;
  }
  const double inv = 1.0 / double(dp.size());
  out->data[0] = acc * inv;
  flops::add(3 * dp.size());
  auto pp = pred.impl();
  return make_op_output(std::move(out), {pp}, [pp, target, inv](const TensorImpl& self) {
    if (!pp->requires_grad) return;
    pp->ensure_grad();
    const double g = self.grad[0] * 2.0 * inv;
    for (size_t i = 0; i < pp->data.size(); ++i)
      pp->grad[i] += g * (pp->data[i] - target[i]);
  });
}

Tensor weighted_sum(const Tensor& x, const std::vector<double>& weights) {
  PCD_CHECK(size_t(x.numel()) == weights.size(), "weighted_sum: size mismatch");
  auto out = new_impl(1, 1);
  const auto& dx = x.data();
  double acc = 0.0;
  for (size_t i = 0; i < dx.size(); ++i) acc += dx[i] * weights[i];
  out->data[0] = acc;
  auto px = x.impl();
  return make_op_output(std::move(out), {px}, [px, weights](const TensorImpl& self) {
    if (!px->requires_grad) return;
    px->ensure_grad();
    for (size_t i = 0; i < weights.size(); ++i)
      px->grad[i] += self.grad[0] * weights[i];
  });
}

Tensor multihead_attention(const Tensor& q_in, const Tensor& k_in,
                           const Tensor& v_in, const AttentionParams& p,
                           int64_t heads,
                           const std::vector<uint8_t>* key_keep) {
  const int64_t d = q_in.cols();
  PCD_CHECK_CFG(heads >= 1 && d % heads == 0,
                "attention: width ", d, " is not divisible by ", heads,
                " heads");
  PCD_CHECK(k_in.cols() == d && v_in.cols() == d,
            "attention: key/value width mismatch");
  PCD_CHECK(k_in.rows() == v_in.rows(), "attention: key/value rows mismatch");
  const int64_t dh = d / heads;
  const int64_t b = k_in.rows();

  Tensor q = add_rowvec(matmul(q_in, p.wq), p.bq);
  Tensor k = add_rowvec(matmul(k_in, p.wk), p.bk);
  Tensor v = add_rowvec(matmul(v_in, p.wv), p.bv);

  Tensor mask_row;
  if (key_keep) {
    PCD_CHECK(int64_t(key_keep->size()) == b,
              "attention: key mask size ", key_keep->size(), " vs ", b,
              " keys");
    std::vector<double> m(size_t(b), 0.0);
    bool any = false;
    for (int64_t j = 0; j < b; ++j) {
      const bool keep = (*key_keep)[size_t(j)] != 0;
      any = any || keep;
      m[size_t(j)] = keep ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    PCD_CHECK(any, "attention: key mask drops every key");
    mask_row = Tensor::row(std::move(m));
  }

  const double inv_scale = 1.0 / std::sqrt(double(dh));
  std::vector<Tensor> head_outs;
  head_outs.reserve(size_t(heads));
  for (int64_t h = 0; h < heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    Tensor scores = scale(matmul(qh, transpose(kh)), inv_scale);
    if (mask_row.defined()) scores = add_rowvec(scores, mask_row);
    Tensor attn = softmax_rows(scores);
    head_outs.push_back(matmul(attn, vh));
  }
  Tensor merged = heads == 1 ? head_outs[0] : concat_cols(head_outs);
  return add_rowvec(matmul(merged, p.wo), p.bo);
}

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace pcdiff
