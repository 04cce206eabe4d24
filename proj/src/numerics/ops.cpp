#include "fs3d/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fs3d/errors.hpp"

namespace fs3d::numerics {

namespace {

using Slots = std::span<Array* const>;
using Ids = std::span<const std::size_t>;

[[noreturn]] void shape_error(std::string_view op, const std::string& detail) {
  throw StructuralError(std::string(op) + ": " + detail);
}

Graph& graph_of(Var a) { return a.graph(); }

Graph& graph_of(Var a, Var b) {
  Graph& g = a.graph();
  if (&b.graph() != &g) throw StructuralError("operands belong to different graphs");
  return g;
}

void require_same_shape(std::string_view op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    shape_error(op, "shape mismatch " + format_shape(a.shape()) + " vs " + format_shape(b.shape()));
  }
}

void require_rank(std::string_view op, Var x, std::size_t rank) {
  if (x.shape().size() != rank) {
    shape_error(op, "expected rank " + std::to_string(rank) + ", got " + format_shape(x.shape()));
  }
}

void accumulate(Array& into, const Array& from) {
  double* out = into.data();
  const double* in = from.data();
  for (std::size_t i = 0; i < into.size(); ++i) out[i] += in[i];
}

// Row-major copy of op(x) for a 2-D array.
std::vector<double> oriented(const Array& x, bool transpose) {
  const std::size_t r = x.dim(0), c = x.dim(1);
  if (!transpose) return std::vector<double>(x.data(), x.data() + x.size());
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  return out;
}

// c[m x n] += a[m x k] * b[k x n]; each c entry sums over k in ascending order.
void gemm_rows(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// Four output rows share each load of b.
void gemm_accumulate(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                     std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    const double* a0 = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double x0 = a0[p], x1 = a0[k + p], x2 = a0[2 * k + p], x3 = a0[3 * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double bv = brow[j];
        c0[j] += x0 * bv;
        c1[j] += x1 * bv;
        c2[j] += x2 * bv;
        c3[j] += x3 * bv;
      }
    }
  }
  gemm_rows(a + i * k, b, c + i * n, m - i, k, n);
}

std::pair<std::size_t, std::size_t> oriented_dims(const Array& x, bool transpose) {
  return transpose ? std::pair{x.dim(1), x.dim(0)} : std::pair{x.dim(0), x.dim(1)};
}

void matmul_accumulate(const Array& a, bool ta, const Array& b, bool tb, Array& out) {
  const auto [m, k] = oriented_dims(a, ta);
  const auto [k2, n] = oriented_dims(b, tb);
  (void)k2;
  const std::vector<double> av = oriented(a, ta);
  const std::vector<double> bv = oriented(b, tb);
  gemm_accumulate(av.data(), bv.data(), out.data(), m, k, n);
}

double softplus_value(double x) {
  if (x > 30.0) return x + std::exp(-x);
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------- matmul

class MatMulOp final : public Op {
 public:
  MatMulOp(bool ta, bool tb) : ta_(ta), tb_(tb) {}
  std::string_view name() const override { return "matmul"; }

  void backward(const Graph& g, Ids in, const Array&, const Array& grad, Slots out) const override {
    const Array& a = g.value(in[0]);
    const Array& b = g.value(in[1]);
    if (out[0]) {
      if (!ta_) matmul_accumulate(grad, false, b, !tb_, *out[0]);
      else matmul_accumulate(b, tb_, grad, true, *out[0]);
    }
    if (out[1]) {
      if (!tb_) matmul_accumulate(a, !ta_, grad, false, *out[1]);
      else matmul_accumulate(grad, true, a, ta_, *out[1]);
    }
  }

  std::vector<Var> backward_graph(Graph& g, Ids in, std::size_t, Var grad,
                                  std::span<const bool> needs) const override {
    Var a(&g, in[0]), b(&g, in[1]);
    std::vector<Var> parts(2);
    if (needs[0]) parts[0] = !ta_ ? matmul(grad, b, false, !tb_) : matmul(b, grad, tb_, true);
    if (needs[1]) parts[1] = !tb_ ? matmul(a, grad, !ta_, false) : matmul(grad, a, true, ta_);
    return parts;
  }

 private:
  bool ta_, tb_;
};

// --------------------------------------------------------- bias and rows

class AddBiasOp final : public Op {
 public:
  std::string_view name() const override { return "add_bias"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (out[0]) accumulate(*out[0], grad);
    if (out[1]) {
      const std::size_t c = out[1]->size(), r = grad.size() / c;
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*out[1])[j] += grad[i * c + j];
    }
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool> needs) const override {
    std::vector<Var> parts(2);
    if (needs[0]) parts[0] = grad;
    if (needs[1]) parts[1] = sum_rows(grad);
    return parts;
  }
};

class SumRowsOp final : public Op {
 public:
  std::string_view name() const override { return "sum_rows"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const std::size_t c = grad.size(), r = out[0]->size() / c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*out[0])[i * c + j] += grad[j];
  }
  std::vector<Var> backward_graph(Graph& g, Ids in, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {broadcast_rows(grad, g.value(in[0]).dim(0))};
  }
};

class BroadcastRowsOp final : public Op {
 public:
  std::string_view name() const override { return "broadcast_rows"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const std::size_t c = out[0]->size(), r = grad.size() / c;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*out[0])[j] += grad[i * c + j];
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {sum_rows(grad)};
  }
};

class BroadcastScalarOp final : public Op {
 public:
  std::string_view name() const override { return "broadcast_scalar"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    double total = 0.0;
    for (double v : grad.values()) total += v;
    (*out[0])[0] += total;
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {sum(grad)};
  }
};

// ------------------------------------------------------------ elementwise

class AddOp final : public Op {
 public:
  std::string_view name() const override { return "add"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (out[0]) accumulate(*out[0], grad);
    if (out[1]) accumulate(*out[1], grad);
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {grad, grad};
  }
};

class SubOp final : public Op {
 public:
  std::string_view name() const override { return "sub"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (out[0]) accumulate(*out[0], grad);
    if (out[1]) {
      for (std::size_t i = 0; i < grad.size(); ++i) (*out[1])[i] -= grad[i];
    }
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool> needs) const override {
    std::vector<Var> parts(2);
    if (needs[0]) parts[0] = grad;
    if (needs[1]) parts[1] = scale(grad, -1.0);
    return parts;
  }
};

class MulOp final : public Op {
 public:
  std::string_view name() const override { return "mul"; }
  void backward(const Graph& g, Ids in, const Array&, const Array& grad, Slots out) const override {
    const Array& a = g.value(in[0]);
    const Array& b = g.value(in[1]);
    if (out[0]) {
      for (std::size_t i = 0; i < grad.size(); ++i) (*out[0])[i] += grad[i] * b[i];
    }
    if (out[1]) {
      for (std::size_t i = 0; i < grad.size(); ++i) (*out[1])[i] += grad[i] * a[i];
    }
  }
  std::vector<Var> backward_graph(Graph& g, Ids in, std::size_t, Var grad,
                                  std::span<const bool> needs) const override {
    std::vector<Var> parts(2);
    if (needs[0]) parts[0] = mul(grad, Var(&g, in[1]));
    if (needs[1]) parts[1] = mul(grad, Var(&g, in[0]));
    return parts;
  }
};

class ScaleOp final : public Op {
 public:
  explicit ScaleOp(double factor) : factor_(factor) {}
  std::string_view name() const override { return "scale"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    for (std::size_t i = 0; i < grad.size(); ++i) (*out[0])[i] += grad[i] * factor_;
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {scale(grad, factor_)};
  }

 private:
  double factor_;
};

class AddScalarOp final : public Op {
 public:
  std::string_view name() const override { return "add_scalar"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (out[0]) accumulate(*out[0], grad);
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {grad};
  }
};

class LeakyReluOp final : public Op {
 public:
  explicit LeakyReluOp(double slope) : slope_(slope) {}
  std::string_view name() const override { return "leaky_relu"; }
  void backward(const Graph& g, Ids in, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const Array& x = g.value(in[0]);
    for (std::size_t i = 0; i < grad.size(); ++i) (*out[0])[i] += grad[i] * (x[i] > 0.0 ? 1.0 : slope_);
  }
  // The local slope is piecewise constant, so it enters the recorded VJP as a constant.
  std::vector<Var> backward_graph(Graph& g, Ids in, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    const Array& x = g.value(in[0]);
    Array slope(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) slope[i] = x[i] > 0.0 ? 1.0 : slope_;
    return {mul(grad, g.constant(std::move(slope)))};
  }

 private:
  double slope_;
};

template <typename Derivative>
class UnaryOp final : public Op {
 public:
  UnaryOp(std::string_view name, Derivative derivative) : name_(name), derivative_(derivative) {}
  std::string_view name() const override { return name_; }
  void backward(const Graph& g, Ids in, const Array& y, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const Array& x = g.value(in[0]);
    for (std::size_t i = 0; i < grad.size(); ++i) (*out[0])[i] += grad[i] * derivative_(x[i], y[i]);
  }

 private:
  std::string_view name_;
  Derivative derivative_;
};

template <typename Forward, typename Derivative>
Var unary(Var x, std::string_view name, Forward forward, Derivative derivative) {
  Graph& g = graph_of(x);
  Array out(x.shape());
  const Array& xv = x.value();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = forward(xv[i]);
  return g.apply(std::make_unique<UnaryOp<Derivative>>(name, derivative), {x}, std::move(out));
}

// ------------------------------------------------------------- reductions

class SumOp final : public Op {
 public:
  explicit SumOp(double factor) : factor_(factor) {}
  std::string_view name() const override { return factor_ == 1.0 ? "sum" : "mean"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const double g = grad[0] * factor_;
    for (double& v : out[0]->values()) v += g;
  }
  std::vector<Var> backward_graph(Graph& g, Ids in, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    Var spread = broadcast_scalar(grad, g.value(in[0]).shape());
    return {factor_ == 1.0 ? spread : scale(spread, factor_)};
  }

 private:
  double factor_;
};

// ---------------------------------------------------------------- pooling

struct ImageDims {
  std::size_t batch, height, width, channels;
};

ImageDims image_dims(std::string_view op, Var x) {
  require_rank(op, x, 4);
  const Shape& s = x.shape();
  return {s[0], s[1], s[2], s[3]};
}

void pool_into(const Array& x, const ImageDims& d, Array& out, double weight) {
  const std::size_t h2 = d.height / 2, w2 = d.width / 2, c = d.channels;
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j)
        for (std::size_t ch = 0; ch < c; ++ch) {
          auto at = [&](std::size_t yy, std::size_t xx) {
            return x[((b * d.height + yy) * d.width + xx) * c + ch];
          };
          const double s = at(2 * i, 2 * j) + at(2 * i, 2 * j + 1) + at(2 * i + 1, 2 * j) +
                           at(2 * i + 1, 2 * j + 1);
          out[((b * h2 + i) * w2 + j) * c + ch] += weight * s;
        }
}

// d describes the small (pooled) image; out is the large one.
void spread_into(const Array& small, const ImageDims& d, Array& out, double weight) {
  const std::size_t H = d.height * 2, W = d.width * 2, c = d.channels;
  for (std::size_t b = 0; b < d.batch; ++b)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t j = 0; j < W; ++j)
        for (std::size_t ch = 0; ch < c; ++ch)
          out[((b * H + i) * W + j) * c + ch] +=
              weight * small[((b * d.height + i / 2) * d.width + j / 2) * c + ch];
}

class AvgPool2Op final : public Op {
 public:
  std::string_view name() const override { return "avg_pool2"; }
  void backward(const Graph&, Ids, const Array& y, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const Shape& s = y.shape();
    spread_into(grad, {s[0], s[1], s[2], s[3]}, *out[0], 0.25);
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {scale(upsample2(grad), 0.25)};
  }
};

class Upsample2Op final : public Op {
 public:
  std::string_view name() const override { return "upsample2"; }
  void backward(const Graph& g, Ids in, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const Shape& s = g.value(in[0]).shape();
    const Shape& big = grad.shape();
    (void)s;
    pool_into(grad, {big[0], big[1], big[2], big[3]}, *out[0], 1.0);
  }
  std::vector<Var> backward_graph(Graph&, Ids, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {scale(avg_pool2(grad), 4.0)};
  }
};

// ------------------------------------------------------------- structure

class ReshapeOp final : public Op {
 public:
  std::string_view name() const override { return "reshape"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (out[0]) accumulate(*out[0], grad);
  }
  std::vector<Var> backward_graph(Graph& g, Ids in, std::size_t, Var grad,
                                  std::span<const bool>) const override {
    return {reshape(grad, g.value(in[0]).shape())};
  }
};

// Copies a block of columns [col_begin, col_begin + cols) between row-major 2-D arrays.
class ConcatOp final : public Op {
 public:
  explicit ConcatOp(std::size_t axis) : axis_(axis) {}
  std::string_view name() const override { return "concat"; }
  void backward(const Graph& g, Ids in, const Array& y, const Array& grad, Slots out) const override {
    if (axis_ == 0) {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::size_t n = g.value(in[k]).size();
        if (out[k]) {
          for (std::size_t i = 0; i < n; ++i) (*out[k])[i] += grad[offset + i];
        }
        offset += n;
      }
      return;
    }
    const std::size_t rows = y.dim(0), total = y.dim(1);
    std::size_t col = 0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t cols = g.value(in[k]).dim(1);
      if (out[k]) {
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < cols; ++c) (*out[k])[r * cols + c] += grad[r * total + col + c];
      }
      col += cols;
    }
  }

 private:
  std::size_t axis_;
};

class SliceOp final : public Op {
 public:
  // Rows [begin, end) when by_rows, else columns.
  SliceOp(bool by_rows, std::size_t begin) : by_rows_(by_rows), begin_(begin) {}
  std::string_view name() const override { return by_rows_ ? "slice_rows" : "slice_cols"; }
  void backward(const Graph&, Ids, const Array& y, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    Array& dx = *out[0];
    const std::size_t cols = dx.dim(1);
    if (by_rows_) {
      const std::size_t offset = begin_ * cols;
      for (std::size_t i = 0; i < grad.size(); ++i) dx[offset + i] += grad[i];
      return;
    }
    const std::size_t rows = y.dim(0), width = y.dim(1);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) dx[r * cols + begin_ + c] += grad[r * width + c];
  }

 private:
  bool by_rows_;
  std::size_t begin_;
};

class StackOp final : public Op {
 public:
  std::string_view name() const override { return "stack"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out[k]) (*out[k])[0] += grad[k];
    }
  }
};

class GatherOp final : public Op {
 public:
  explicit GatherOp(std::vector<std::size_t> indices) : indices_(std::move(indices)) {}
  std::string_view name() const override { return "gather"; }
  void backward(const Graph&, Ids, const Array&, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    for (std::size_t e = 0; e < indices_.size(); ++e) (*out[0])[indices_[e]] += grad[e];
  }

 private:
  std::vector<std::size_t> indices_;
};

// --------------------------------------------------- similarity building blocks

class LogSoftmaxOp final : public Op {
 public:
  std::string_view name() const override { return "log_softmax"; }
  void backward(const Graph&, Ids, const Array& y, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    double total = 0.0;
    for (double v : grad.values()) total += v;
    for (std::size_t i = 0; i < y.size(); ++i) (*out[0])[i] += grad[i] - std::exp(y[i]) * total;
  }
};

class DotOp final : public Op {
 public:
  std::string_view name() const override { return "dot"; }
  void backward(const Graph& g, Ids in, const Array&, const Array& grad, Slots out) const override {
    const Array& a = g.value(in[0]);
    const Array& b = g.value(in[1]);
    const double s = grad[0];
    if (out[0]) {
      for (std::size_t i = 0; i < a.size(); ++i) (*out[0])[i] += s * b[i];
    }
    if (out[1]) {
      for (std::size_t i = 0; i < a.size(); ++i) (*out[1])[i] += s * a[i];
    }
  }
};

class L2NormOp final : public Op {
 public:
  std::string_view name() const override { return "l2_norm"; }
  void backward(const Graph& g, Ids in, const Array& y, const Array& grad, Slots out) const override {
    if (!out[0]) return;
    const Array& x = g.value(in[0]);
    const double s = grad[0] / y[0];
    for (std::size_t i = 0; i < x.size(); ++i) (*out[0])[i] += s * x[i];
  }
};

class DivGuardedOp final : public Op {
 public:
  std::string_view name() const override { return "div_guarded"; }
  void backward(const Graph& g, Ids in, const Array& y, const Array& grad, Slots out) const override {
    const Array& b = g.value(in[1]);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const bool guarded = !(b[i] > kEpsilon);
      const double inv = 1.0 / (guarded ? kEpsilon : b[i]);
      if (out[0]) (*out[0])[i] += grad[i] * inv;
      if (out[1] && !guarded) (*out[1])[i] -= grad[i] * y[i] * inv;
    }
  }
};

class MaskMultiplyOp final : public Op {
 public:
  std::string_view name() const override { return "mask_multiply"; }
  void backward(const Graph& g, Ids in, const Array&, const Array& grad, Slots out) const override {
    const Array& f = g.value(in[0]);
    const Array& m = g.value(in[1]);
    const std::size_t pixels = m.size(), channels = f.size() / pixels;
    for (std::size_t p = 0; p < pixels; ++p) {
      double acc = 0.0;
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t i = p * channels + c;
        if (out[0]) (*out[0])[i] += grad[i] * m[p];
        acc += grad[i] * f[i];
      }
      if (out[1]) (*out[1])[p] += acc;
    }
  }
};

class MinimumOp final : public Op {
 public:
  std::string_view name() const override { return "minimum"; }
  void backward(const Graph& g, Ids in, const Array&, const Array& grad, Slots out) const override {
    const Array& a = g.value(in[0]);
    const Array& b = g.value(in[1]);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      Array* target = a[i] <= b[i] ? out[0] : out[1];
      if (target) (*target)[i] += grad[i];
    }
  }
};

}  // namespace

// ================================================================ builders

Var matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  Graph& g = graph_of(a, b);
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const auto [m, k] = oriented_dims(a.value(), transpose_a);
  const auto [k2, n] = oriented_dims(b.value(), transpose_b);
  if (k != k2) {
    shape_error("matmul", "inner extents differ: " + format_shape(a.shape()) +
                              (transpose_a ? "^T" : "") + " x " + format_shape(b.shape()) +
                              (transpose_b ? "^T" : ""));
  }
  Array out(Shape{m, n}, 0.0);
  matmul_accumulate(a.value(), transpose_a, b.value(), transpose_b, out);
  return g.apply(std::make_unique<MatMulOp>(transpose_a, transpose_b), {a, b}, std::move(out));
}

Var add_bias(Var x, Var bias) {
  Graph& g = graph_of(x, bias);
  require_rank("add_bias", x, 2);
  require_rank("add_bias", bias, 1);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (bias.shape()[0] != c) {
    shape_error("add_bias", "bias " + format_shape(bias.shape()) + " for " + format_shape(x.shape()));
  }
  Array out = x.value();
  const Array& b = bias.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += b[j];
  return g.apply(std::make_unique<AddBiasOp>(), {x, bias}, std::move(out));
}

Var sum_rows(Var x) {
  Graph& g = graph_of(x);
  require_rank("sum_rows", x, 2);
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  Array out(Shape{c}, 0.0);
  const Array& xv = x.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += xv[i * c + j];
  return g.apply(std::make_unique<SumRowsOp>(), {x}, std::move(out));
}

Var broadcast_rows(Var v, std::size_t rows) {
  Graph& g = graph_of(v);
  require_rank("broadcast_rows", v, 1);
  const std::size_t c = v.shape()[0];
  Array out(Shape{rows, c});
  const Array& vv = v.value();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] = vv[j];
  return g.apply(std::make_unique<BroadcastRowsOp>(), {v}, std::move(out));
}

Var broadcast_scalar(Var s, const Shape& shape) {
  Graph& g = graph_of(s);
  if (s.value().size() != 1) shape_error("broadcast_scalar", "operand " + format_shape(s.shape()));
  return g.apply(std::make_unique<BroadcastScalarOp>(), {s}, Array(shape, s.value()[0]));
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("add", a, b);
  Array out = a.value();
  const Array& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.apply(std::make_unique<AddOp>(), {a, b}, std::move(out));
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("sub", a, b);
  Array out = a.value();
  const Array& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return g.apply(std::make_unique<SubOp>(), {a, b}, std::move(out));
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("mul", a, b);
  Array out = a.value();
  const Array& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.apply(std::make_unique<MulOp>(), {a, b}, std::move(out));
}

Var scale(Var x, double factor) {
  Graph& g = graph_of(x);
  Array out = x.value();
  for (double& v : out.values()) v *= factor;
  return g.apply(std::make_unique<ScaleOp>(factor), {x}, std::move(out));
}

Var add_scalar(Var x, double offset) {
  Graph& g = graph_of(x);
  Array out = x.value();
  for (double& v : out.values()) v += offset;
  return g.apply(std::make_unique<AddScalarOp>(), {x}, std::move(out));
}

Var leaky_relu(Var x, double slope) {
  Graph& g = graph_of(x);
  Array out = x.value();
  for (double& v : out.values()) v = v > 0.0 ? v : v * slope;
  return g.apply(std::make_unique<LeakyReluOp>(slope), {x}, std::move(out));
}

Var tanh(Var x) {
  return unary(
      x, "tanh", [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var x) {
  return unary(x, "sigmoid", sigmoid_value, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var x) {
  return unary(x, "softplus", softplus_value, [](double v, double) { return sigmoid_value(v); });
}

Var exp(Var x) {
  return unary(
      x, "exp", [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var sum(Var x) {
  Graph& g = graph_of(x);
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return g.apply(std::make_unique<SumOp>(1.0), {x}, Array::scalar(total));
}

Var mean(Var x) {
  Graph& g = graph_of(x);
  const std::size_t n = x.value().size();
  if (n == 0) shape_error("mean", "empty operand");
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  const double factor = 1.0 / static_cast<double>(n);
  return g.apply(std::make_unique<SumOp>(factor), {x}, Array::scalar(total * factor));
}

Var avg_pool2(Var x) {
  Graph& g = graph_of(x);
  const ImageDims d = image_dims("avg_pool2", x);
  if (d.height % 2 != 0 || d.width % 2 != 0) {
    shape_error("avg_pool2", "odd spatial extents " + format_shape(x.shape()));
  }
  Array out(Shape{d.batch, d.height / 2, d.width / 2, d.channels}, 0.0);
  pool_into(x.value(), d, out, 0.25);
  return g.apply(std::make_unique<AvgPool2Op>(), {x}, std::move(out));
}

Var upsample2(Var x) {
  Graph& g = graph_of(x);
  const ImageDims d = image_dims("upsample2", x);
  Array out(Shape{d.batch, d.height * 2, d.width * 2, d.channels}, 0.0);
  spread_into(x.value(), d, out, 1.0);
  return g.apply(std::make_unique<Upsample2Op>(), {x}, std::move(out));
}

Var reshape(Var x, Shape shape) {
  Graph& g = graph_of(x);
  if (element_count(shape) != x.value().size()) {
    shape_error("reshape", format_shape(x.shape()) + " to " + format_shape(shape));
  }
  return g.apply(std::make_unique<ReshapeOp>(), {x}, x.value().reshaped(std::move(shape)));
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw StructuralError("concat: no operands");
  Graph& g = graph_of(parts[0]);
  const std::size_t rank = parts[0].shape().size();
  if (rank < 1 || rank > 2 || axis >= rank) {
    shape_error("concat", "unsupported axis " + std::to_string(axis) + " for " +
                              format_shape(parts[0].shape()));
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  for (const Var& p : inputs) graph_of(parts[0], p);
  if (axis == 0) {
    std::size_t rows = 0;
    const std::size_t cols = rank == 2 ? parts[0].shape()[1] : 1;
    for (const Var& p : inputs) {
      if (p.shape().size() != rank || (rank == 2 && p.shape()[1] != cols)) {
        shape_error("concat", "incompatible " + format_shape(p.shape()) + " with " +
                                  format_shape(parts[0].shape()));
      }
      rows += p.shape()[0];
    }
    std::vector<double> values;
    values.reserve(rows * cols);
    for (const Var& p : inputs) values.insert(values.end(), p.value().data(), p.value().data() + p.value().size());
    Shape shape = rank == 2 ? Shape{rows, cols} : Shape{rows};
    return g.apply(std::make_unique<ConcatOp>(0), std::move(inputs), Array(std::move(shape), std::move(values)));
  }
  const std::size_t rows = parts[0].shape()[0];
  std::size_t total = 0;
  for (const Var& p : inputs) {
    if (p.shape().size() != 2 || p.shape()[0] != rows) {
      shape_error("concat", "incompatible " + format_shape(p.shape()) + " with " +
                                format_shape(parts[0].shape()));
    }
    total += p.shape()[1];
  }
  Array out(Shape{rows, total});
  std::size_t col = 0;
  for (const Var& p : inputs) {
    const std::size_t cols = p.shape()[1];
    const Array& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[r * total + col + c] = v[r * cols + c];
    col += cols;
  }
  return g.apply(std::make_unique<ConcatOp>(1), std::move(inputs), std::move(out));
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(x);
  require_rank("slice_rows", x, 2);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (begin >= end || end > rows) {
    shape_error("slice_rows", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                  ") of " + format_shape(x.shape()));
  }
  const double* first = x.value().data() + begin * cols;
  Array out(Shape{end - begin, cols}, std::vector<double>(first, first + (end - begin) * cols));
  return g.apply(std::make_unique<SliceOp>(true, begin), {x}, std::move(out));
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  Graph& g = graph_of(x);
  require_rank("slice_cols", x, 2);
  const std::size_t rows = x.shape()[0], cols = x.shape()[1];
  if (begin >= end || end > cols) {
    shape_error("slice_cols", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                                  ") of " + format_shape(x.shape()));
  }
  const std::size_t width = end - begin;
  Array out(Shape{rows, width});
  const Array& v = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = v[r * cols + begin + c];
  return g.apply(std::make_unique<SliceOp>(false, begin), {x}, std::move(out));
}

Var stack(std::span<const Var> scalars) {
  if (scalars.empty()) throw StructuralError("stack: no operands");
  Graph& g = graph_of(scalars[0]);
  std::vector<double> values;
  for (const Var& s : scalars) {
    graph_of(scalars[0], s);
    if (s.value().size() != 1) shape_error("stack", "non-scalar operand " + format_shape(s.shape()));
    values.push_back(s.value()[0]);
  }
  return g.apply(std::make_unique<StackOp>(), std::vector<Var>(scalars.begin(), scalars.end()),
                 Array::vector(std::move(values)));
}

Var gather(Var x, std::vector<std::size_t> indices) {
  Graph& g = graph_of(x);
  const Array& v = x.value();
  std::vector<double> values(indices.size());
  for (std::size_t e = 0; e < indices.size(); ++e) {
    if (indices[e] >= v.size()) {
      shape_error("gather", "index " + std::to_string(indices[e]) + " outside " + format_shape(x.shape()));
    }
    values[e] = v[indices[e]];
  }
  return g.apply(std::make_unique<GatherOp>(std::move(indices)), {x}, Array::vector(std::move(values)));
}

Var log_softmax(Var x) {
  Graph& g = graph_of(x);
  require_rank("log_softmax", x, 1);
  const Array& v = x.value();
  if (v.size() == 0) shape_error("log_softmax", "empty operand");
  const double peak = *std::max_element(v.values().begin(), v.values().end());
  double total = 0.0;
  for (double e : v.values()) total += std::exp(e - peak);
  const double lse = peak + std::log(total);
  Array out(v.shape());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return g.apply(std::make_unique<LogSoftmaxOp>(), {x}, std::move(out));
}

Var dot(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("dot", a, b);
  double total = 0.0;
  const Array& av = a.value();
  const Array& bv = b.value();
  for (std::size_t i = 0; i < av.size(); ++i) total += av[i] * bv[i];
  return g.apply(std::make_unique<DotOp>(), {a, b}, Array::scalar(total));
}

Var l2_norm(Var x) {
  Graph& g = graph_of(x);
  double total = kEpsilon * kEpsilon;
  for (double v : x.value().values()) total += v * v;
  return g.apply(std::make_unique<L2NormOp>(), {x}, Array::scalar(std::sqrt(total)));
}

Var div_guarded(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("div_guarded", a, b);
  Array out = a.value();
  const Array& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] /= std::max(bv[i], kEpsilon);
  return g.apply(std::make_unique<DivGuardedOp>(), {a, b}, std::move(out));
}

Var mask_multiply(Var features, Var mask) {
  Graph& g = graph_of(features, mask);
  require_rank("mask_multiply", features, 2);
  require_rank("mask_multiply", mask, 1);
  const std::size_t pixels = features.shape()[0], channels = features.shape()[1];
  if (mask.shape()[0] != pixels) {
    shape_error("mask_multiply", "mask " + format_shape(mask.shape()) + " for features " +
                                     format_shape(features.shape()));
  }
  Array out = features.value();
  const Array& m = mask.value();
  for (std::size_t p = 0; p < pixels; ++p)
    for (std::size_t c = 0; c < channels; ++c) out[p * channels + c] *= m[p];
  return g.apply(std::make_unique<MaskMultiplyOp>(), {features, mask}, std::move(out));
}

Var minimum(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape("minimum", a, b);
  Array out = a.value();
  const Array& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(out[i], bv[i]);
  return g.apply(std::make_unique<MinimumOp>(), {a, b}, std::move(out));
}

}  // namespace fs3d::numerics
