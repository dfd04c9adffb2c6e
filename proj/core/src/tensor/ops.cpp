#include "mainvc/tensor/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

MAINVC_NAMESPACE_BEGIN

namespace {

using detail::Node;

[[maybe_unused]] void blas_gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, float alpha,
               const float* a, int lda, const float* b, int ldb, float beta, float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

[[maybe_unused]] void blas_gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, int m, int n, int k, double alpha,
               const double* a, int lda, const double* b, int ldb, double beta, double* c,
               int ldc) {
  cblas_dgemm(CblasRowMajor, ta, tb, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          Scalar alpha, const Scalar* a, std::size_t lda, const Scalar* b, std::size_t ldb,
          Scalar beta, Scalar* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  blas_gemm(trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
            static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), alpha, a,
            static_cast<int>(lda), b, static_cast<int>(ldb), beta, c, static_cast<int>(ldc));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                     shape_to_string(b.shape()) + " differ");
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     shape_to_string(x.shape()));
  }
}

bool wants_grad(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

// y = f(x) elementwise; dy/dx = df(x, y).
template <typename F, typename DF>
Tensor unary(const Tensor& x, F f, DF df) {
  const auto xs = x.data();
  std::vector<Scalar> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  return Tensor::make_result(x.shape(), std::move(out), {x}, [df](const Node& self) {
    const auto& in = *self.inputs[0];
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * df(in.value[i], self.value[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<Scalar> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](const Node& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (!wants_grad(self, k)) continue;
      auto& g = self.inputs[k]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<Scalar> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](const Node& self) {
    if (wants_grad(self, 0)) {
      auto& g = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<Scalar> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](const Node& self) {
    const auto& xa = self.inputs[0]->value;
    const auto& xb = self.inputs[1]->value;
    if (wants_grad(self, 0)) {
      auto& g = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * xb[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * xa[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape("div", a, b);
  const auto x = a.data();
  const auto y = b.data();
  std::vector<Scalar> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] / y[i];
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [](const Node& self) {
    const auto& xb = self.inputs[1]->value;
    if (wants_grad(self, 0)) {
      auto& g = self.inputs[0]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / xb[i];
    }
    if (wants_grad(self, 1)) {
      auto& g = self.inputs[1]->grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i] * self.value[i] / xb[i];
    }
  });
}

Tensor scale(const Tensor& x, Scalar factor) {
  return unary(
      x, [factor](Scalar v) { return v * factor; },
      [factor](Scalar, Scalar) { return factor; });
}

Tensor add_scalar(const Tensor& x, Scalar offset) {
  return unary(
      x, [offset](Scalar v) { return v + offset; }, [](Scalar, Scalar) { return Scalar(1); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](Scalar v) { return v * v; }, [](Scalar v, Scalar) { return Scalar(2) * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, [](Scalar v) { return std::sqrt(v); },
      [](Scalar, Scalar y) { return Scalar(0.5) / y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](Scalar v) { return std::log(v); }, [](Scalar v, Scalar) { return Scalar(1) / v; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](Scalar v) { return std::exp(v); }, [](Scalar, Scalar y) { return y; });
}

Tensor softplus(const Tensor& x) {
  return unary(
      x,
      [](Scalar v) {
        return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
      },
      [](Scalar v, Scalar) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
}

Tensor leaky_relu(const Tensor& x, Scalar slope) {
  return unary(
      x, [slope](Scalar v) { return v > 0 ? v : slope * v; },
      [slope](Scalar v, Scalar) { return v > 0 ? Scalar(1) : slope; });
}

Tensor clamp(const Tensor& x, Scalar lo, Scalar hi) {
  return unary(
      x, [lo, hi](Scalar v) { return std::clamp(v, lo, hi); },
      [lo, hi](Scalar v, Scalar) { return (v >= lo && v <= hi) ? Scalar(1) : Scalar(0); });
}

Tensor sum(const Tensor& x) {
  Scalar total = 0;
  for (auto v : x.data()) total += v;
  return Tensor::make_result({}, {total}, {x}, [](const Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (auto& v : g) v += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  const auto n = static_cast<Scalar>(x.numel());
  return scale(sum(x), Scalar(1) / n);
}

Tensor sum_rows(const Tensor& x) {
  require_rank("sum_rows", x, 2);
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto v = x.data();
  std::vector<Scalar> out(cols, Scalar(0));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c] += v[r * cols + c];
  }
  return Tensor::make_result({cols}, std::move(out), {x}, [rows, cols](const Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c];
    }
  });
}

Tensor mean_time(const Tensor& x) {
  require_rank("mean_time", x, 2);
  const std::size_t channels = x.dim(0);
  const std::size_t frames = x.dim(1);
  if (frames == 0) throw ShapeError("mean_time: empty time axis");
  const auto v = x.data();
  std::vector<Scalar> out(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    Scalar acc = 0;
    for (std::size_t t = 0; t < frames; ++t) acc += v[c * frames + t];
    out[c] = acc / static_cast<Scalar>(frames);
  }
  return Tensor::make_result(
      {channels}, std::move(out), {x}, [channels, frames](const Node& self) {
        auto& g = self.inputs[0]->grad_buffer();
        const Scalar inv = Scalar(1) / static_cast<Scalar>(frames);
        for (std::size_t c = 0; c < channels; ++c) {
          const Scalar gc = self.grad[c] * inv;
          for (std::size_t t = 0; t < frames; ++t) g[c * frames + t] += gc;
        }
      });
}

Tensor logsumexp(const Tensor& x) {
  const auto v = x.data();
  if (v.empty()) throw ShapeError("logsumexp of an empty tensor");
  const Scalar peak = *std::max_element(v.begin(), v.end());
  Scalar acc = 0;
  for (auto e : v) acc += std::exp(e - peak);
  const Scalar result = peak + std::log(acc);
  return Tensor::make_result({}, {result}, {x}, [](const Node& self) {
    const auto& in = self.inputs[0]->value;
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[0] * std::exp(in[i] - self.value[0]);
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                     shape_to_string(shape));
  }
  const auto v = x.data();
  return Tensor::make_result(std::move(shape), std::vector<Scalar>(v.begin(), v.end()), {x},
                             [](const Node& self) {
                               auto& g = self.inputs[0]->grad_buffer();
                               for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
                             });
}

Tensor transpose(const Tensor& x) {
  require_rank("transpose", x, 2);
  const std::size_t rows = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto v = x.data();
  std::vector<Scalar> out(v.size());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = v[r * cols + c];
  }
  return Tensor::make_result({cols, rows}, std::move(out), {x}, [rows, cols](const Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) g[r * cols + c] += self.grad[c * rows + r];
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const std::size_t rank = parts.front().rank();
  if (rank == 0 || rank > 2 || axis >= rank) {
    throw ShapeError("concat: unsupported rank/axis combination");
  }
  for (const auto& p : parts) {
    if (p.rank() != rank) throw ShapeError("concat: rank mismatch");
    if (rank == 2 && p.dim(1 - axis) != parts.front().dim(1 - axis)) {
      throw ShapeError("concat: mismatched extent " + shape_to_string(p.shape()) + " vs " +
                       shape_to_string(parts.front().shape()));
    }
  }

  if (rank == 1 || axis == 0) {
    // Row-major concatenation along the leading axis is a plain append.
    Shape shape = parts.front().shape();
    shape[0] = 0;
    std::vector<Scalar> out;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
      offsets.push_back(out.size());
      shape[0] += p.dim(0);
      out.insert(out.end(), p.data().begin(), p.data().end());
    }
    return Tensor::make_result(std::move(shape), std::move(out), parts,
                               [offsets](const Node& self) {
                                 for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                                   if (!wants_grad(self, k)) continue;
                                   auto& g = self.inputs[k]->grad_buffer();
                                   for (std::size_t i = 0; i < g.size(); ++i) {
                                     g[i] += self.grad[offsets[k] + i];
                                   }
                                 }
                               });
  }

  const std::size_t rows = parts.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<Scalar> out(rows * total);
  std::size_t col0 = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto v = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.begin() + r * widths[k], widths[k], out.begin() + r * total + col0);
    }
    col0 += widths[k];
  }
  return Tensor::make_result({rows, total}, std::move(out), parts,
                             [rows, total, widths](const Node& self) {
                               std::size_t c0 = 0;
                               for (std::size_t k = 0; k < self.inputs.size(); ++k) {
                                 if (wants_grad(self, k)) {
                                   auto& g = self.inputs[k]->grad_buffer();
                                   for (std::size_t r = 0; r < rows; ++r) {
                                     for (std::size_t c = 0; c < widths[k]; ++c) {
                                       g[r * widths[k] + c] += self.grad[r * total + c0 + c];
                                     }
                                   }
                                 }
                                 c0 += widths[k];
                               }
                             });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows) {
  require_rank("gather_rows", x, 2);
  const std::size_t n = x.dim(0);
  const std::size_t cols = x.dim(1);
  const auto v = x.data();
  std::vector<Scalar> out(rows.size() * cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= n) throw ShapeError("gather_rows: index out of range");
    std::copy_n(v.begin() + rows[i] * cols, cols, out.begin() + i * cols);
  }
  return Tensor::make_result({rows.size(), cols}, std::move(out), {x},
                             [rows, cols](const Node& self) {
                               auto& g = self.inputs[0]->grad_buffer();
                               for (std::size_t i = 0; i < rows.size(); ++i) {
                                 for (std::size_t c = 0; c < cols; ++c) {
                                   g[rows[i] * cols + c] += self.grad[i * cols + c];
                                 }
                               }
                             });
}

Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& cols) {
  require_rank("gather_cols", x, 2);
  const std::size_t rows = x.dim(0);
  const std::size_t n = x.dim(1);
  const std::size_t m = cols.size();
  for (auto c : cols) {
    if (c >= n) throw ShapeError("gather_cols: index out of range");
  }
  const auto v = x.data();
  std::vector<Scalar> out(rows * m);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < m; ++j) out[r * m + j] = v[r * n + cols[j]];
  }
  return Tensor::make_result({rows, m}, std::move(out), {x}, [rows, n, cols](const Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    const std::size_t m = cols.size();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < m; ++j) g[r * n + cols[j]] += self.grad[r * m + j];
    }
  });
}

Tensor broadcast_rows(const Tensor& v, std::size_t rows) {
  require_rank("broadcast_rows", v, 1);
  return gather_rows(reshape(v, {1, v.dim(0)}), std::vector<std::size_t>(rows, 0));
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank("linear weight", weight, 2);
  require_rank("linear bias", bias, 1);
  const std::size_t out_dim = weight.dim(0);
  const std::size_t in_dim = weight.dim(1);
  if (bias.dim(0) != out_dim) throw ShapeError("linear: bias length mismatch");
  const bool vector_input = x.rank() == 1;
  if (x.rank() != 1 && x.rank() != 2) throw ShapeError("linear: input must be rank 1 or 2");
  const std::size_t batch = vector_input ? 1 : x.dim(0);
  const std::size_t x_in = vector_input ? x.dim(0) : x.dim(1);
  if (x_in != in_dim) {
    throw ShapeError("linear: input " + shape_to_string(x.shape()) + " vs weight " +
                     shape_to_string(weight.shape()));
  }

  std::vector<Scalar> out(batch * out_dim);
  const auto b = bias.data();
  for (std::size_t n = 0; n < batch; ++n) std::copy(b.begin(), b.end(), out.begin() + n * out_dim);
  gemm(false, true, batch, out_dim, in_dim, Scalar(1), x.data().data(), in_dim,
       weight.data().data(), in_dim, Scalar(1), out.data(), out_dim);

  Shape shape = vector_input ? Shape{out_dim} : Shape{batch, out_dim};
  return Tensor::make_result(
      std::move(shape), std::move(out), {x, weight, bias},
      [batch, in_dim, out_dim](const Node& self) {
        const auto& xv = self.inputs[0]->value;
        const auto& wv = self.inputs[1]->value;
        const Scalar* gy = self.grad.data();
        if (wants_grad(self, 0)) {
          auto& gx = self.inputs[0]->grad_buffer();
          gemm(false, false, batch, in_dim, out_dim, Scalar(1), gy, out_dim, wv.data(), in_dim,
               Scalar(1), gx.data(), in_dim);
        }
        if (wants_grad(self, 1)) {
          auto& gw = self.inputs[1]->grad_buffer();
          gemm(true, false, out_dim, in_dim, batch, Scalar(1), gy, out_dim, xv.data(), in_dim,
               Scalar(1), gw.data(), in_dim);
        }
        if (wants_grad(self, 2)) {
          auto& gb = self.inputs[2]->grad_buffer();
          for (std::size_t n = 0; n < batch; ++n) {
            for (std::size_t o = 0; o < out_dim; ++o) gb[o] += gy[n * out_dim + o];
          }
        }
      });
}

std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t dilation, std::size_t padding) {
  if (kernel == 0 || stride == 0 || dilation == 0) {
    throw ShapeError("conv1d: kernel, stride and dilation must be >= 1");
  }
  const std::size_t span = dilation * (kernel - 1) + 1;
  if (length + 2 * padding < span) {
    throw ShapeError("conv1d: input length " + std::to_string(length) +
                     " too short for receptive span " + std::to_string(span));
  }
  return (length + 2 * padding - span) / stride + 1;
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t dilation, std::size_t padding) {
  require_rank("conv1d input", x, 2);
  require_rank("conv1d weight", weight, 3);
  require_rank("conv1d bias", bias, 1);
  const std::size_t c_in = x.dim(0);
  const std::size_t length = x.dim(1);
  const std::size_t c_out = weight.dim(0);
  const std::size_t kernel = weight.dim(2);
  if (weight.dim(1) != c_in) {
    throw ShapeError("conv1d: input has " + std::to_string(c_in) + " channels, weight expects " +
                     std::to_string(weight.dim(1)));
  }
  if (bias.dim(0) != c_out) throw ShapeError("conv1d: bias length mismatch");
  const std::size_t t_out = conv1d_output_length(length, kernel, stride, dilation, padding);
  const std::size_t rows = c_in * kernel;

  // Pointwise convolutions read the input directly; everything else goes
  // through an im2col buffer of shape [(C_in * k) x T_out].
  const bool direct = kernel == 1 && stride == 1 && padding == 0;
  auto columns = std::make_shared<std::vector<Scalar>>();
  if (!direct) {
    columns->assign(rows * t_out, Scalar(0));
    const auto xv = x.data();
    for (std::size_t i = 0; i < c_in; ++i) {
      for (std::size_t j = 0; j < kernel; ++j) {
        Scalar* dst = columns->data() + (i * kernel + j) * t_out;
        const std::ptrdiff_t shift =
            static_cast<std::ptrdiff_t>(j * dilation) - static_cast<std::ptrdiff_t>(padding);
        for (std::size_t t = 0; t < t_out; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride) + shift;
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(length)) {
            dst[t] = xv[i * length + static_cast<std::size_t>(src)];
          }
        }
      }
    }
  }
  const Scalar* col_ptr = direct ? x.data().data() : columns->data();

  std::vector<Scalar> out(c_out * t_out);
  const auto b = bias.data();
  for (std::size_t o = 0; o < c_out; ++o) std::fill_n(out.begin() + o * t_out, t_out, b[o]);
  gemm(false, false, c_out, t_out, rows, Scalar(1), weight.data().data(), rows, col_ptr, t_out,
       Scalar(1), out.data(), t_out);

  if (!grad_enabled()) columns.reset();
  return Tensor::make_result(
      {c_out, t_out}, std::move(out), {x, weight, bias},
      [=](const Node& self) {
        const Scalar* gy = self.grad.data();
        const Scalar* cols = direct ? self.inputs[0]->value.data() : columns->data();
        if (wants_grad(self, 1)) {
          auto& gw = self.inputs[1]->grad_buffer();
          gemm(false, true, c_out, rows, t_out, Scalar(1), gy, t_out, cols, t_out, Scalar(1),
               gw.data(), rows);
        }
        if (wants_grad(self, 2)) {
          auto& gb = self.inputs[2]->grad_buffer();
          for (std::size_t o = 0; o < c_out; ++o) {
            Scalar acc = 0;
            for (std::size_t t = 0; t < t_out; ++t) acc += gy[o * t_out + t];
            gb[o] += acc;
          }
        }
        if (wants_grad(self, 0)) {
          auto& gx = self.inputs[0]->grad_buffer();
          const auto& wv = self.inputs[1]->value;
          if (direct) {
            gemm(true, false, rows, t_out, c_out, Scalar(1), wv.data(), rows, gy, t_out,
                 Scalar(1), gx.data(), t_out);
            return;
          }
          std::vector<Scalar> gcols(rows * t_out, Scalar(0));
          gemm(true, false, rows, t_out, c_out, Scalar(1), wv.data(), rows, gy, t_out, Scalar(0),
               gcols.data(), t_out);
          for (std::size_t i = 0; i < c_in; ++i) {
            for (std::size_t j = 0; j < kernel; ++j) {
              const Scalar* src = gcols.data() + (i * kernel + j) * t_out;
              const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j * dilation) -
                                           static_cast<std::ptrdiff_t>(padding);
              for (std::size_t t = 0; t < t_out; ++t) {
                const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(t * stride) + shift;
                if (dst >= 0 && dst < static_cast<std::ptrdiff_t>(length)) {
                  gx[i * length + static_cast<std::size_t>(dst)] += src[t];
                }
              }
            }
          }
        }
      });
}

ChannelStats channel_stats(const Tensor& x, Scalar eps) {
  require_rank("channel_stats", x, 2);
  const std::size_t channels = x.dim(0);
  const std::size_t frames = x.dim(1);
  if (frames == 0) throw ShapeError("channel statistics of an empty time axis");
  const auto v = x.data();
  ChannelStats stats;
  stats.mean.resize(channels);
  stats.std.resize(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar* row = v.data() + c * frames;
    Scalar mu = 0;
    for (std::size_t t = 0; t < frames; ++t) mu += row[t];
    mu /= static_cast<Scalar>(frames);
    Scalar var = 0;
    for (std::size_t t = 0; t < frames; ++t) var += (row[t] - mu) * (row[t] - mu);
    var /= static_cast<Scalar>(frames);
    stats.mean[c] = mu;
    stats.std[c] = std::sqrt(var + eps);
  }
  return stats;
}

namespace {

// Shared backward of the normalization x_hat = (x - mu) / sigma given the
// gradient with respect to x_hat.
void normalize_backward(const std::vector<Scalar>& x_hat, const std::vector<Scalar>& sigma,
                        const std::vector<Scalar>& g_hat, std::size_t channels,
                        std::size_t frames, std::vector<Scalar>& gx) {
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(frames);
  for (std::size_t c = 0; c < channels; ++c) {
    const std::size_t base = c * frames;
    Scalar mean_g = 0;
    Scalar mean_gy = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      mean_g += g_hat[base + t];
      mean_gy += g_hat[base + t] * x_hat[base + t];
    }
    mean_g *= inv_n;
    mean_gy *= inv_n;
    const Scalar inv_sigma = Scalar(1) / sigma[c];
    for (std::size_t t = 0; t < frames; ++t) {
      gx[base + t] += inv_sigma * (g_hat[base + t] - mean_g - x_hat[base + t] * mean_gy);
    }
  }
}

std::vector<Scalar> normalize(const Tensor& x, const ChannelStats& stats) {
  const std::size_t channels = x.dim(0);
  const std::size_t frames = x.dim(1);
  const auto v = x.data();
  std::vector<Scalar> out(v.size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < frames; ++t) {
      out[c * frames + t] = (v[c * frames + t] - stats.mean[c]) / stats.std[c];
    }
  }
  return out;
}

}  // namespace

std::pair<Tensor, ChannelStats> instance_norm(const Tensor& x, Scalar eps) {
  if (!(eps > 0)) throw std::invalid_argument("instance_norm: eps must be positive");
  auto stats = channel_stats(x, eps);
  const std::size_t channels = x.dim(0);
  const std::size_t frames = x.dim(1);
  auto out = normalize(x, stats);
  auto sigma = stats.std;
  auto y = Tensor::make_result(
      x.shape(), std::move(out), {x}, [channels, frames, sigma](const Node& self) {
        auto& gx = self.inputs[0]->grad_buffer();
        normalize_backward(self.value, sigma, self.grad, channels, frames, gx);
      });
  return {std::move(y), std::move(stats)};
}

Tensor adain(const Tensor& x, const Tensor& alpha, const Tensor& beta, Scalar eps) {
  if (!(eps > 0)) throw std::invalid_argument("adain: eps must be positive");
  require_rank("adain input", x, 2);
  const std::size_t channels = x.dim(0);
  const std::size_t frames = x.dim(1);
  if (alpha.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw ShapeError("adain: feature map has " + std::to_string(channels) +
                     " channels but alpha/beta are " + shape_to_string(alpha.shape()) + "/" +
                     shape_to_string(beta.shape()));
  }
  const auto stats = channel_stats(x, eps);
  auto x_hat = std::make_shared<std::vector<Scalar>>(normalize(x, stats));
  const auto a = alpha.data();
  const auto b = beta.data();
  std::vector<Scalar> out(x_hat->size());
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t t = 0; t < frames; ++t) {
      out[c * frames + t] = b[c] * (*x_hat)[c * frames + t] + a[c];
    }
  }
  auto sigma = stats.std;
  return Tensor::make_result(
      x.shape(), std::move(out), {x, alpha, beta},
      [channels, frames, sigma, x_hat](const Node& self) {
        const auto& bv = self.inputs[2]->value;
        if (wants_grad(self, 1)) {
          auto& ga = self.inputs[1]->grad_buffer();
          for (std::size_t c = 0; c < channels; ++c) {
            Scalar acc = 0;
            for (std::size_t t = 0; t < frames; ++t) acc += self.grad[c * frames + t];
            ga[c] += acc;
          }
        }
        if (wants_grad(self, 2)) {
          auto& gb = self.inputs[2]->grad_buffer();
          for (std::size_t c = 0; c < channels; ++c) {
            Scalar acc = 0;
            for (std::size_t t = 0; t < frames; ++t) {
              acc += self.grad[c * frames + t] * (*x_hat)[c * frames + t];
            }
            gb[c] += acc;
          }
        }
        if (wants_grad(self, 0)) {
          std::vector<Scalar> g_hat(self.grad.size());
          for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t t = 0; t < frames; ++t) {
              g_hat[c * frames + t] = self.grad[c * frames + t] * bv[c];
            }
          }
          normalize_backward(*x_hat, sigma, g_hat, channels, frames,
                             self.inputs[0]->grad_buffer());
        }
      });
}

MAINVC_NAMESPACE_END
