#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "mainvc/tensor/tensor.hpp"

MAINVC_NAMESPACE_BEGIN

// Elementwise arithmetic on equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Scalar factor);
Tensor add_scalar(const Tensor& x, Scalar offset);

// Elementwise functions.
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor log(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor leaky_relu(const Tensor& x, Scalar slope = Scalar(0.2));
/// Hard clamp; gradient is zero where the input lies outside [lo, hi].
Tensor clamp(const Tensor& x, Scalar lo, Scalar hi);

// Reductions.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sum over the rows of a matrix: [R x C] -> [C].
Tensor sum_rows(const Tensor& x);
/// Average pooling over time: [C x T] -> [C].
Tensor mean_time(const Tensor& x);
/// log(sum(exp(x))) over all elements, computed with the max shift.
Tensor logsumexp(const Tensor& x);

// Structure.
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);
/// Concatenate vectors (axis 0) or matrices along rows (axis 0) / columns (axis 1).
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& rows);
Tensor gather_cols(const Tensor& x, const std::vector<std::size_t>& cols);
/// Repeat a vector [C] as R rows: [R x C].
Tensor broadcast_rows(const Tensor& v, std::size_t rows);

// Layers.
/// y = x W^T + b for x of shape [in] or [N x in], W [out x in], b [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// 1-D cross-correlation: x [C_in x T], weight [C_out x C_in x k], bias [C_out].
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              std::size_t stride = 1, std::size_t dilation = 1, std::size_t padding = 0);

/// Output length of conv1d for the given geometry.
std::size_t conv1d_output_length(std::size_t length, std::size_t kernel, std::size_t stride,
                                 std::size_t dilation, std::size_t padding);

struct ChannelStats {
  std::vector<Scalar> mean;
  std::vector<Scalar> std;  // sqrt(biased variance + eps)
};

/// Per-channel standardization over time with no learned affine.
std::pair<Tensor, ChannelStats> instance_norm(const Tensor& x, Scalar eps);

/// Instance norm followed by the per-channel affine beta * x_hat + alpha.
Tensor adain(const Tensor& x, const Tensor& alpha, const Tensor& beta, Scalar eps);

/// Channel statistics of a [C x T] map without building graph history.
ChannelStats channel_stats(const Tensor& x, Scalar eps = Scalar(0));

MAINVC_NAMESPACE_END
