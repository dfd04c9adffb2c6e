#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mainvc/random.hpp"
#include "mainvc/tensor/adam.hpp"
#include "mainvc/tensor/tensor.hpp"

MAINVC_NAMESPACE_BEGIN

/// Uniform(-bound, bound) initialized tensor with bound = gain / sqrt(fan_in).
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng, double gain = 1.0);

struct Conv1dLayer {
  Tensor weight;  // [out x in x k]
  Tensor bias;    // [out]
  std::size_t dilation = 1;
  std::size_t padding = 0;

  Conv1dLayer() = default;
  /// Same-padded convolution (padding = dilation * (k - 1) / 2).
  Conv1dLayer(std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const { return weight.numel() + bias.numel(); }
  void collect(const std::string& prefix, NamedParameters& out) const;
};

struct LinearLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out, Rng& rng);
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const { return weight.numel() + bias.numel(); }
  void collect(const std::string& prefix, NamedParameters& out) const;
};

/// Parallel kernel-3 branches with distinct dilations, concatenated along
/// channels, projected back by a 1x1 convolution and added to the input.
struct ApcBlock {
  std::vector<Conv1dLayer> branches;
  Conv1dLayer projection;

  ApcBlock() = default;
  ApcBlock(std::size_t channels, const std::vector<std::size_t>& dilations, std::size_t kernel,
           Rng& rng);
  /// Requires T >= 2 * max dilation + 1.
  Tensor forward(const Tensor& x) const;
  std::size_t param_count() const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

/// Closed-form parameter count of one APC block.
std::size_t apc_param_count(std::size_t channels, std::size_t n_dilations, std::size_t kernel);

MAINVC_NAMESPACE_END
