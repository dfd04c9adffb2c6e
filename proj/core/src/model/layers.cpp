#include "mainvc/model/layers.hpp"

#include <algorithm>
#include <cmath>

#include "mainvc/tensor/ops.hpp"

MAINVC_NAMESPACE_BEGIN

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::vector<Scalar> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<Scalar>(rng.uniform(-bound, bound));
  return Tensor::from(std::move(shape), std::move(values), true);
}

Conv1dLayer::Conv1dLayer(std::size_t in, std::size_t out, std::size_t kernel,
                         std::size_t dilation_, Rng& rng)
    : dilation(dilation_), padding(dilation_ * (kernel - 1) / 2) {
  weight = init_uniform({out, in, kernel}, in * kernel, rng);
  bias = init_uniform({out}, in * kernel, rng);
}

Tensor Conv1dLayer::forward(const Tensor& x) const {
  return conv1d(x, weight, bias, 1, dilation, padding);
}

void Conv1dLayer::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

LinearLayer::LinearLayer(std::size_t in, std::size_t out, Rng& rng) {
  weight = init_uniform({out, in}, in, rng);
  bias = init_uniform({out}, in, rng);
}

Tensor LinearLayer::forward(const Tensor& x) const { return linear(x, weight, bias); }

void LinearLayer::collect(const std::string& prefix, NamedParameters& out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

ApcBlock::ApcBlock(std::size_t channels, const std::vector<std::size_t>& dilations,
                   std::size_t kernel, Rng& rng) {
  for (auto d : dilations) branches.emplace_back(channels, channels, kernel, d, rng);
  projection = Conv1dLayer(dilations.size() * channels, channels, 1, 1, rng);
}

Tensor ApcBlock::forward(const Tensor& x) const {
  std::size_t max_d = 0;
  for (const auto& b : branches) max_d = std::max(max_d, b.dilation);
  if (x.rank() != 2 || x.dim(1) < 2 * max_d + 1) {
    throw ShapeError("APC block needs at least " + std::to_string(2 * max_d + 1) +
                     " frames, got " + shape_to_string(x.shape()));
  }
  std::vector<Tensor> outs;
  outs.reserve(branches.size());
  for (const auto& b : branches) outs.push_back(b.forward(x));
  return add(projection.forward(concat(outs, 0)), x);
}

std::size_t ApcBlock::param_count() const {
  std::size_t n = projection.param_count();
  for (const auto& b : branches) n += b.param_count();
  return n;
}

void ApcBlock::collect(const std::string& prefix, NamedParameters& out) const {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    branches[i].collect(prefix + ".branch" + std::to_string(i), out);
  }
  projection.collect(prefix + ".projection", out);
}

std::size_t apc_param_count(std::size_t channels, std::size_t n_dilations, std::size_t kernel) {
  const std::size_t c = channels;
  return n_dilations * (c * c * kernel + c) + (n_dilations * c) * c + c;
}

MAINVC_NAMESPACE_END
