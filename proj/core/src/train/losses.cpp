#include "mainvc/train/losses.hpp"

#include <algorithm>

#include "mainvc/tensor/ops.hpp"

MAINVC_NAMESPACE_BEGIN

namespace {

// |x| as leaky_relu(x, -1).
Tensor abs_value(const Tensor& x) { return leaky_relu(x, Scalar(-1)); }

}  // namespace

Tensor recon_loss(const Tensor& z, const Tensor& z_hat) {
  if (z.shape() != z_hat.shape()) {
    throw ShapeError("recon_loss: " + shape_to_string(z.shape()) + " vs " +
                     shape_to_string(z_hat.shape()));
  }
  return mean(abs_value(sub(z_hat, z)));
}

Tensor kl_loss(const Tensor& content) { return mean(square(content)); }

LossWeights lambda_schedule(std::uint64_t step, std::uint64_t warmup_steps) {
  LossWeights w;
  const double ramp = warmup_steps == 0
                          ? 1.0
                          : std::min(1.0, static_cast<double>(step) /
                                              static_cast<double>(warmup_steps));
  w.lambda1 = ramp;
  w.lambda3 = ramp;
  return w;
}

MAINVC_NAMESPACE_END
