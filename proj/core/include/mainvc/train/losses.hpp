#pragma once

#include <cstdint>

#include "mainvc/tensor/tensor.hpp"

MAINVC_NAMESPACE_BEGIN

/// Mean absolute difference over all elements. Throws ShapeError on mismatch.
Tensor recon_loss(const Tensor& z, const Tensor& z_hat);

/// Mean of squared content-code entries.
Tensor kl_loss(const Tensor& content);

struct LossWeights {
  double lambda1 = 0.0;
  double lambda2 = 1.0;
  double lambda3 = 0.0;
};

/// lambda2 stays 1; lambda1 and lambda3 ramp linearly from 0 to 1 over
/// `warmup_steps`, then hold. warmup_steps == 0 means no ramp.
LossWeights lambda_schedule(std::uint64_t step, std::uint64_t warmup_steps = 20000);

MAINVC_NAMESPACE_END
