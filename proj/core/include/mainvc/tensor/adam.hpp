#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mainvc/tensor/tensor.hpp"

MAINVC_NAMESPACE_BEGIN

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-6;
  bool operator==(const AdamConfig&) const = default;
};

/// First and second moment buffers for one parameter.
struct AdamMoments {
  std::vector<Scalar> m;
  std::vector<Scalar> v;
};

/// One bias-corrected Adam update of `param` in place. `step` is the
/// already-incremented step counter (>= 1).
void adam_update(std::span<Scalar> param, std::span<const Scalar> grad, AdamMoments& moments,
                 const AdamConfig& config, std::uint64_t step);

using NamedParameters = std::vector<std::pair<std::string, Tensor>>;

class Adam {
 public:
  Adam(NamedParameters params, AdamConfig config);

  /// Applies one update to every parameter that holds a gradient. Parameters
  /// without a gradient keep their value and moments.
  void step();
  void zero_grad();

  const AdamConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return t_; }
  void set_steps(std::uint64_t t) noexcept { t_ = t; }

  const NamedParameters& parameters() const noexcept { return params_; }
  std::vector<AdamMoments>& moments() noexcept { return moments_; }
  const std::vector<AdamMoments>& moments() const noexcept { return moments_; }

 private:
  NamedParameters params_;
  AdamConfig config_;
  std::vector<AdamMoments> moments_;
  std::uint64_t t_ = 0;
};

MAINVC_NAMESPACE_END
