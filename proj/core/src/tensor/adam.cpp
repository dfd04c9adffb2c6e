#include "mainvc/tensor/adam.hpp"

#include <cmath>

MAINVC_NAMESPACE_BEGIN

void adam_update(std::span<Scalar> param, std::span<const Scalar> grad, AdamMoments& moments,
                 const AdamConfig& config, std::uint64_t step) {
  if (grad.size() != param.size() || moments.m.size() != param.size() ||
      moments.v.size() != param.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
  }
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  const auto b1 = static_cast<Scalar>(config.beta1);
  const auto b2 = static_cast<Scalar>(config.beta2);
  const auto lr = static_cast<Scalar>(config.lr);
  const auto eps = static_cast<Scalar>(config.eps);
  const auto inv_bc1 = static_cast<Scalar>(1.0 / bc1);
  const auto inv_bc2 = static_cast<Scalar>(1.0 / bc2);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const Scalar g = grad[i];
    moments.m[i] = b1 * moments.m[i] + (Scalar(1) - b1) * g;
    moments.v[i] = b2 * moments.v[i] + (Scalar(1) - b2) * g * g;
    const Scalar m_hat = moments.m[i] * inv_bc1;
    const Scalar v_hat = moments.v[i] * inv_bc2;
    param[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

Adam::Adam(NamedParameters params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  moments_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    moments_.push_back({std::vector<Scalar>(p.numel(), Scalar(0)),
                        std::vector<Scalar>(p.numel(), Scalar(0))});
  }
}

void Adam::step() {
  ++t_;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    if (!p.has_grad()) continue;
    adam_update(p.mutable_data(), p.grad(), moments_[i], config_, t_);
  }
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

MAINVC_NAMESPACE_END
