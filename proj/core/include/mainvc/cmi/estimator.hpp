#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mainvc/model/layers.hpp"
#include "mainvc/tensor/adam.hpp"
#include "mainvc/tensor/tensor.hpp"

MAINVC_NAMESPACE_BEGIN

struct CmiConfig {
  std::size_t content_dim = 64;  // d_c
  std::size_t code_dim = 1024;   // d_s
  std::size_t q_hidden = 64;
  std::size_t t_hidden = 64;
  double logvar_limit = 10.0;
  double lr = 2e-4;
  std::size_t inner_steps = 5;
  /// Use the MINE lower bound and the ordering hinge (off for ablation M2).
  bool use_lower_bound = true;
  /// Moving-average denominator for the MINE gradient.
  bool mine_ema = false;
  double mine_ema_rate = 0.01;
  /// Negates mi_loss (the numerator/denominator order as typeset).
  bool mi_sign_as_printed = false;
  bool operator==(const CmiConfig&) const = default;
};

/// A batch of N samples: content frames stacked as rows ordered (n, l), and one
/// speaker-code row per sample.
struct CodeBatch {
  Tensor content;  // [N*L x d_c]
  Tensor speaker;  // [N x d_s]
  std::size_t samples = 0;
  std::size_t frames = 0;
};

/// Builds a batch from per-sample content codes [d_c x L] and flat speaker
/// codes [d_s]. Graph history is kept.
CodeBatch stack_codes(const std::vector<Tensor>& content, const std::vector<Tensor>& speaker);
CodeBatch detach(const CodeBatch& batch);

struct MIEstimates {
  double upper = 0.0;
  double lower = 0.0;
  double q_nll = 0.0;
  double t_loss = 0.0;
  double gap_penalty = 0.0;
  bool skipped = false;
  bool operator==(const MIEstimates&) const = default;
};

struct Mlp {
  std::vector<LinearLayer> layers;
  double slope = 0.2;

  Mlp() = default;
  Mlp(const std::vector<std::size_t>& sizes, Rng& rng);
  Tensor forward(const Tensor& x) const;
  Mlp detached() const;
  std::size_t param_count() const;
  void collect(const std::string& prefix, NamedParameters& out) const;
};

/// Diagonal Gaussian Q(z_C | z_S) with separate mean and log-variance networks.
struct VariationalQNet {
  Mlp mean_net;
  Mlp logvar_net;
  double logvar_limit = 10.0;

  /// Means and clamped log-variances, each [N x d_c], for codes [N x d_s].
  std::pair<Tensor, Tensor> forward(const Tensor& codes) const;
  VariationalQNet detached() const;
};

/// T(z_C frame, z_S) -> scalar.
struct StatisticsNet {
  Mlp net;
  /// Scores rows of [M x (d_c + d_s)].
  Tensor forward(const Tensor& pairs) const { return net.forward(pairs); }
};

/// log Q(x | z) for one frame x [d_c] and one code z [d_s].
Tensor q_log_prob(const VariationalQNet& q, const Tensor& frame, const Tensor& code);

/// Positive-pair mean of log Q over all N*L frames.
Tensor q_positive_mean(const VariationalQNet& q, const CodeBatch& batch);
/// (1/(N L)) sum log Q(pos) - (1/(N^2 L)) sum over all (m, n, l) of log Q(z_C[m,l] | z_S[n]).
Tensor club_upper(const VariationalQNet& q, const CodeBatch& batch);
/// Cyclic permutation of [0, n) without fixed points (Sattolo), keyed by seed.
std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed);
/// mean T(joint) - log mean exp T(marginal). Throws std::invalid_argument for N < 2.
Tensor mine_lower(const StatisticsNet& t, const CodeBatch& batch, std::uint64_t shuffle_seed);

class CmiEstimator {
 public:
  CmiEstimator(CmiConfig config, std::uint64_t seed);

  const CmiConfig& config() const noexcept { return config_; }
  const VariationalQNet& q() const noexcept { return q_; }
  const StatisticsNet& t() const noexcept { return t_; }

  /// One optimization step of q_nll + t_loss + gap_penalty on a detached batch.
  /// A non-finite loss leaves every parameter untouched and sets `skipped`.
  MIEstimates train_step(const CodeBatch& batch, std::uint64_t shuffle_seed);
  /// Estimates without updating anything.
  MIEstimates evaluate(const CodeBatch& batch, std::uint64_t shuffle_seed) const;
  /// vCLUB sample estimate under a frozen Q; gradients reach only the codes.
  Tensor mi_loss(const CodeBatch& batch) const;

  NamedParameters named_parameters() const;
  std::size_t param_count() const;
  Adam& optimizer() noexcept { return adam_; }
  const Adam& optimizer() const noexcept { return adam_; }
  double mine_ema_value() const noexcept { return ema_; }
  void set_mine_ema_value(double v) noexcept { ema_ = v; }
  void zero_grad();

 private:
  CmiConfig config_;
  VariationalQNet q_;
  StatisticsNet t_;
  Adam adam_;
  double ema_ = 0.0;
};

MAINVC_NAMESPACE_END
