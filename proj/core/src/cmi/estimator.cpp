#include "mainvc/cmi/estimator.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "mainvc/random.hpp"
#include "mainvc/tensor/ops.hpp"

MAINVC_NAMESPACE_BEGIN

namespace {

constexpr std::uint64_t kQStream = 0xC1;
constexpr std::uint64_t kTStream = 0xC2;
constexpr std::uint64_t kShuffleStream = 0xC3;
const Scalar kLog2Pi = static_cast<Scalar>(std::log(2.0 * std::numbers::pi));

void check_batch(const CodeBatch& b) {
  if (b.samples == 0 || b.frames == 0) throw std::invalid_argument("CMI: empty batch");
  if (b.content.rank() != 2 || b.content.dim(0) != b.samples * b.frames) {
    throw ShapeError("CMI: content batch must be [N*L x d_c], got " +
                     shape_to_string(b.content.shape()));
  }
  if (b.speaker.rank() != 2 || b.speaker.dim(0) != b.samples) {
    throw ShapeError("CMI: speaker batch must be [N x d_s], got " +
                     shape_to_string(b.speaker.shape()));
  }
}

// Sum of log Q(x[x_rows[i]] | code[code_rows[i]]) over i.
Tensor log_q_sum(const Tensor& x, const Tensor& mu, const Tensor& logvar,
                 const std::vector<std::size_t>& x_rows, const std::vector<std::size_t>& code_rows) {
  const Tensor xs = gather_rows(x, x_rows);
  const Tensor ms = gather_rows(mu, code_rows);
  const Tensor ls = gather_rows(logvar, code_rows);
  const Tensor quad = mul(square(sub(xs, ms)), exp(scale(ls, Scalar(-1))));
  return scale(sum(add_scalar(add(quad, ls), kLog2Pi)), Scalar(-0.5));
}

std::vector<std::size_t> owner_rows(std::size_t n, std::size_t l) {
  std::vector<std::size_t> rows(n * l);
  for (std::size_t r = 0; r < rows.size(); ++r) rows[r] = r / l;
  return rows;
}

struct ClubTerms {
  Tensor positive_mean;
  Tensor upper;
};

ClubTerms club_terms(const VariationalQNet& q, const CodeBatch& b) {
  check_batch(b);
  const std::size_t n = b.samples;
  const std::size_t l = b.frames;
  const std::size_t nl = n * l;
  auto [mu, logvar] = q.forward(b.speaker);

  std::vector<std::size_t> identity(nl);
  std::iota(identity.begin(), identity.end(), 0);
  const Tensor pos = log_q_sum(b.content, mu, logvar, identity, owner_rows(n, l));

  std::vector<std::size_t> x_rows;
  std::vector<std::size_t> code_rows;
  x_rows.reserve(n * nl);
  code_rows.reserve(n * nl);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t r = 0; r < nl; ++r) {
      x_rows.push_back(r);
      code_rows.push_back(c);
    }
  }
  const Tensor marg = log_q_sum(b.content, mu, logvar, x_rows, code_rows);

  ClubTerms t;
  t.positive_mean = scale(pos, Scalar(1.0 / static_cast<double>(nl)));
  t.upper = sub(t.positive_mean, scale(marg, Scalar(1.0 / static_cast<double>(n * nl))));
  return t;
}

struct MineTerms {
  Tensor lower;
  Tensor joint_mean;
  Tensor marginal_exp_mean;
};

MineTerms mine_terms(const StatisticsNet& t, const CodeBatch& b, std::uint64_t seed) {
  check_batch(b);
  if (b.samples < 2) throw std::invalid_argument("MINE lower bound needs at least 2 samples");
  const std::size_t nl = b.samples * b.frames;
  const auto owners = owner_rows(b.samples, b.frames);
  const auto perm = derangement(b.samples, seed);
  std::vector<std::size_t> shuffled(nl);
  for (std::size_t r = 0; r < nl; ++r) shuffled[r] = perm[owners[r]];

  const Tensor tj = t.forward(concat({b.content, gather_rows(b.speaker, owners)}, 1));
  const Tensor tm = t.forward(concat({b.content, gather_rows(b.speaker, shuffled)}, 1));
  MineTerms out;
  out.joint_mean = mean(tj);
  const Tensor log_mean_exp =
      add_scalar(logsumexp(tm), static_cast<Scalar>(-std::log(static_cast<double>(nl))));
  out.lower = sub(out.joint_mean, log_mean_exp);
  out.marginal_exp_mean = mean(exp(tm));
  return out;
}

double value(const Tensor& t) { return static_cast<double>(t.item()); }

}  // namespace

CodeBatch stack_codes(const std::vector<Tensor>& content, const std::vector<Tensor>& speaker) {
  if (content.empty() || content.size() != speaker.size()) {
    throw std::invalid_argument("stack_codes: need one speaker code per content code");
  }
  CodeBatch b;
  b.samples = content.size();
  b.frames = content.front().dim(1);
  std::vector<Tensor> rows;
  std::vector<Tensor> codes;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (content[i].rank() != 2 || content[i].dim(1) != b.frames) {
      throw ShapeError("stack_codes: content codes must share one frame count");
    }
    rows.push_back(transpose(content[i]));
    codes.push_back(reshape(speaker[i], {1, speaker[i].numel()}));
  }
  b.content = rows.size() == 1 ? rows.front() : concat(rows, 0);
  b.speaker = codes.size() == 1 ? codes.front() : concat(codes, 0);
  return b;
}

CodeBatch detach(const CodeBatch& batch) {
  CodeBatch out = batch;
  out.content = batch.content.detach();
  out.speaker = batch.speaker.detach();
  return out;
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, Rng& rng) {
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) layers.emplace_back(sizes[i], sizes[i + 1], rng);
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i].forward(h);
    if (i + 1 < layers.size()) h = leaky_relu(h, static_cast<Scalar>(slope));
  }
  return h;
}

Mlp Mlp::detached() const {
  Mlp out = *this;
  for (auto& layer : out.layers) {
    layer.weight = layer.weight.detach();
    layer.bias = layer.bias.detach();
  }
  return out;
}

std::size_t Mlp::param_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers) n += layer.param_count();
  return n;
}

void Mlp::collect(const std::string& prefix, NamedParameters& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".layer" + std::to_string(i), out);
  }
}

std::pair<Tensor, Tensor> VariationalQNet::forward(const Tensor& codes) const {
  const auto lim = static_cast<Scalar>(logvar_limit);
  return {mean_net.forward(codes), clamp(logvar_net.forward(codes), -lim, lim)};
}

VariationalQNet VariationalQNet::detached() const {
  return VariationalQNet{mean_net.detached(), logvar_net.detached(), logvar_limit};
}

Tensor q_log_prob(const VariationalQNet& q, const Tensor& frame, const Tensor& code) {
  const std::size_t d = frame.numel();
  auto [mu, logvar] = q.forward(reshape(code, {1, code.numel()}));
  if (mu.numel() != d) throw ShapeError("q_log_prob: frame dimension does not match Q");
  return log_q_sum(reshape(frame, {1, d}), mu, logvar, {0}, {0});
}

Tensor q_positive_mean(const VariationalQNet& q, const CodeBatch& batch) {
  return club_terms(q, batch).positive_mean;
}

Tensor club_upper(const VariationalQNet& q, const CodeBatch& batch) {
  return club_terms(q, batch).upper;
}

std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, kShuffleStream, n));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_below(i - 1);
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

Tensor mine_lower(const StatisticsNet& t, const CodeBatch& batch, std::uint64_t shuffle_seed) {
  return mine_terms(t, batch, shuffle_seed).lower;
}

CmiEstimator::CmiEstimator(CmiConfig config, std::uint64_t seed)
    : config_(config),
      adam_({}, AdamConfig{config.lr, 0.9, 0.99, 1e-6}) {
  Rng q_rng(derive_seed(seed, kQStream, 0));
  q_.mean_net = Mlp({config_.code_dim, config_.q_hidden, config_.content_dim}, q_rng);
  q_.logvar_net = Mlp({config_.code_dim, config_.q_hidden, config_.content_dim}, q_rng);
  q_.logvar_limit = config_.logvar_limit;
  Rng t_rng(derive_seed(seed, kTStream, 0));
  t_.net = Mlp({config_.content_dim + config_.code_dim, config_.t_hidden, config_.t_hidden, 1},
               t_rng);
  adam_ = Adam(named_parameters(), adam_.config());
}

NamedParameters CmiEstimator::named_parameters() const {
  NamedParameters out;
  q_.mean_net.collect("cmi.q.mean", out);
  q_.logvar_net.collect("cmi.q.logvar", out);
  t_.net.collect("cmi.t", out);
  return out;
}

std::size_t CmiEstimator::param_count() const {
  return q_.mean_net.param_count() + q_.logvar_net.param_count() + t_.net.param_count();
}

void CmiEstimator::zero_grad() { adam_.zero_grad(); }

MIEstimates CmiEstimator::evaluate(const CodeBatch& batch, std::uint64_t shuffle_seed) const {
  NoGradGuard guard;
  const auto club = club_terms(q_, batch);
  MIEstimates est;
  est.upper = value(club.upper);
  est.q_nll = -value(club.positive_mean);
  if (config_.use_lower_bound) {
    est.lower = value(mine_terms(t_, batch, shuffle_seed).lower);
    est.t_loss = -est.lower;
    est.gap_penalty = std::max(0.0, est.lower - est.upper);
  }
  return est;
}

MIEstimates CmiEstimator::train_step(const CodeBatch& input, std::uint64_t shuffle_seed) {
  const CodeBatch batch = detach(input);
  adam_.zero_grad();
  const auto club = club_terms(q_, batch);
  MIEstimates est;
  est.upper = value(club.upper);
  est.q_nll = -value(club.positive_mean);
  Tensor loss = scale(club.positive_mean, Scalar(-1));
  if (config_.use_lower_bound) {
    const auto mine = mine_terms(t_, batch, shuffle_seed);
    const Tensor gap = leaky_relu(sub(mine.lower, club.upper.detach()), Scalar(0));
    est.lower = value(mine.lower);
    est.t_loss = -est.lower;
    est.gap_penalty = std::max(0.0, value(gap));
    Tensor lower_for_grad = mine.lower;
    if (config_.mine_ema) {
      const double m = value(mine.marginal_exp_mean);
      ema_ = ema_ == 0.0 ? m : (1.0 - config_.mine_ema_rate) * ema_ + config_.mine_ema_rate * m;
      if (std::isfinite(ema_) && ema_ > 0.0) {
        lower_for_grad =
            sub(mine.joint_mean, scale(mine.marginal_exp_mean, static_cast<Scalar>(1.0 / ema_)));
      }
    }
    loss = add(sub(loss, lower_for_grad), gap);
  }
  if (!std::isfinite(value(loss))) {
    est.skipped = true;
    return est;
  }
  loss.backward();
  adam_.step();
  return est;
}

Tensor CmiEstimator::mi_loss(const CodeBatch& batch) const {
  const Tensor estimate = club_upper(q_.detached(), batch);
  return config_.mi_sign_as_printed ? scale(estimate, Scalar(-1)) : estimate;
}

MAINVC_NAMESPACE_END
