#include "criteria.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "mainvc/cmi/estimator.hpp"
#include "mainvc/eval/embedding.hpp"
#include "mainvc/eval/mcd.hpp"
#include "mainvc/model/srd_network.hpp"
#include "mainvc/tensor/ops.hpp"
#include "mainvc/train/checkpoint.hpp"

namespace mainvc::acceptance {

namespace {

using testing::TempDir;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

struct RowStats {
  double mean = 0.0;
  double std = 0.0;
};

// Population statistics of row c of a [C x T] tensor, in double.
RowStats row_stats(const Tensor& x, std::size_t c) {
  const std::size_t t = x.dim(1);
  const auto d = x.data();
  double m = 0.0;
  for (std::size_t j = 0; j < t; ++j) m += d[c * t + j];
  m /= static_cast<double>(t);
  double v = 0.0;
  for (std::size_t j = 0; j < t; ++j) v += (d[c * t + j] - m) * (d[c * t + j] - m);
  return {m, std::sqrt(v / static_cast<double>(t))};
}

Tensor affine_rows(std::size_t c, std::size_t t, Rng& rng) {
  std::vector<Scalar> v(c * t);
  for (std::size_t i = 0; i < c; ++i) {
    const double s = rng.uniform(0.5, 5.0);
    const double b = rng.uniform(-10.0, 10.0);
    for (std::size_t j = 0; j < t; ++j) v[i * t + j] = static_cast<Scalar>(b + s * rng.normal());
  }
  return Tensor::from({c, t}, v);
}

CodeBatch gaussian_batch(std::size_t n, double rho, std::size_t d, Rng& rng) {
  std::vector<Scalar> x(n * d);
  std::vector<Scalar> y(n * d);
  for (std::size_t i = 0; i < n * d; ++i) {
    const double a = rng.normal();
    const double b = rng.normal();
    y[i] = static_cast<Scalar>(a);
    x[i] = static_cast<Scalar>(rho * a + std::sqrt(1.0 - rho * rho) * b);
  }
  CodeBatch cb;
  cb.content = Tensor::from({n, d}, x);
  cb.speaker = Tensor::from({n, d}, y);
  cb.samples = n;
  cb.frames = 1;
  return cb;
}

double mean_of(const std::vector<double>& v, std::size_t from) {
  double acc = 0.0;
  for (std::size_t i = from; i < v.size(); ++i) acc += v[i];
  return acc / static_cast<double>(v.size() - from);
}

}  // namespace

Outcome gradient_suite() {
  const auto start = Clock::now();
  const auto results = checks::run_gradient_suite(20, 2024);
  const double secs = seconds_since(start);
  int failures = 0;
  double worst = 0.0;
  std::string worst_op;
  for (const auto& r : results) {
    failures += r.failures;
    if (r.worst_error >= worst) {
      worst = r.worst_error;
      worst_op = r.op;
    }
  }
  const bool pass = failures == 0 && secs < 120.0 && !results.empty();
  return {pass, fmt("%zu primitives x 20 cases, %d failing cases, worst rel err %.2e (%s), %.1f s",
                    results.size(), failures, worst, worst_op.c_str(), secs)};
}

// AdaIN channel check against (alpha, |beta|). Every channel must satisfy the
// eps-aware identity std = |beta| sigma / sqrt(sigma^2 + eps); channels where
// the eps shrink |beta| eps / (2 sigma^2) is below 1e-5 must also match |beta|.
struct AdainCheck {
  double mean_err = 0.0;
  double exact_std_err = 0.0;
  double std_err = 0.0;
  std::size_t checked = 0;
  std::size_t channels = 0;

  void add(const Tensor& pre, const Tensor& out, std::size_t c, double alpha, double beta,
           double eps) {
    const auto in = row_stats(pre, c);
    const auto st = row_stats(out, c);
    const double var = in.std * in.std;
    mean_err = std::max(mean_err, std::abs(st.mean - alpha));
    exact_std_err = std::max(exact_std_err, std::abs(st.std - std::abs(beta) * in.std / std::sqrt(var + eps)));
    ++channels;
    if (std::abs(beta) * eps / (2.0 * var) < 1e-5) {
      std_err = std::max(std_err, std::abs(st.std - std::abs(beta)));
      ++checked;
    }
  }
  bool ok() const { return mean_err < 1e-4 && exact_std_err < 1e-4 && std_err < 1e-4 && checked > 0; }
};

Outcome normalization_stats() {
  constexpr double eps = 1e-5;
  Rng rng(11);
  double in_mean = 0.0;
  AdainCheck ops;
  for (int i = 0; i < 200; ++i) {
    const std::size_t c = 1 + rng.uniform_below(16);
    const std::size_t t = 2 + rng.uniform_below(255);
    const Tensor x = affine_rows(c, t, rng);
    const Tensor y = instance_norm(x, Scalar(eps)).first;
    std::vector<Scalar> a(c);
    std::vector<Scalar> b(c);
    for (auto& v : a) v = static_cast<Scalar>(2.0 * rng.normal());
    for (auto& v : b) v = static_cast<Scalar>(2.0 * rng.normal());
    const Tensor z = adain(x, Tensor::from({c}, a), Tensor::from({c}, b), Scalar(eps));
    for (std::size_t k = 0; k < c; ++k) {
      in_mean = std::max(in_mean, std::abs(row_stats(y, k).mean));
      ops.add(x, z, k, a[k], b[k], eps);
    }
  }

  // The same properties inside the network.
  SrdNetwork net(ModelConfig::small(), 5);
  double net_in = 0.0;
  AdainCheck layers;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Tensor z = testing::random_tensor({80, 128}, 100 + s, 1.5);
    FeatureTrace content_trace;
    const Tensor content = net.content_encode(z, &content_trace);
    for (const auto& m : content_trace.maps) {
      for (std::size_t k = 0; k < m.dim(0); ++k) net_in = std::max(net_in, std::abs(row_stats(m, k).mean));
    }
    const auto code = net.speaker_encode(testing::random_tensor({80, 128}, 200 + s, 1.5));
    FeatureTrace dec_trace;
    net.decode(content, code, &dec_trace);
    for (std::size_t l = 0; l < dec_trace.maps.size(); ++l) {
      for (std::size_t k = 0; k < dec_trace.maps[l].dim(0); ++k) {
        layers.add(dec_trace.inputs[l], dec_trace.maps[l], k, code.alpha.at(l, k),
                   code.beta.at(l, k), net.config().eps);
      }
    }
  }
  const bool pass = in_mean < 1e-5 && net_in < 1e-5 && ops.ok() && layers.ok();
  return {pass, fmt("IN |mean| %.1e (network %.1e); AdaIN |mean-alpha| %.1e, |std-|beta|| %.1e on "
                    "%zu/%zu channels, eps-aware std err %.1e; network AdaIN %.1e, %.1e on %zu/%zu, %.1e",
                    in_mean, net_in, ops.mean_err, ops.std_err, ops.checked, ops.channels,
                    ops.exact_std_err, layers.mean_err, layers.std_err, layers.checked,
                    layers.channels, layers.exact_std_err)};
}

Outcome gaussian_mi_bracket() {
  const auto start = Clock::now();
  constexpr std::size_t d = 4;
  constexpr std::size_t batch = 128;
  constexpr int steps = 3000;
  bool pass = true;
  std::ostringstream detail;
  for (double rho : {0.0, 0.3, 0.5, 0.7}) {
    CmiConfig cfg;
    cfg.content_dim = d;
    cfg.code_dim = d;
    CmiEstimator est(cfg, 11);
    Rng rng(derive_seed(5, static_cast<std::uint64_t>(rho * 10)));
    for (int s = 0; s < steps; ++s) est.train_step(gaussian_batch(batch, rho, d, rng), s);
    Rng eval_rng(derive_seed(99, static_cast<std::uint64_t>(rho * 10)));
    double upper = 0.0;
    double lower = 0.0;
    constexpr int kEvalBatches = 8;
    for (int r = 0; r < kEvalBatches; ++r) {
      const auto e = est.evaluate(gaussian_batch(2048, rho, d, eval_rng), 1000 + r);
      upper += e.upper / kEvalBatches;
      lower += e.lower / kEvalBatches;
    }
    const double truth = -0.5 * d * std::log(1.0 - rho * rho);
    const double residual = std::max(0.0, lower - upper);
    bool ok = upper >= truth - 0.1 && lower <= truth + 0.05 && residual < 0.02;
    if (rho >= 0.3) ok = ok && lower >= 0.6 * truth;
    pass = pass && ok;
    detail << fmt("rho %.1f: true %.3f, lower %.3f, upper %.3f%s; ", rho, truth, lower, upper,
                  ok ? "" : " (out of bracket)");
  }
  const double secs = seconds_since(start);
  pass = pass && secs < 300.0;
  detail << fmt("%d steps each, %.1f s", steps, secs);
  return {pass, detail.str()};
}

Outcome club_oracle() {
  const auto r = checks::run_club_oracle(50, 4, 3, 77);
  const bool pass = r.batches == 50 && r.club_max_abs_diff < 1e-6 && r.mi_max_abs_diff < 1e-6 &&
                    r.mi_vs_club_max_abs_diff < 1e-6;
  return {pass, fmt("%d random batches (N=4, L=3): |club - oracle| %.1e, |mi_loss - oracle| %.1e",
                    r.batches, r.club_max_abs_diff, r.mi_max_abs_diff)};
}

Outcome shuffle_and_siamese() {
  Rng rng(3);
  int broken = 0;
  constexpr int kShuffles = 100000;
  for (int i = 0; i < kShuffles; ++i) {
    const std::size_t t = 1 + rng.uniform_below(64);
    const std::size_t chunk = 1 + rng.uniform_below(t + 4);
    std::vector<Scalar> v(2 * t);
    for (auto& x : v) x = static_cast<Scalar>(rng.uniform_below(8));
    const Tensor z = Tensor::from({2, t}, v);
    const Tensor s = time_shuffle(z, chunk, static_cast<std::uint64_t>(i));
    std::vector<std::pair<Scalar, Scalar>> before;
    std::vector<std::pair<Scalar, Scalar>> after;
    for (std::size_t j = 0; j < t; ++j) {
      before.emplace_back(z.at(0, j), z.at(1, j));
      after.emplace_back(s.at(0, j), s.at(1, j));
    }
    std::sort(before.begin(), before.end());
    std::sort(after.begin(), after.end());
    if (before != after) ++broken;
  }

  double self = 0.0;
  double lo = 2.0;
  double hi = 0.0;
  double scale_err = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = 1 + rng.uniform_below(64);
    const Tensor e1 = testing::random_tensor({n}, 5000 + i);
    const Tensor e2 = i % 4 == 0 ? scale(e1, Scalar(-1)) : testing::random_tensor({n}, 9000 + i);
    const double a = std::exp(rng.uniform(-4.0, 4.0));
    self = std::max(self, std::abs(static_cast<double>(siamese_loss(e1, e1).item())));
    const double l = siamese_loss(e1, e2).item();
    lo = std::min(lo, l);
    hi = std::max(hi, l);
    scale_err = std::max(scale_err, std::abs(siamese_loss(scale(e1, static_cast<Scalar>(a)), e2).item() - l));
  }
  const bool pass = broken == 0 && self < 1e-6 && lo >= 0.0 && hi <= 2.0 && scale_err < 1e-6;
  return {pass, fmt("%d/%d shuffles broke the frame multiset; siamese(e,e) %.1e, range [%.4f, %.4f], "
                    "scale error %.1e",
                    broken, kShuffles, self, lo, hi, scale_err)};
}

Outcome tiny_overfit() {
  const auto start = Clock::now();
  TempDir dir("overfit");
  const auto data = testing::make_synthetic_data(dir.path(), 1, 2);
  Trainer trainer(ModelConfig::small(), audio::MelConfig{}, testing::desk_train_config(1, 2000),
                  data.stats);
  double step10 = 0.0;
  std::vector<double> recon;
  double worst_total = 0.0;
  int leaks = 0;
  while (trainer.steps_done() < 2000) {
    StepProbe probe;
    const auto r = trainer.step(data.manifest, data.cache, &probe);
    if (r.aborted) return {false, fmt("step %llu aborted", static_cast<unsigned long long>(r.step))};
    if (probe.model_grad_after_phase1 || probe.cmi_grad_after_phase2) ++leaks;
    const double sum = r.recon + r.lambda1 * r.kl + r.lambda2 * r.siamese + r.lambda3 * r.mi;
    worst_total = std::max(worst_total, std::abs(r.total - sum) / std::max(1.0, std::abs(sum)));
    if (r.step == 10) step10 = r.recon;
    recon.push_back(r.recon);
  }
  const double final_recon = mean_of(recon, recon.size() - 10);
  const double ratio = final_recon / step10;
  const double secs = seconds_since(start);
  const bool pass = ratio < 0.2 && worst_total < 1e-6 && leaks == 0 && secs < 900.0;
  return {pass, fmt("recon %.4f at step 10 -> %.4f (mean of last 10 steps), ratio %.3f; "
                    "max |total - weighted sum| %.1e; %d gradient-isolation violations; %.0f s",
                    step10, final_recon, ratio, worst_total, leaks, secs)};
}

Outcome disentanglement_smoke() {
  TempDir dir("disentangle");
  const auto data = testing::make_synthetic_data(dir.path(), 4, 4);
  std::ostringstream detail;
  int full_wins = 0;
  bool margins_ok = true;
  for (std::uint64_t seed : {1, 2, 3}) {
    double margin[2] = {0.0, 0.0};
    for (int variant = 0; variant < 2; ++variant) {
      auto cfg = testing::desk_train_config(seed, 2000);
      cfg.ablation = variant == 0 ? Ablation::none : Ablation::m1;
      Trainer trainer(ModelConfig::small(), audio::MelConfig{}, cfg, data.stats);
      while (trainer.steps_done() < cfg.total_steps) trainer.step(data.manifest, data.cache);
      const auto report = embedding_report(
          extract_embeddings(trainer.model(), data.manifest, data.cache, data.stats));
      margin[variant] = report.margin();
    }
    margins_ok = margins_ok && margin[0] >= 0.1;
    if (margin[0] >= margin[1]) ++full_wins;
    detail << fmt("seed %llu: full %.3f, M1 %.3f; ", static_cast<unsigned long long>(seed),
                  margin[0], margin[1]);
  }
  detail << fmt("full >= M1 in %d of 3", full_wins);
  return {margins_ok && full_wins >= 2, detail.str()};
}

Outcome lightweight_accounting() {
  const SrdNetwork net(ModelConfig::reference(), 1);
  const auto report = lightweight_report(net, 0, 1);
  const auto analytic = analytic_param_count(ModelConfig::reference());
  std::size_t named = 0;
  for (const auto& [name, p] : net.named_parameters()) named += p.numel();
  const std::size_t total = report.headline();
  const bool count_ok = total >= 800000 && total <= 1800000 && report.conversion_path.sibling_extra == 0 &&
                        analytic.total() == total && named == total;
  std::printf("%s", report.to_text().c_str());

  const eval::Cepstra ref{std::vector<double>(eval::kMcdOrder, 0.0)};
  eval::Cepstra hyp = ref;
  hyp[0][0] = 3.0;
  hyp[0][1] = 4.0;
  const double expected = 10.0 / std::numbers::ln10 * std::numbers::sqrt2 * 5.0;
  const double got = eval::mcd_from_cepstra(ref, hyp, false).value;
  const double got_dtw = eval::mcd_from_cepstra(ref, hyp, true).value;
  const bool mcd_ok = std::abs(got - expected) < 1e-9 && std::abs(got_dtw - expected) < 1e-9;
  return {count_ok && mcd_ok,
          fmt("reference conversion path %zu parameters (published figure 1.31M), sibling extra %zu; "
              "single-frame MCD %.9f dB vs closed form %.9f dB",
              total, report.conversion_path.sibling_extra, got, expected)};
}

Outcome determinism() {
  TempDir dir("determinism");
  const auto data = testing::make_synthetic_data(dir.path(), 2, 3, 4, 3.0);
  const auto cfg = testing::desk_train_config(7, 201);
  const auto run = [&](std::uint64_t steps) {
    Trainer t(ModelConfig::small(), audio::MelConfig{}, cfg, data.stats);
    std::vector<LossReport> out;
    while (t.steps_done() < steps) out.push_back(t.step(data.manifest, data.cache));
    return out;
  };
  const auto a = run(200);
  const auto b = run(200);
  int mismatched = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i] == b[i])) ++mismatched;
  }

  Trainer straight(ModelConfig::small(), audio::MelConfig{}, cfg, data.stats);
  Trainer first(ModelConfig::small(), audio::MelConfig{}, cfg, data.stats);
  std::vector<LossReport> continuous;
  while (straight.steps_done() < 201) continuous.push_back(straight.step(data.manifest, data.cache));
  while (first.steps_done() < 100) first.step(data.manifest, data.cache);
  const auto ckpt = dir / "mid.ckpt";
  save_checkpoint(first, ckpt);
  Trainer resumed = load_checkpoint(ckpt);
  std::vector<LossReport> after;
  while (resumed.steps_done() < 201) after.push_back(resumed.step(data.manifest, data.cache));
  const bool next_equal = !after.empty() && after.front() == continuous[100];
  int resume_mismatch = 0;
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (!(after[i] == continuous[100 + i])) ++resume_mismatch;
  }
  const bool pass = a.size() == 200 && mismatched == 0 && next_equal && resume_mismatch == 0;
  return {pass, fmt("%d of 200 LossReports differ between seeded runs; resume at step 100: next step "
                    "%s, %d of %zu later reports differ",
                    mismatched, next_equal ? "bitwise equal" : "DIFFERS", resume_mismatch,
                    after.size())};
}

}  // namespace mainvc::acceptance
