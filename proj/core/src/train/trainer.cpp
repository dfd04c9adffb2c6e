#include "mainvc/train/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "mainvc/random.hpp"
#include "mainvc/tensor/ops.hpp"

MAINVC_NAMESPACE_BEGIN

namespace {

constexpr std::uint64_t kModelInitStream = 0x301;
constexpr std::uint64_t kCmiInitStream = 0x302;
constexpr std::uint64_t kDataStream = 0x303;
constexpr std::uint64_t kTimeShuffleStream = 0x304;
constexpr std::uint64_t kMineStream = 0x305;

bool any_nonzero_grad(const NamedParameters& params) {
  for (const auto& [name, p] : params) {
    for (Scalar g : p.grad()) {
      if (g != Scalar(0)) return true;
    }
  }
  return false;
}

double value(const Tensor& t) { return static_cast<double>(t.item()); }

}  // namespace

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::m1: return "m1";
    case Ablation::m2: return "m2";
    case Ablation::m3: return "m3";
  }
  return "none";
}

Ablation parse_ablation(const std::string& text) {
  std::string s = text;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "none" || s.empty()) return Ablation::none;
  if (s == "m1") return Ablation::m1;
  if (s == "m2") return Ablation::m2;
  if (s == "m3") return Ablation::m3;
  throw std::invalid_argument("unknown ablation '" + text + "' (expected m1, m2 or m3)");
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("TrainConfig: batch_size must be >= 2");
  if (inner_steps < 1) throw std::invalid_argument("TrainConfig: inner_steps must be >= 1");
  if (segment_frames == 0) throw std::invalid_argument("TrainConfig: segment_frames must be >= 1");
  if (!(adam.lr > 0.0) || !(cmi_lr > 0.0)) {
    throw std::invalid_argument("TrainConfig: learning rates must be positive");
  }
}

std::string LossReport::to_json() const {
  nlohmann::json j;
  j["step"] = step;
  j["recon"] = recon;
  j["kl"] = kl;
  j["siamese"] = siamese;
  j["mi"] = mi;
  j["total"] = total;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["lambda3"] = lambda3;
  j["cmi"] = {{"upper", cmi.upper},         {"lower", cmi.lower},
              {"q_nll", cmi.q_nll},         {"t_loss", cmi.t_loss},
              {"gap_penalty", cmi.gap_penalty}, {"skipped", cmi.skipped}};
  j["aborted"] = aborted;
  j["normalization"] = "element_mean";
  return j.dump();
}

Tensor mel_to_tensor(const audio::MelSpectrogram& mel) {
  std::vector<Scalar> values(mel.values.begin(), mel.values.end());
  return Tensor::from({mel.n_mels, mel.frames}, std::move(values));
}

audio::MelSpectrogram tensor_to_mel(const Tensor& t) {
  if (t.rank() != 2) throw ShapeError("tensor_to_mel expects [n_mels x T]");
  audio::MelSpectrogram mel;
  mel.n_mels = t.dim(0);
  mel.frames = t.dim(1);
  const auto data = t.data();
  mel.values.assign(data.begin(), data.end());
  return mel;
}

CmiConfig cmi_config_for(const ModelConfig& model, const TrainConfig& train) {
  CmiConfig c;
  c.content_dim = model.content_channels;
  c.code_dim = model.speaker_code_size();
  c.q_hidden = train.cmi_hidden;
  c.t_hidden = train.cmi_hidden;
  c.lr = train.cmi_lr;
  c.inner_steps = train.inner_steps;
  c.use_lower_bound = train.ablation != Ablation::m2;
  c.mine_ema = train.mine_ema;
  c.mi_sign_as_printed = train.mi_sign_as_printed;
  return c;
}

Trainer::Trainer(ModelConfig model, audio::MelConfig mel, TrainConfig train,
                 audio::NormStats stats)
    : mel_(std::move(mel)),
      train_(std::move(train)),
      stats_(std::move(stats)),
      model_(model, derive_seed(train_.seed, kModelInitStream, 0)),
      cmi_(cmi_config_for(model, train_), derive_seed(train_.seed, kCmiInitStream, 0)),
      adam_(model_.named_parameters(), train_.adam) {
  train_.validate();
  mel_.validate();
  if (model.n_mels != mel_.n_mels) {
    throw std::invalid_argument("model expects " + std::to_string(model.n_mels) +
                                " mel bins but the front end produces " +
                                std::to_string(mel_.n_mels));
  }
}

std::vector<TrainingExample> Trainer::make_batch(const audio::DatasetManifest& manifest,
                                                 const audio::MelCache& cache,
                                                 std::uint64_t step) const {
  std::vector<TrainingExample> batch;
  batch.reserve(train_.batch_size);
  for (std::size_t i = 0; i < train_.batch_size; ++i) {
    const auto seed = derive_seed(train_.seed, kDataStream, step * train_.batch_size + i);
    auto pair = audio::sample_pair(manifest, cache, seed, train_.segment_frames);
    if (!stats_.empty()) {
      pair.z = stats_.normalize(pair.z);
      pair.z_prime = stats_.normalize(pair.z_prime);
    }
    batch.push_back({mel_to_tensor(pair.z), mel_to_tensor(pair.z_prime)});
  }
  return batch;
}

LossReport Trainer::step(const audio::DatasetManifest& manifest, const audio::MelCache& cache,
                         StepProbe* probe) {
  return train_step(make_batch(manifest, cache, step_), probe);
}

LossReport Trainer::train_step(const std::vector<TrainingExample>& batch, StepProbe* probe) {
  if (batch.size() < 2) throw std::invalid_argument("train_step: batch size must be >= 2");
  const std::size_t n = batch.size();
  const bool use_cmi = train_.ablation != Ablation::m1;
  const bool use_siamese = train_.ablation != Ablation::m3;

  LossReport report;
  report.step = step_;
  const auto w = lambda_schedule(step_, train_.warmup_steps);
  report.lambda1 = w.lambda1;
  report.lambda2 = use_siamese ? w.lambda2 : 0.0;
  report.lambda3 = use_cmi ? w.lambda3 : 0.0;

  adam_.zero_grad();
  cmi_.zero_grad();

  std::vector<Tensor> recon_terms;
  std::vector<Tensor> kl_terms;
  std::vector<Tensor> siamese_terms;
  std::vector<Tensor> contents;
  std::vector<Tensor> codes;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = batch[i];
    const Tensor speaker_in =
        use_siamese ? time_shuffle(ex.z, model_.config().ts_chunk,
                                   derive_seed(train_.seed, kTimeShuffleStream, step_ * n + i))
                    : ex.z;
    const Tensor content = model_.content_encode(ex.z);
    const SpeakerCode code = model_.speaker_encode(speaker_in, SpeakerBranch::main);
    recon_terms.push_back(recon_loss(ex.z, model_.decode(content, code)));
    kl_terms.push_back(kl_loss(content));
    if (use_siamese) {
      const SpeakerCode sibling = model_.speaker_encode(ex.z_prime, SpeakerBranch::sibling);
      siamese_terms.push_back(siamese_loss(code.embedding, sibling.embedding));
    }
    if (use_cmi) {
      contents.push_back(content);
      codes.push_back(flatten_speaker_code(code));
    }
    if (probe) {
      probe->reconstruction_speaker_inputs.push_back(speaker_in);
      if (use_siamese) probe->siamese_inputs.push_back(ex.z_prime);
    }
  }
  const auto inv_n = static_cast<Scalar>(1.0 / static_cast<double>(n));
  const auto batch_mean = [&](const std::vector<Tensor>& terms) {
    Tensor acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return scale(acc, inv_n);
  };
  const Tensor recon = batch_mean(recon_terms);
  const Tensor kl = batch_mean(kl_terms);
  Tensor total = add(recon, scale(kl, static_cast<Scalar>(report.lambda1)));
  report.recon = value(recon);
  report.kl = value(kl);
  if (use_siamese) {
    const Tensor siamese = batch_mean(siamese_terms);
    report.siamese = value(siamese);
    total = add(total, scale(siamese, static_cast<Scalar>(report.lambda2)));
  }

  if (use_cmi) {
    // Phase 1: estimator updates on detached codes.
    const CodeBatch codes_batch = stack_codes(contents, codes);
    for (std::size_t k = 0; k < train_.inner_steps; ++k) {
      report.cmi = cmi_.train_step(
          codes_batch, derive_seed(train_.seed, kMineStream, step_ * train_.inner_steps + k));
    }
    if (probe) probe->model_grad_after_phase1 = any_nonzero_grad(adam_.parameters());
    cmi_.zero_grad();
    // Phase 2: MI penalty under the frozen variational network.
    const Tensor mi = cmi_.mi_loss(codes_batch);
    report.mi = value(mi);
    total = add(total, scale(mi, static_cast<Scalar>(report.lambda3)));
  }

  report.total = value(total);
  if (!std::isfinite(report.total)) {
    report.aborted = true;
    adam_.zero_grad();
    ++step_;
    return report;
  }
  total.backward();
  if (probe) probe->cmi_grad_after_phase2 = any_nonzero_grad(cmi_.named_parameters());
  adam_.step();
  ++step_;
  return report;
}

MAINVC_NAMESPACE_END
