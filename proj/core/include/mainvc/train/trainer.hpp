#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mainvc/audio/dataset.hpp"
#include "mainvc/audio/mel.hpp"
#include "mainvc/cmi/estimator.hpp"
#include "mainvc/model/srd_network.hpp"
#include "mainvc/train/losses.hpp"

MAINVC_NAMESPACE_BEGIN

enum class Ablation {
  none,
  m1,  // no CMI
  m2,  // no MINE lower bound
  m3,  // no Siamese branch, no time shuffle
};

std::string to_string(Ablation a);
/// Accepts "none", "m1", "m2", "m3" (case-insensitive).
Ablation parse_ablation(const std::string& text);

struct TrainConfig {
  std::uint64_t seed = 1;
  std::size_t batch_size = 8;
  std::uint64_t total_steps = 100000;
  std::size_t inner_steps = 5;
  std::uint64_t warmup_steps = 20000;
  std::uint64_t checkpoint_every = 1000;
  std::uint64_t log_every = 10;
  std::size_t segment_frames = audio::kSegmentFrames;
  AdamConfig adam{};
  double cmi_lr = 2e-4;
  std::size_t cmi_hidden = 64;
  bool mine_ema = false;
  bool mi_sign_as_printed = false;
  Ablation ablation = Ablation::none;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct LossReport {
  std::uint64_t step = 0;
  double recon = 0.0;
  double kl = 0.0;
  double siamese = 0.0;
  double mi = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  MIEstimates cmi{};  // last inner step of phase 1
  bool aborted = false;

  /// One-line JSON object.
  std::string to_json() const;
  bool operator==(const LossReport&) const = default;
};

/// One training example as network inputs ([n_mels x T], normalized).
struct TrainingExample {
  Tensor z;
  Tensor z_prime;
};

/// Per-step observations for tests.
struct StepProbe {
  bool model_grad_after_phase1 = false;  // any model parameter holds a non-zero gradient
  bool cmi_grad_after_phase2 = false;    // any CMI parameter holds a non-zero gradient
  std::vector<Tensor> reconstruction_speaker_inputs;
  std::vector<Tensor> siamese_inputs;
};

Tensor mel_to_tensor(const audio::MelSpectrogram& mel);
audio::MelSpectrogram tensor_to_mel(const Tensor& t);

/// CMI estimator configuration implied by a model and training configuration.
CmiConfig cmi_config_for(const ModelConfig& model, const TrainConfig& train);

class Trainer {
 public:
  Trainer(ModelConfig model, audio::MelConfig mel, TrainConfig train, audio::NormStats stats);

  /// Draws the deterministic batch of `step` from the data set (normalized).
  std::vector<TrainingExample> make_batch(const audio::DatasetManifest& manifest,
                                          const audio::MelCache& cache,
                                          std::uint64_t step) const;

  /// One two-phase iteration on `batch`; advances the step counter.
  LossReport train_step(const std::vector<TrainingExample>& batch, StepProbe* probe = nullptr);
  /// make_batch + train_step for the current step.
  LossReport step(const audio::DatasetManifest& manifest, const audio::MelCache& cache,
                  StepProbe* probe = nullptr);

  std::uint64_t steps_done() const noexcept { return step_; }
  void set_steps_done(std::uint64_t s) noexcept { step_ = s; }

  const SrdNetwork& model() const noexcept { return model_; }
  SrdNetwork& model() noexcept { return model_; }
  const CmiEstimator& cmi() const noexcept { return cmi_; }
  CmiEstimator& cmi() noexcept { return cmi_; }
  Adam& optimizer() noexcept { return adam_; }
  const Adam& optimizer() const noexcept { return adam_; }
  const ModelConfig& model_config() const noexcept { return model_.config(); }
  const audio::MelConfig& mel_config() const noexcept { return mel_; }
  const TrainConfig& train_config() const noexcept { return train_; }
  const audio::NormStats& norm_stats() const noexcept { return stats_; }

 private:
  audio::MelConfig mel_;
  TrainConfig train_;
  audio::NormStats stats_;
  SrdNetwork model_;
  CmiEstimator cmi_;
  Adam adam_;
  std::uint64_t step_ = 0;
};

MAINVC_NAMESPACE_END
