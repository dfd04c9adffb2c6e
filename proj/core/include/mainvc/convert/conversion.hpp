#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "mainvc/audio/dataset.hpp"
#include "mainvc/audio/mel.hpp"
#include "mainvc/audio/wav.hpp"
#include "mainvc/model/srd_network.hpp"
#include "mainvc/train/checkpoint.hpp"

MAINVC_NAMESPACE_BEGIN

/// Unreadable, malformed or too-short input audio.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConversionRequest {
  std::filesystem::path source_path;
  std::filesystem::path target_path;
  std::filesystem::path checkpoint_path;
  std::filesystem::path output_path;
  bool emit_audio = false;
  int griffin_lim_iters = 64;
};

struct ConversionResult {
  audio::MelSpectrogram mel;  // denormalized log-mel, source frame count
  std::optional<audio::Waveform> audio;
  std::filesystem::path mel_path;
  std::optional<std::filesystem::path> audio_path;
};

/// Frozen model plus the front end it was trained with.
class Converter {
 public:
  Converter(SrdNetwork model, audio::MelConfig mel, audio::NormStats stats);
  static Converter from_checkpoint(const std::filesystem::path& path);

  /// Content of `source`, speaker code of the raw (unshuffled) `target`.
  /// Both are un-normalized log-mels; the result is denormalized.
  audio::MelSpectrogram convert(const audio::MelSpectrogram& source,
                                const audio::MelSpectrogram& target) const;
  audio::MelSpectrogram convert(const audio::Waveform& source,
                                const audio::Waveform& target) const;

  const SrdNetwork& model() const noexcept { return model_; }
  const audio::MelConfig& mel_config() const noexcept { return mel_; }
  const audio::NormStats& norm_stats() const noexcept { return stats_; }

 private:
  audio::MelSpectrogram checked_mel(const audio::Waveform& wave, const char* role) const;

  SrdNetwork model_;
  audio::MelConfig mel_;
  audio::NormStats stats_;
};

/// Loads the checkpoint, converts, and writes the mel file (mel cache format)
/// to `output_path`; with `emit_audio` also writes `<output_path>.wav`.
/// Throws InputError for bad inputs and ConfigMismatchError when the
/// checkpoint's front end differs from `frontend`.
ConversionResult run_conversion(const ConversionRequest& request,
                                const audio::MelConfig& frontend = {});

MAINVC_NAMESPACE_END
