#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mainvc/audio/stft.hpp"
#include "mainvc/audio/wav.hpp"

namespace mainvc::audio {

/// Short-time analysis and mel filterbank settings. Defaults target 16 kHz speech.
struct MelConfig {
  int sample_rate = 16000;
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  std::size_t win = 1024;
  std::size_t n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  /// Throws std::invalid_argument when the settings are inconsistent.
  void validate() const;
  StftConfig stft() const { return {n_fft, win, hop}; }
  /// Canonical single-line description, stable across versions.
  std::string canonical() const;
  /// 64-bit FNV-1a hash of canonical().
  std::uint64_t hash() const;

  bool operator==(const MelConfig&) const = default;
};

/// Log-mel matrix [n_mels x frames], row-major, natural log.
struct MelSpectrogram {
  std::size_t n_mels = 0;
  std::size_t frames = 0;
  std::vector<float> values;

  float at(std::size_t mel, std::size_t frame) const { return values[mel * frames + frame]; }
  float& at(std::size_t mel, std::size_t frame) { return values[mel * frames + frame]; }

  /// Columns [offset, offset + length).
  MelSpectrogram crop(std::size_t offset, std::size_t length) const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular filters on the HTK mel scale, each normalized to unit area over
/// frequency (2 / bandwidth peak). Returned as [n_mels x (n_fft/2 + 1)].
std::vector<double> mel_filterbank(const MelConfig& config);

/// Log-mel spectrogram of magnitude STFT frames. Frame count is
/// floor(len / hop) + 1. Throws when the waveform is shorter than one window
/// or its sample rate differs from the configuration.
MelSpectrogram logmel(const Waveform& wave, const MelConfig& config);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& text);

}  // namespace mainvc::audio
