#pragma once

#include <vector>

#include "mainvc/audio/mel.hpp"

namespace mainvc::eval {

/// Cepstral frames (one vector per frame, coefficients 1..order).
using Cepstra = std::vector<std::vector<double>>;

struct McdResult {
  double value = 0.0;  // dB
  std::size_t frames_compared = 0;
  bool aligned = false;
};

inline constexpr std::size_t kMcdOrder = 13;

/// Mel-cepstrum from the log-mel of `wave` (resampled to the configured
/// rate): orthonormal DCT-II across mel bins, keeping c1..c_order.
Cepstra mel_cepstrum(const audio::Waveform& wave, const audio::MelConfig& config,
                     std::size_t order = kMcdOrder);
Cepstra mel_cepstrum(const audio::MelSpectrogram& mel, std::size_t order = kMcdOrder);

/// (10 / ln 10) * sqrt(2) * mean over compared frames of the Euclidean
/// cepstral distance. With `use_dtw` frames are paired along the minimum-cost
/// DTW path; otherwise frame t is paired with frame t over the shorter length.
McdResult mcd_from_cepstra(const Cepstra& reference, const Cepstra& converted, bool use_dtw);

McdResult mcd(const audio::Waveform& reference, const audio::Waveform& converted, bool use_dtw,
              const audio::MelConfig& config = {});

}  // namespace mainvc::eval
