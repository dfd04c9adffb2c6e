#pragma once

#include "mainvc/audio/mel.hpp"

namespace mainvc::audio {

/// Renders a waveform from a log-mel spectrogram: the pseudo-inverse of the
/// mel filterbank recovers a linear magnitude, then `iterations` rounds of
/// Griffin-Lim phase estimation starting from zero phase. The result is peak
/// normalized to 0.95. Output length is (frames - 1) * hop.
///
/// This is a lower-fidelity stand-in for a neural vocoder.
Waveform griffin_lim(const MelSpectrogram& mel, const MelConfig& config, int iterations);

/// Linear magnitude [frames x bins] from a log-mel via the filterbank
/// pseudo-inverse, clamped at zero.
std::vector<double> mel_to_linear_magnitude(const MelSpectrogram& mel, const MelConfig& config);

}  // namespace mainvc::audio
