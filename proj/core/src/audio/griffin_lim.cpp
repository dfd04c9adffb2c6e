#include "mainvc/audio/griffin_lim.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mainvc::audio {

std::vector<double> mel_to_linear_magnitude(const MelSpectrogram& mel, const MelConfig& config) {
  if (mel.n_mels != config.n_mels) {
    throw std::invalid_argument("mel has " + std::to_string(mel.n_mels) +
                                " bins but configuration expects " +
                                std::to_string(config.n_mels));
  }
  const auto bank = mel_filterbank(config);
  const auto bins = static_cast<Eigen::Index>(config.n_fft / 2 + 1);
  const auto n_mels = static_cast<Eigen::Index>(config.n_mels);
  Eigen::MatrixXd fb(n_mels, bins);
  for (Eigen::Index m = 0; m < n_mels; ++m) {
    for (Eigen::Index k = 0; k < bins; ++k) fb(m, k) = bank[static_cast<std::size_t>(m * bins + k)];
  }
  const Eigen::MatrixXd pinv = fb.completeOrthogonalDecomposition().pseudoInverse();

  const auto frames = static_cast<Eigen::Index>(mel.frames);
  Eigen::MatrixXd energies(n_mels, frames);
  for (Eigen::Index m = 0; m < n_mels; ++m) {
    for (Eigen::Index t = 0; t < frames; ++t) {
      energies(m, t) = std::exp(static_cast<double>(mel.at(static_cast<std::size_t>(m),
                                                            static_cast<std::size_t>(t))));
    }
  }
  const Eigen::MatrixXd linear = pinv * energies;  // bins x frames

  std::vector<double> out(static_cast<std::size_t>(frames * bins));
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      out[static_cast<std::size_t>(t * bins + k)] = std::max(0.0, linear(k, t));
    }
  }
  return out;
}

Waveform griffin_lim(const MelSpectrogram& mel, const MelConfig& config, int iterations) {
  if (iterations < 1) throw std::invalid_argument("griffin_lim: iterations must be >= 1");
  if (mel.frames < 2) throw std::invalid_argument("griffin_lim: need at least two frames");
  const auto magnitude = mel_to_linear_magnitude(mel, config);
  const auto stft_cfg = config.stft();

  ComplexSpectrogram spec;
  spec.frames = mel.frames;
  spec.bins = config.n_fft / 2 + 1;
  spec.values.resize(spec.frames * spec.bins);
  for (std::size_t i = 0; i < spec.values.size(); ++i) spec.values[i] = {magnitude[i], 0.0};

  std::vector<double> signal = istft(spec, stft_cfg);
  for (int it = 1; it < iterations; ++it) {
    const auto estimate = stft(signal, stft_cfg);
    const std::size_t frames = std::min(estimate.frames, spec.frames);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < spec.bins; ++k) {
        const auto c = estimate.at(t, k);
        const double mag = std::abs(c);
        const double target = magnitude[t * spec.bins + k];
        spec.at(t, k) = mag > 1e-12 ? c * (target / mag) : std::complex<double>(target, 0.0);
      }
    }
    signal = istft(spec, stft_cfg);
  }

  double peak = 0.0;
  for (double s : signal) peak = std::max(peak, std::abs(s));
  if (peak > 0.0) {
    for (double& s : signal) s *= 0.95 / peak;
  }
  return Waveform{std::move(signal), config.sample_rate};
}

}  // namespace mainvc::audio
