#include "mainvc/audio/mel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mainvc::audio {

void MelConfig::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("mel config: sample_rate must be positive");
  if (win == 0 || win > n_fft) throw std::invalid_argument("mel config: need 0 < win <= n_fft");
  if (hop == 0) throw std::invalid_argument("mel config: hop must be positive");
  if (n_mels == 0) throw std::invalid_argument("mel config: n_mels must be >= 1");
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0)) {
    throw std::invalid_argument("mel config: need 0 <= fmin < fmax <= sample_rate / 2");
  }
  if (!(log_floor > 0.0)) throw std::invalid_argument("mel config: log_floor must be positive");
}

std::string MelConfig::canonical() const {
  std::ostringstream out;
  out.precision(17);
  out << "mel:sr=" << sample_rate << ";n_fft=" << n_fft << ";hop=" << hop << ";win=" << win
      << ";n_mels=" << n_mels << ";fmin=" << fmin << ";fmax=" << fmax
      << ";log_floor=" << log_floor;
  return out.str();
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t MelConfig::hash() const { return fnv1a(canonical()); }

MelSpectrogram MelSpectrogram::crop(std::size_t offset, std::size_t length) const {
  if (offset + length > frames) throw std::out_of_range("mel crop exceeds frame count");
  MelSpectrogram out;
  out.n_mels = n_mels;
  out.frames = length;
  out.values.resize(n_mels * length);
  for (std::size_t m = 0; m < n_mels; ++m) {
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(m * frames + offset), length,
                out.values.begin() + static_cast<std::ptrdiff_t>(m * length));
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(const MelConfig& config) {
  config.validate();
  const std::size_t bins = config.n_fft / 2 + 1;
  const double lo = hz_to_mel(config.fmin);
  const double hi = hz_to_mel(config.fmax);
  std::vector<double> edges(config.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(config.n_mels + 1));
  }
  std::vector<double> bank(config.n_mels * bins, 0.0);
  const double bin_hz = static_cast<double>(config.sample_rate) / static_cast<double>(config.n_fft);
  for (std::size_t m = 0; m < config.n_mels; ++m) {
    const double left = edges[m];
    const double center = edges[m + 1];
    const double right = edges[m + 2];
    const double area_norm = 2.0 / (right - left);
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - left) / (center - left);
      const double fall = (right - f) / (right - center);
      const double w = std::max(0.0, std::min(rise, fall));
      bank[m * bins + k] = w * area_norm;
    }
  }
  return bank;
}

MelSpectrogram logmel(const Waveform& wave, const MelConfig& config) {
  config.validate();
  if (wave.sample_rate != config.sample_rate) {
    throw std::invalid_argument("logmel: waveform rate " + std::to_string(wave.sample_rate) +
                                " Hz differs from configured " +
                                std::to_string(config.sample_rate) + " Hz");
  }
  if (wave.samples.size() < config.win) {
    throw std::invalid_argument("logmel: waveform of " + std::to_string(wave.samples.size()) +
                                " samples is shorter than one " + std::to_string(config.win) +
                                "-sample window");
  }
  const auto spec = stft(wave.samples, config.stft());
  const auto bank = mel_filterbank(config);
  const std::size_t bins = spec.bins;

  MelSpectrogram mel;
  mel.n_mels = config.n_mels;
  mel.frames = spec.frames;
  mel.values.resize(mel.n_mels * mel.frames);
  std::vector<double> magnitude(bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < bins; ++k) magnitude[k] = std::abs(spec.at(t, k));
    for (std::size_t m = 0; m < config.n_mels; ++m) {
      const double* w = bank.data() + m * bins;
      double energy = 0.0;
      for (std::size_t k = 0; k < bins; ++k) energy += w[k] * magnitude[k];
      mel.values[m * mel.frames + t] =
          static_cast<float>(std::log(std::max(energy, config.log_floor)));
    }
  }
  return mel;
}

}  // namespace mainvc::audio
