#include "mainvc/audio/resample.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace mainvc::audio {

namespace {

constexpr int kZeroCrossings = 32;
constexpr double kKaiserBeta = 10.0;
constexpr double kRolloff = 0.95;

double bessel_i0(double x) {
  double sum = 1.0;
  double term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

std::size_t resampled_length(std::size_t length, int source_rate, int target_rate) {
  // Integer form of round(length * target / source), half away from zero.
  const auto num = static_cast<unsigned long long>(length) * static_cast<unsigned>(target_rate);
  const auto den = static_cast<unsigned long long>(source_rate);
  return static_cast<std::size_t>((2 * num + den) / (2 * den));
}

Waveform resample(const Waveform& wave, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: target rate must be positive");
  if (wave.sample_rate <= 0) throw std::invalid_argument("resample: invalid source rate");
  if (target_rate == wave.sample_rate) return wave;

  const int g = std::gcd(wave.sample_rate, target_rate);
  const long up = target_rate / g;
  const long down = wave.sample_rate / g;

  // Cutoff relative to the input Nyquist frequency.
  const double cutoff = kRolloff * std::min(1.0, static_cast<double>(up) / down);
  // Half-width of the kernel in input samples.
  const double half_width = kZeroCrossings / cutoff;
  const long taps_half = static_cast<long>(std::ceil(half_width));
  const long taps = 2 * taps_half;
  const double i0_beta = bessel_i0(kKaiserBeta);

  // Phase p corresponds to a fractional input offset p / up. Tap k of phase p
  // weights input sample (i0 - taps_half + 1 + k).
  std::vector<double> bank(static_cast<std::size_t>(up * taps));
  for (long p = 0; p < up; ++p) {
    const double frac = static_cast<double>(p) / up;
    for (long k = 0; k < taps; ++k) {
      const double tau = frac - static_cast<double>(k - taps_half + 1);
      double h = 0.0;
      if (std::abs(tau) <= half_width) {
        const double r = tau / half_width;
        const double window = bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / i0_beta;
        h = cutoff * sinc(cutoff * tau) * window;
      }
      bank[static_cast<std::size_t>(p * taps + k)] = h;
    }
  }

  const auto n_in = static_cast<long>(wave.samples.size());
  const std::size_t n_out = resampled_length(wave.samples.size(), wave.sample_rate, target_rate);
  Waveform out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const long long pos = static_cast<long long>(n) * down;
    const long base = static_cast<long>(pos / up);
    const long phase = static_cast<long>(pos % up);
    const double* h = bank.data() + phase * taps;
    double acc = 0.0;
    const long first = base - taps_half + 1;
    for (long k = 0; k < taps; ++k) {
      const long idx = first + k;
      if (idx >= 0 && idx < n_in) acc += h[k] * wave.samples[static_cast<std::size_t>(idx)];
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace mainvc::audio
