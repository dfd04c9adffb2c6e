#include "mainvc/audio/stft.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace mainvc::audio {

namespace {
// FFTW's planner is not thread safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

std::vector<double> hann_window(std::size_t length) {
  std::vector<double> w(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                static_cast<double>(length));
  }
  return w;
}

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  fftw_plan forward_plan = nullptr;
  fftw_plan inverse_plan = nullptr;

  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward_plan) fftw_destroy_plan(forward_plan);
    if (inverse_plan) fftw_destroy_plan(inverse_plan);
    fftw_free(real);
    fftw_free(spectrum);
  }
};

RealFft::RealFft(std::size_t size) : size_(size), impl_(std::make_unique<Impl>()) {
  if (size < 2) throw std::invalid_argument("RealFft: size must be at least 2");
  const int n = static_cast<int>(size);
  std::lock_guard lock(planner_mutex());
  impl_->real = fftw_alloc_real(size);
  impl_->spectrum = fftw_alloc_complex(size / 2 + 1);
  impl_->forward_plan = fftw_plan_dft_r2c_1d(n, impl_->real, impl_->spectrum, FFTW_ESTIMATE);
  impl_->inverse_plan = fftw_plan_dft_c2r_1d(n, impl_->spectrum, impl_->real, FFTW_ESTIMATE);
  if (!impl_->forward_plan || !impl_->inverse_plan) {
    throw std::runtime_error("FFTW could not plan a transform of size " + std::to_string(size));
  }
}

RealFft::~RealFft() = default;
RealFft::RealFft(RealFft&&) noexcept = default;
RealFft& RealFft::operator=(RealFft&&) noexcept = default;

void RealFft::forward(std::span<const double> input, std::span<std::complex<double>> output) {
  if (input.size() != size_ || output.size() != bins()) {
    throw std::invalid_argument("RealFft::forward: buffer size mismatch");
  }
  std::memcpy(impl_->real, input.data(), size_ * sizeof(double));
  fftw_execute(impl_->forward_plan);
  for (std::size_t k = 0; k < bins(); ++k) {
    output[k] = {impl_->spectrum[k][0], impl_->spectrum[k][1]};
  }
}

void RealFft::inverse(std::span<const std::complex<double>> input, std::span<double> output) {
  if (input.size() != bins() || output.size() != size_) {
    throw std::invalid_argument("RealFft::inverse: buffer size mismatch");
  }
  for (std::size_t k = 0; k < bins(); ++k) {
    impl_->spectrum[k][0] = input[k].real();
    impl_->spectrum[k][1] = input[k].imag();
  }
  // c2r destroys its input; the spectrum buffer is scratch so that is fine.
  fftw_execute(impl_->inverse_plan);
  std::memcpy(output.data(), impl_->real, size_ * sizeof(double));
}

std::size_t stft_frame_count(std::size_t length, std::size_t hop) {
  if (hop == 0) throw std::invalid_argument("hop must be positive");
  return length / hop + 1;
}

namespace {

void validate(const StftConfig& c) {
  if (c.win == 0 || c.win > c.n_fft || c.hop == 0) {
    throw std::invalid_argument("invalid STFT configuration (need 0 < win <= n_fft, hop > 0)");
  }
}

// Window of length win centered inside an n_fft frame.
std::vector<double> padded_window(const StftConfig& c) {
  std::vector<double> w(c.n_fft, 0.0);
  const auto hann = hann_window(c.win);
  const std::size_t offset = (c.n_fft - c.win) / 2;
  for (std::size_t i = 0; i < c.win; ++i) w[offset + i] = hann[i];
  return w;
}

}  // namespace

ComplexSpectrogram stft(std::span<const double> signal, const StftConfig& config) {
  validate(config);
  const std::size_t pad = config.n_fft / 2;
  if (signal.size() <= pad) {
    throw std::invalid_argument("signal of " + std::to_string(signal.size()) +
                                " samples is shorter than one analysis window");
  }
  const std::size_t n = signal.size();
  // Reflect padding without repeating the edge sample.
  std::vector<double> padded(n + 2 * pad);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    const auto pos = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(pad);
    std::ptrdiff_t src = pos;
    if (src < 0) src = -src;
    if (src >= static_cast<std::ptrdiff_t>(n)) src = 2 * static_cast<std::ptrdiff_t>(n) - 2 - src;
    padded[i] = signal[static_cast<std::size_t>(src)];
  }

  const auto window = padded_window(config);
  RealFft fft(config.n_fft);
  ComplexSpectrogram spec;
  spec.frames = stft_frame_count(n, config.hop);
  spec.bins = fft.bins();
  spec.values.resize(spec.frames * spec.bins);
  std::vector<double> frame(config.n_fft);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const double* src = padded.data() + t * config.hop;
    for (std::size_t i = 0; i < config.n_fft; ++i) frame[i] = src[i] * window[i];
    fft.forward(frame, std::span(spec.values).subspan(t * spec.bins, spec.bins));
  }
  return spec;
}

std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& config) {
  validate(config);
  if (spec.frames == 0) return {};
  RealFft fft(config.n_fft);
  if (spec.bins != fft.bins()) throw std::invalid_argument("istft: bin count mismatch");

  const auto window = padded_window(config);
  const std::size_t pad = config.n_fft / 2;
  const std::size_t full = config.n_fft + config.hop * (spec.frames - 1);
  std::vector<double> acc(full, 0.0);
  std::vector<double> norm(full, 0.0);
  std::vector<double> frame(config.n_fft);
  const double inv_n = 1.0 / static_cast<double>(config.n_fft);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    fft.inverse(std::span(spec.values).subspan(t * spec.bins, spec.bins), frame);
    for (std::size_t i = 0; i < config.n_fft; ++i) {
      acc[t * config.hop + i] += frame[i] * inv_n * window[i];
      norm[t * config.hop + i] += window[i] * window[i];
    }
  }
  const std::size_t length = config.hop * (spec.frames - 1);
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) {
    const double w = norm[pad + i];
    out[i] = w > 1e-10 ? acc[pad + i] / w : 0.0;
  }
  return out;
}

}  // namespace mainvc::audio
