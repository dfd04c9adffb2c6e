#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace mainvc::audio {

/// Periodic Hann window of `length` samples.
std::vector<double> hann_window(std::size_t length);

/// Real FFT of a fixed size backed by FFTW. Plans are created once per
/// instance; an instance must not be shared across threads.
class RealFft {
 public:
  explicit RealFft(std::size_t size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const noexcept { return size_; }
  std::size_t bins() const noexcept { return size_ / 2 + 1; }

  /// input.size() == size(); output receives bins() coefficients.
  void forward(std::span<const double> input, std::span<std::complex<double>> output);
  /// Unnormalized inverse: forward followed by inverse scales by size().
  void inverse(std::span<const std::complex<double>> input, std::span<double> output);

 private:
  struct Impl;
  std::size_t size_;
  std::unique_ptr<Impl> impl_;
};

/// Spectrogram as frames x bins, row-major.
struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;

  std::complex<double>& at(std::size_t frame, std::size_t bin) { return values[frame * bins + bin]; }
  const std::complex<double>& at(std::size_t frame, std::size_t bin) const {
    return values[frame * bins + bin];
  }
};

struct StftConfig {
  std::size_t n_fft = 1024;
  std::size_t win = 1024;
  std::size_t hop = 256;
};

/// Number of frames of the centered STFT: floor(len / hop) + 1.
std::size_t stft_frame_count(std::size_t length, std::size_t hop);

/// Centered STFT with reflect padding of n_fft / 2 on both sides and a Hann
/// window of `win` samples zero-padded to n_fft.
ComplexSpectrogram stft(std::span<const double> signal, const StftConfig& config);

/// Weighted overlap-add inverse of `stft` with the same window. Produces
/// (frames - 1) * hop samples.
std::vector<double> istft(const ComplexSpectrogram& spec, const StftConfig& config);

}  // namespace mainvc::audio
