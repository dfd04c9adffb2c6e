#include "mainvc/eval/mcd.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mainvc/audio/dataset.hpp"

namespace mainvc::eval {

namespace {

double distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cepstral order mismatch");
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(acc);
}

const double kMcdScale = 10.0 / std::numbers::ln10 * std::numbers::sqrt2;

}  // namespace

Cepstra mel_cepstrum(const audio::MelSpectrogram& mel, std::size_t order) {
  if (order + 1 > mel.n_mels) throw std::invalid_argument("cepstral order exceeds mel bins");
  const auto m_count = static_cast<double>(mel.n_mels);
  Cepstra out(mel.frames, std::vector<double>(order));
  for (std::size_t t = 0; t < mel.frames; ++t) {
    for (std::size_t k = 1; k <= order; ++k) {
      double acc = 0.0;
      for (std::size_t m = 0; m < mel.n_mels; ++m) {
        acc += mel.at(m, t) *
               std::cos(std::numbers::pi * static_cast<double>(k) * (m + 0.5) / m_count);
      }
      out[t][k - 1] = acc * std::sqrt(2.0 / m_count);
    }
  }
  return out;
}

Cepstra mel_cepstrum(const audio::Waveform& wave, const audio::MelConfig& config,
                     std::size_t order) {
  return mel_cepstrum(audio::waveform_to_mel(wave, config), order);
}

McdResult mcd_from_cepstra(const Cepstra& reference, const Cepstra& converted, bool use_dtw) {
  if (reference.empty() || converted.empty()) {
    throw std::invalid_argument("MCD: empty alignment (no frames to compare)");
  }
  McdResult result;
  result.aligned = use_dtw;
  if (!use_dtw) {
    const std::size_t n = std::min(reference.size(), converted.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) acc += distance(reference[t], converted[t]);
    result.frames_compared = n;
    result.value = kMcdScale * acc / static_cast<double>(n);
    return result;
  }

  const std::size_t rows = reference.size();
  const std::size_t cols = converted.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> local(rows * cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) local[i * cols + j] = distance(reference[i], converted[j]);
  }
  std::vector<double> cost(rows * cols, inf);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double best = 0.0;
      if (i > 0 || j > 0) {
        best = inf;
        if (i > 0) best = std::min(best, cost[(i - 1) * cols + j]);
        if (j > 0) best = std::min(best, cost[i * cols + j - 1]);
        if (i > 0 && j > 0) best = std::min(best, cost[(i - 1) * cols + j - 1]);
      }
      cost[i * cols + j] = best + local[i * cols + j];
    }
  }
  // Backtrack, preferring the diagonal on ties.
  std::size_t i = rows - 1;
  std::size_t j = cols - 1;
  double acc = local[i * cols + j];
  std::size_t count = 1;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = cost[(i - 1) * cols + j - 1];
      const double up = cost[(i - 1) * cols + j];
      const double left = cost[i * cols + j - 1];
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    acc += local[i * cols + j];
    ++count;
  }
  result.frames_compared = count;
  result.value = kMcdScale * acc / static_cast<double>(count);
  return result;
}

McdResult mcd(const audio::Waveform& reference, const audio::Waveform& converted, bool use_dtw,
              const audio::MelConfig& config) {
  return mcd_from_cepstra(mel_cepstrum(reference, config), mel_cepstrum(converted, config),
                          use_dtw);
}

}  // namespace mainvc::eval
