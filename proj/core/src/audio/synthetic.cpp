#include "mainvc/audio/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "mainvc/random.hpp"

namespace mainvc::audio {

namespace {

struct Vowel {
  std::array<double, 3> formants;
};

// Average adult formant frequencies (Hz) of a handful of vowels.
constexpr std::array<Vowel, 7> kVowels = {{
    {{730, 1090, 2440}},
    {{270, 2290, 3010}},
    {{300, 870, 2240}},
    {{530, 1840, 2480}},
    {{570, 840, 2410}},
    {{660, 1720, 2410}},
    {{490, 1350, 1690}},
}};
constexpr std::array<double, 3> kBandwidths = {90.0, 120.0, 180.0};
constexpr std::array<double, 3> kFormantGain = {1.0, 0.6, 0.35};

double envelope(double f, const std::array<double, 3>& formants, double scale) {
  double e = 0.02;
  for (std::size_t i = 0; i < 3; ++i) {
    const double d = (f - formants[i] * scale) / kBandwidths[i];
    e += kFormantGain[i] / (1.0 + d * d);
  }
  return e;
}

}  // namespace

SyntheticSpeaker make_synthetic_speaker(std::size_t index, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5bea4e7, index));
  // Golden-ratio spacing keeps any prefix of speakers spread out.
  const double u = std::fmod(0.5 + 0.6180339887498949 * static_cast<double>(index), 1.0);
  const double v = std::fmod(0.25 + 0.7548776662466927 * static_cast<double>(index), 1.0);
  SyntheticSpeaker s;
  char id[32];
  std::snprintf(id, sizeof(id), "spk%02zu", index);
  s.id = id;
  s.f0 = 95.0 + 140.0 * u + rng.uniform(-5.0, 5.0);
  s.formant_scale = 0.85 + 0.35 * v;
  s.tilt = 0.7 + 0.7 * rng.uniform01();
  s.breath = 0.0002 + 0.0004 * rng.uniform01();
  return s;
}

Waveform synthesize_utterance(const SyntheticSpeaker& speaker, std::uint64_t content_seed,
                              double seconds, int sample_rate) {
  Rng rng(content_seed);
  const auto n = static_cast<std::size_t>(seconds * sample_rate);

  // Vowel segments of 80-220 ms with 30 ms linear transitions between them.
  struct Segment {
    std::size_t start;
    std::array<double, 3> formants;
  };
  std::vector<Segment> segments;
  std::size_t pos = 0;
  while (pos < n) {
    segments.push_back({pos, kVowels[rng.uniform_below(kVowels.size())].formants});
    pos += static_cast<std::size_t>(rng.uniform(0.08, 0.22) * sample_rate);
  }
  const auto transition = static_cast<std::size_t>(0.03 * sample_rate);
  const double contour_rate = rng.uniform(0.3, 0.9);
  const double contour_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);

  Waveform wave;
  wave.sample_rate = sample_rate;
  wave.samples.resize(n);
  constexpr std::size_t kBlock = 64;
  std::array<double, 3> formants{};
  std::vector<double> amps;
  double phase = 0.0;
  std::size_t seg = 0;
  double f0 = speaker.f0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % kBlock == 0) {
      while (seg + 1 < segments.size() && segments[seg + 1].start <= i) ++seg;
      formants = segments[seg].formants;
      if (seg + 1 < segments.size()) {
        const std::size_t next = segments[seg + 1].start;
        if (next - i < transition) {
          const double w = 1.0 - static_cast<double>(next - i) / static_cast<double>(transition);
          for (std::size_t k = 0; k < 3; ++k) {
            formants[k] += w * (segments[seg + 1].formants[k] - formants[k]);
          }
        }
      }
      const double t = static_cast<double>(i) / sample_rate;
      f0 = speaker.f0 * (1.0 + 0.06 * std::sin(2.0 * std::numbers::pi * contour_rate * t +
                                               contour_phase));
      amps.clear();
      for (int h = 1; h * f0 < 0.45 * sample_rate; ++h) {
        amps.push_back(envelope(h * f0, formants, speaker.formant_scale) /
                       std::pow(static_cast<double>(h), speaker.tilt));
      }
    }
    phase += 2.0 * std::numbers::pi * f0 / sample_rate;
    if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
    double s = 0.0;
    for (std::size_t h = 0; h < amps.size(); ++h) {
      s += amps[h] * std::sin(static_cast<double>(h + 1) * phase);
    }
    s += speaker.breath * rng.normal();
    wave.samples[i] = s;
  }

  double peak = 0.0;
  for (double s : wave.samples) peak = std::max(peak, std::abs(s));
  const double gain = peak > 0.0 ? 0.5 / peak : 1.0;
  const auto fade = static_cast<std::size_t>(0.01 * sample_rate);
  for (std::size_t i = 0; i < n; ++i) {
    double g = gain;
    if (i < fade) g *= static_cast<double>(i) / fade;
    if (n - i <= fade) g *= static_cast<double>(n - i - 1) / fade;
    wave.samples[i] *= g;
  }
  return wave;
}

std::vector<SyntheticSpeaker> write_synthetic_corpus(const std::filesystem::path& root,
                                                     std::size_t speakers,
                                                     std::size_t utterances_per_speaker,
                                                     std::uint64_t seed, double seconds) {
  std::vector<SyntheticSpeaker> out;
  for (std::size_t s = 0; s < speakers; ++s) {
    auto speaker = make_synthetic_speaker(s, seed);
    const auto dir = root / speaker.id;
    std::filesystem::create_directories(dir);
    for (std::size_t u = 0; u < utterances_per_speaker; ++u) {
      const auto wave =
          synthesize_utterance(speaker, derive_seed(seed, 0xC0A7E27, s * 1000 + u), seconds);
      char name[32];
      std::snprintf(name, sizeof(name), "utt%03zu.wav", u);
      save_waveform(dir / name, wave);
    }
    out.push_back(std::move(speaker));
  }
  return out;
}

}  // namespace mainvc::audio
