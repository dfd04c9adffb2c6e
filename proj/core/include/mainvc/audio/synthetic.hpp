#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mainvc/audio/wav.hpp"

namespace mainvc::audio {

/// Voice parameters of a synthetic talker. Identity lives in time-invariant
/// traits (pitch, vocal-tract scaling, spectral tilt, breathiness); content
/// is the vowel sequence of each utterance.
struct SyntheticSpeaker {
  std::string id;
  double f0 = 120.0;
  double formant_scale = 1.0;
  double tilt = 1.0;
  double breath = 0.02;
};

/// Speaker `index` of a corpus keyed by `seed`. Indices spread pitch and
/// formant scale so that distinct indices sound distinct.
SyntheticSpeaker make_synthetic_speaker(std::size_t index, std::uint64_t seed);

/// Additive harmonic vowel synthesis of `seconds` seconds. `content_seed`
/// selects the vowel sequence and timing.
Waveform synthesize_utterance(const SyntheticSpeaker& speaker, std::uint64_t content_seed,
                              double seconds, int sample_rate = 16000);

/// Writes <root>/<speaker>/<utterance>.wav for a small synthetic corpus.
std::vector<SyntheticSpeaker> write_synthetic_corpus(const std::filesystem::path& root,
                                                     std::size_t speakers,
                                                     std::size_t utterances_per_speaker,
                                                     std::uint64_t seed, double seconds = 3.0);

}  // namespace mainvc::audio
