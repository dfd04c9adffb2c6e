#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace mainvc::audio {

/// Raised for unreadable, truncated or unsupported audio files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  int sample_rate = 16000;

  std::size_t size() const noexcept { return samples.size(); }
  double duration_seconds() const noexcept {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

/// Decodes a RIFF/WAVE byte buffer. Accepts PCM 16/24/32-bit and 32-bit IEEE
/// float; multichannel input is downmixed by averaging.
Waveform decode_wav(std::span<const std::uint8_t> bytes);

Waveform load_waveform(const std::filesystem::path& path);

enum class WavEncoding { pcm16, float32 };

std::vector<std::uint8_t> encode_wav(const Waveform& wave, WavEncoding encoding = WavEncoding::pcm16);

void save_waveform(const std::filesystem::path& path, const Waveform& wave,
                   WavEncoding encoding = WavEncoding::pcm16);

}  // namespace mainvc::audio
