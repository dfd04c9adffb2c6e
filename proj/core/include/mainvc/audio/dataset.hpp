#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mainvc/audio/mel.hpp"

namespace mainvc::audio {

/// Frames per training segment.
inline constexpr std::size_t kSegmentFrames = 128;

struct ManifestEntry {
  std::string speaker_id;
  std::string utterance_id;
  std::string path;
  std::size_t n_frames = 0;

  bool usable() const noexcept { return n_frames >= kSegmentFrames; }
  std::string key() const { return speaker_id + "/" + utterance_id; }
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;  // sorted by (speaker_id, utterance_id)
  std::vector<std::string> warnings;   // not serialized

  /// Speakers with at least two usable utterances, sorted.
  std::vector<std::string> pairable_speakers() const;
};

/// Scans `root` laid out as <root>/<speaker_id>/<utterance_id>.wav (one
/// directory per speaker, WAV files directly inside). Frame counts follow the
/// mel configuration after resampling to its rate. Speakers with fewer than
/// two usable utterances are kept but reported in `warnings`.
DatasetManifest build_manifest(const std::filesystem::path& root, const MelConfig& config);

/// JSON Lines: one {"speaker_id","utterance_id","path","n_frames"} per line.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Per-mel-bin normalization statistics.
struct NormStats {
  std::vector<float> mean;
  std::vector<float> std;

  bool empty() const noexcept { return mean.empty(); }
  MelSpectrogram normalize(const MelSpectrogram& mel) const;
  MelSpectrogram denormalize(const MelSpectrogram& mel) const;
};

NormStats compute_norm_stats(const std::vector<const MelSpectrogram*>& mels);
void write_norm_stats(const std::filesystem::path& path, const NormStats& stats);
NormStats read_norm_stats(const std::filesystem::path& path);
/// Location of the statistics sidecar of a manifest file.
std::filesystem::path norm_stats_path(const std::filesystem::path& manifest_path);

// Binary mel file: "MVCMEL01", u32 n_mels, u32 frames, u64 config hash, then
// little-endian float32 values row-major.
void write_mel_file(const std::filesystem::path& path, const MelSpectrogram& mel,
                    std::uint64_t config_hash);
struct MelFile {
  MelSpectrogram mel;
  std::uint64_t config_hash = 0;
};
MelFile read_mel_file(const std::filesystem::path& path);

/// In-memory view of a mel cache directory: one .mel file per utterance and an
/// index.json mapping "speaker/utterance" keys to files.
class MelCache {
 public:
  MelCache() = default;
  explicit MelCache(std::uint64_t config_hash) : config_hash_(config_hash) {}

  /// Computes log-mels for every manifest entry (resampling as needed).
  static MelCache compute(const DatasetManifest& manifest, const MelConfig& config);
  static MelCache load(const std::filesystem::path& directory);
  void save(const std::filesystem::path& directory) const;

  void insert(const std::string& key, MelSpectrogram mel);
  bool contains(const std::string& key) const { return mels_.count(key) != 0; }
  const MelSpectrogram& at(const std::string& key) const;
  std::uint64_t config_hash() const noexcept { return config_hash_; }
  std::size_t size() const noexcept { return mels_.size(); }
  const std::map<std::string, MelSpectrogram>& items() const noexcept { return mels_; }

 private:
  std::uint64_t config_hash_ = 0;
  std::map<std::string, MelSpectrogram> mels_;
};

struct TrainingPair {
  MelSpectrogram z;        // reconstruction segment
  MelSpectrogram z_prime;  // sibling segment for the Siamese branch
  std::string speaker_id;
  std::string utterance_z;
  std::string utterance_z_prime;
};

/// Draws a speaker uniformly among pairable speakers, two distinct usable
/// utterances, and uniform crop offsets. Deterministic in `seed`.
TrainingPair sample_pair(const DatasetManifest& manifest, const MelCache& cache,
                         std::uint64_t seed, std::size_t segment = kSegmentFrames);

/// Resamples to the configured rate when needed, then computes the log-mel.
MelSpectrogram waveform_to_mel(const Waveform& wave, const MelConfig& config);

}  // namespace mainvc::audio
