#include "mainvc/audio/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mainvc/audio/resample.hpp"
#include "mainvc/random.hpp"

namespace mainvc::audio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMelMagic[8] = {'M', 'V', 'C', 'M', 'E', 'L', '0', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(v >> (8 * i));
  out.write(b, 8);
}

std::uint64_t read_le(std::istream& in, int bytes, const fs::path& path) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), bytes);
  if (in.gcount() != bytes) throw FormatError("truncated mel file " + path.string());
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::string> DatasetManifest::pairable_speakers() const {
  std::map<std::string, std::size_t> usable;
  for (const auto& e : entries) {
    if (e.usable()) ++usable[e.speaker_id];
  }
  std::vector<std::string> out;
  for (const auto& [speaker, count] : usable) {
    if (count >= 2) out.push_back(speaker);
  }
  return out;
}

MelSpectrogram waveform_to_mel(const Waveform& wave, const MelConfig& config) {
  if (wave.sample_rate == config.sample_rate) return logmel(wave, config);
  return logmel(resample(wave, config.sample_rate), config);
}

DatasetManifest build_manifest(const fs::path& root, const MelConfig& config) {
  config.validate();
  if (!fs::is_directory(root)) {
    throw std::invalid_argument("dataset root " + root.string() + " is not a directory");
  }
  DatasetManifest manifest;
  for (const auto& speaker_dir : fs::directory_iterator(root)) {
    if (!speaker_dir.is_directory()) continue;
    const std::string speaker = speaker_dir.path().filename().string();
    for (const auto& file : fs::directory_iterator(speaker_dir.path())) {
      if (!file.is_regular_file()) continue;
      auto ext = file.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) {
        return static_cast<char>(std::tolower(c));
      });
      if (ext != ".wav") continue;
      const Waveform wave = load_waveform(file.path());
      const std::size_t samples =
          resampled_length(wave.samples.size(), wave.sample_rate, config.sample_rate);
      ManifestEntry entry;
      entry.speaker_id = speaker;
      entry.utterance_id = file.path().stem().string();
      entry.path = file.path().generic_string();
      entry.n_frames = samples < config.win ? 0 : stft_frame_count(samples, config.hop);
      manifest.entries.push_back(std::move(entry));
    }
  }
  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return std::tie(a.speaker_id, a.utterance_id) <
                     std::tie(b.speaker_id, b.utterance_id);
            });

  std::map<std::string, std::size_t> usable;
  std::map<std::string, std::size_t> total;
  for (const auto& e : manifest.entries) {
    ++total[e.speaker_id];
    if (e.usable()) ++usable[e.speaker_id];
  }
  for (const auto& [speaker, count] : total) {
    if (usable[speaker] < 2) {
      manifest.warnings.push_back("speaker " + speaker + " has " +
                                  std::to_string(usable[speaker]) + " of " +
                                  std::to_string(count) +
                                  " utterances long enough for pairing; excluded from pairing");
    }
  }
  return manifest;
}

void write_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& e : manifest.entries) {
    json line = {{"speaker_id", e.speaker_id},
                 {"utterance_id", e.utterance_id},
                 {"path", e.path},
                 {"n_frames", e.n_frames}};
    out << line.dump() << '\n';
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  DatasetManifest manifest;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      ManifestEntry e;
      e.speaker_id = j.at("speaker_id").get<std::string>();
      e.utterance_id = j.at("utterance_id").get<std::string>();
      e.path = j.at("path").get<std::string>();
      e.n_frames = j.at("n_frames").get<std::size_t>();
      manifest.entries.push_back(std::move(e));
    } catch (const json::exception& err) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + err.what());
    }
  }
  for (std::size_t i = 1; i < manifest.entries.size(); ++i) {
    const auto& a = manifest.entries[i - 1];
    const auto& b = manifest.entries[i];
    if (std::tie(a.speaker_id, a.utterance_id) >= std::tie(b.speaker_id, b.utterance_id)) {
      throw std::runtime_error(path.string() + ": entries must be unique and sorted");
    }
  }
  return manifest;
}

MelSpectrogram NormStats::normalize(const MelSpectrogram& mel) const {
  if (mean.size() != mel.n_mels) throw std::invalid_argument("normalization width mismatch");
  MelSpectrogram out = mel;
  for (std::size_t m = 0; m < mel.n_mels; ++m) {
    for (std::size_t t = 0; t < mel.frames; ++t) {
      out.at(m, t) = (mel.at(m, t) - mean[m]) / std[m];
    }
  }
  return out;
}

MelSpectrogram NormStats::denormalize(const MelSpectrogram& mel) const {
  if (mean.size() != mel.n_mels) throw std::invalid_argument("normalization width mismatch");
  MelSpectrogram out = mel;
  for (std::size_t m = 0; m < mel.n_mels; ++m) {
    for (std::size_t t = 0; t < mel.frames; ++t) out.at(m, t) = mel.at(m, t) * std[m] + mean[m];
  }
  return out;
}

NormStats compute_norm_stats(const std::vector<const MelSpectrogram*>& mels) {
  if (mels.empty()) throw std::invalid_argument("normalization statistics need at least one mel");
  const std::size_t n_mels = mels.front()->n_mels;
  std::vector<double> sum(n_mels, 0.0);
  std::vector<double> sq(n_mels, 0.0);
  double count = 0;
  for (const auto* mel : mels) {
    if (mel->n_mels != n_mels) throw std::invalid_argument("mixed mel widths");
    for (std::size_t m = 0; m < n_mels; ++m) {
      for (std::size_t t = 0; t < mel->frames; ++t) sum[m] += mel->at(m, t);
    }
    count += static_cast<double>(mel->frames);
  }
  NormStats stats;
  stats.mean.resize(n_mels);
  stats.std.resize(n_mels);
  for (std::size_t m = 0; m < n_mels; ++m) stats.mean[m] = static_cast<float>(sum[m] / count);
  for (const auto* mel : mels) {
    for (std::size_t m = 0; m < n_mels; ++m) {
      for (std::size_t t = 0; t < mel->frames; ++t) {
        const double d = mel->at(m, t) - static_cast<double>(stats.mean[m]);
        sq[m] += d * d;
      }
    }
  }
  for (std::size_t m = 0; m < n_mels; ++m) {
    stats.std[m] = static_cast<float>(std::max(std::sqrt(sq[m] / count), 1e-5));
  }
  return stats;
}

void write_norm_stats(const fs::path& path, const NormStats& stats) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << json{{"mean", stats.mean}, {"std", stats.std}}.dump(2) << '\n';
}

NormStats read_norm_stats(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open normalization statistics " + path.string());
  const auto j = json::parse(in);
  NormStats stats;
  stats.mean = j.at("mean").get<std::vector<float>>();
  stats.std = j.at("std").get<std::vector<float>>();
  if (stats.mean.size() != stats.std.size()) {
    throw std::runtime_error(path.string() + ": mean/std length mismatch");
  }
  return stats;
}

fs::path norm_stats_path(const fs::path& manifest_path) {
  return fs::path(manifest_path.string() + ".stats.json");
}

void write_mel_file(const fs::path& path, const MelSpectrogram& mel, std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write mel file " + path.string());
  out.write(kMelMagic, sizeof(kMelMagic));
  write_u32(out, static_cast<std::uint32_t>(mel.n_mels));
  write_u32(out, static_cast<std::uint32_t>(mel.frames));
  write_u64(out, config_hash);
  for (float v : mel.values) write_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

MelFile read_mel_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open mel file " + path.string());
  char magic[sizeof(kMelMagic)];
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kMelMagic, sizeof(magic)) != 0) {
    throw FormatError(path.string() + " is not a mel file");
  }
  MelFile file;
  file.mel.n_mels = read_le(in, 4, path);
  file.mel.frames = read_le(in, 4, path);
  file.config_hash = read_le(in, 8, path);
  file.mel.values.resize(file.mel.n_mels * file.mel.frames);
  for (auto& v : file.mel.values) {
    v = std::bit_cast<float>(static_cast<std::uint32_t>(read_le(in, 4, path)));
  }
  return file;
}

MelCache MelCache::compute(const DatasetManifest& manifest, const MelConfig& config) {
  MelCache cache(config.hash());
  for (const auto& e : manifest.entries) {
    cache.insert(e.key(), waveform_to_mel(load_waveform(e.path), config));
  }
  return cache;
}

namespace {
std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}
}  // namespace

void MelCache::save(const fs::path& directory) const {
  fs::create_directories(directory);
  json index;
  index["config_hash"] = hex64(config_hash_);
  json files = json::object();
  for (const auto& [key, mel] : mels_) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '/', '_');
    name += ".mel";
    write_mel_file(directory / name, mel, config_hash_);
    files[key] = name;
  }
  index["files"] = files;
  std::ofstream out(directory / "index.json", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write mel cache index in " + directory.string());
  out << index.dump(2) << '\n';
}

MelCache MelCache::load(const fs::path& directory) {
  std::ifstream in(directory / "index.json");
  if (!in) throw std::runtime_error("missing mel cache index in " + directory.string());
  const auto index = json::parse(in);
  const auto hash = std::stoull(index.at("config_hash").get<std::string>(), nullptr, 16);
  MelCache cache(hash);
  for (const auto& [key, name] : index.at("files").items()) {
    auto file = read_mel_file(directory / name.get<std::string>());
    if (file.config_hash != hash) {
      throw FormatError("mel file for " + key + " was computed with a different configuration");
    }
    cache.insert(key, std::move(file.mel));
  }
  return cache;
}

void MelCache::insert(const std::string& key, MelSpectrogram mel) {
  mels_[key] = std::move(mel);
}

const MelSpectrogram& MelCache::at(const std::string& key) const {
  auto it = mels_.find(key);
  if (it == mels_.end()) throw std::out_of_range("mel cache has no entry for " + key);
  return it->second;
}

TrainingPair sample_pair(const DatasetManifest& manifest, const MelCache& cache,
                         std::uint64_t seed, std::size_t segment) {
  std::map<std::string, std::vector<const ManifestEntry*>> by_speaker;
  for (const auto& e : manifest.entries) {
    if (e.n_frames >= segment) by_speaker[e.speaker_id].push_back(&e);
  }
  std::vector<const std::vector<const ManifestEntry*>*> eligible;
  for (const auto& [speaker, utts] : by_speaker) {
    if (utts.size() >= 2) eligible.push_back(&utts);
  }
  if (eligible.empty()) {
    throw std::runtime_error("no speaker has two utterances of at least " +
                             std::to_string(segment) + " frames");
  }

  Rng rng(seed);
  const auto& utts = *eligible[rng.uniform_below(eligible.size())];
  const std::size_t first = rng.uniform_below(utts.size());
  std::size_t second = rng.uniform_below(utts.size() - 1);
  if (second >= first) ++second;

  auto crop = [&](const ManifestEntry& e) {
    const auto& mel = cache.at(e.key());
    if (mel.frames < segment) throw std::runtime_error("cached mel shorter than manifest claims");
    const std::size_t offset = rng.uniform_below(mel.frames - segment + 1);
    return mel.crop(offset, segment);
  };

  TrainingPair pair;
  pair.speaker_id = utts[first]->speaker_id;
  pair.utterance_z = utts[first]->utterance_id;
  pair.utterance_z_prime = utts[second]->utterance_id;
  pair.z = crop(*utts[first]);
  pair.z_prime = crop(*utts[second]);
  return pair;
}

}  // namespace mainvc::audio
