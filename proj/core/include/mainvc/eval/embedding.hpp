#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mainvc/audio/dataset.hpp"
#include "mainvc/model/srd_network.hpp"

MAINVC_NAMESPACE_BEGIN

struct EmbeddingRow {
  std::string speaker_id;
  std::string utterance_id;
  std::vector<double> values;
};

struct EmbeddingReport {
  double intra_mean_cosine = 0.0;  // over same-speaker pairs
  double inter_mean_cosine = 0.0;  // over different-speaker pairs
  double silhouette = 0.0;         // cosine distance
  /// Mean cosine similarity of each speaker's embeddings to its centroid.
  std::map<std::string, double> centroid_spread;
  std::vector<EmbeddingRow> rows;  // sorted by (speaker, utterance)

  double margin() const noexcept { return intra_mean_cosine - inter_mean_cosine; }
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Pure statistics over the given rows. Needs >= 2 speakers and >= 2 rows per speaker.
EmbeddingReport embedding_report(std::vector<EmbeddingRow> rows);

/// Pooled speaker embeddings (main branch, full utterances) for every entry of
/// `manifest` present in `cache`. Mels are normalized with `stats` when given.
std::vector<EmbeddingRow> extract_embeddings(const SrdNetwork& model,
                                             const audio::DatasetManifest& manifest,
                                             const audio::MelCache& cache,
                                             const audio::NormStats& stats);

/// speaker_id, utterance_id, then embedding values; tab-separated.
void write_embeddings_tsv(const std::filesystem::path& path, const std::vector<EmbeddingRow>& rows);

struct LightweightReport {
  ParamBreakdown conversion_path;
  std::size_t cmi_params = 0;
  double seconds_per_conversion = 0.0;  // 128-frame input, this machine
  static constexpr double kPublishedParams = 1.31e6;

  std::size_t headline() const noexcept { return conversion_path.total(); }
  std::string to_text() const;
};

/// Parameter accounting plus the wall-clock of one single-threaded
/// 128-frame conversion, averaged over `repeats` runs.
LightweightReport lightweight_report(const SrdNetwork& model, std::size_t cmi_params,
                                     int repeats = 3);

MAINVC_NAMESPACE_END
