#include "mainvc/eval/embedding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mainvc/random.hpp"
#include "mainvc/tensor/ops.hpp"
#include "mainvc/train/trainer.hpp"

MAINVC_NAMESPACE_BEGIN

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: size mismatch");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) * std::sqrt(nb);
  if (denom == 0.0) return 0.0;
  return std::clamp(dot / denom, -1.0, 1.0);
}

EmbeddingReport embedding_report(std::vector<EmbeddingRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const EmbeddingRow& a, const EmbeddingRow& b) {
    return std::tie(a.speaker_id, a.utterance_id, a.values) <
           std::tie(b.speaker_id, b.utterance_id, b.values);
  });
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < rows.size(); ++i) groups[rows[i].speaker_id].push_back(i);
  if (groups.size() < 2) throw std::invalid_argument("embedding_report: need >= 2 speakers");
  for (const auto& [spk, idx] : groups) {
    if (idx.size() < 2) {
      throw std::invalid_argument("embedding_report: speaker " + spk + " has fewer than 2 rows");
    }
  }

  const std::size_t n = rows.size();
  std::vector<double> sim(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) sim[i * n + j] = cosine_similarity(rows[i].values, rows[j].values);
  }

  EmbeddingReport report;
  double intra = 0.0;
  double inter = 0.0;
  std::size_t n_intra = 0;
  std::size_t n_inter = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rows[i].speaker_id == rows[j].speaker_id) {
        intra += sim[i * n + j];
        ++n_intra;
      } else {
        inter += sim[i * n + j];
        ++n_inter;
      }
    }
  }
  report.intra_mean_cosine = intra / static_cast<double>(n_intra);
  report.inter_mean_cosine = inter / static_cast<double>(n_inter);

  double sil = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double a = 0.0;
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [spk, idx] : groups) {
      double acc = 0.0;
      std::size_t count = 0;
      for (auto j : idx) {
        if (j == i) continue;
        acc += 1.0 - sim[i * n + j];
        ++count;
      }
      const double d = acc / static_cast<double>(count);
      if (spk == rows[i].speaker_id) {
        a = d;
      } else {
        b = std::min(b, d);
      }
    }
    const double denom = std::max(a, b);
    sil += denom > 0.0 ? (b - a) / denom : 0.0;
  }
  report.silhouette = sil / static_cast<double>(n);

  for (const auto& [spk, idx] : groups) {
    std::vector<double> centroid(rows[idx.front()].values.size(), 0.0);
    for (auto i : idx) {
      for (std::size_t d = 0; d < centroid.size(); ++d) centroid[d] += rows[i].values[d];
    }
    double acc = 0.0;
    for (auto i : idx) acc += cosine_similarity(rows[i].values, centroid);
    report.centroid_spread[spk] = acc / static_cast<double>(idx.size());
  }
  report.rows = std::move(rows);
  return report;
}

std::vector<EmbeddingRow> extract_embeddings(const SrdNetwork& model,
                                             const audio::DatasetManifest& manifest,
                                             const audio::MelCache& cache,
                                             const audio::NormStats& stats) {
  NoGradGuard guard;
  std::vector<EmbeddingRow> rows;
  for (const auto& e : manifest.entries) {
    if (!cache.contains(e.key())) continue;
    const auto& mel = cache.at(e.key());
    if (mel.frames < model.config().min_frames()) continue;
    const Tensor z = mel_to_tensor(stats.empty() ? mel : stats.normalize(mel));
    const SpeakerCode code = model.speaker_encode(z, SpeakerBranch::main);
    const auto emb = code.embedding.data();
    rows.push_back({e.speaker_id, e.utterance_id, std::vector<double>(emb.begin(), emb.end())});
  }
  return rows;
}

void write_embeddings_tsv(const std::filesystem::path& path,
                          const std::vector<EmbeddingRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.precision(9);
  for (const auto& r : rows) {
    out << r.speaker_id << '\t' << r.utterance_id;
    for (double v : r.values) out << '\t' << v;
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string LightweightReport::to_text() const {
  std::ostringstream out;
  out << "conversion-path parameters: " << headline() << " ("
      << static_cast<double>(headline()) / 1e6 << "M)\n"
      << "  content encoder: " << conversion_path.content_encoder << "\n"
      << "  speaker encoder (shared by both Siamese branches): "
      << conversion_path.speaker_encoder << "\n"
      << "  sibling encoder extra: " << conversion_path.sibling_extra << "\n"
      << "  decoder: " << conversion_path.decoder << "\n"
      << "published reference figure: " << kPublishedParams / 1e6 << "M\n"
      << "CMI estimator parameters (training only, excluded): " << cmi_params << "\n"
      << "one 128-frame conversion, single thread: " << seconds_per_conversion * 1e3
      << " ms (local machine, not comparable across machines)\n";
  return out.str();
}

LightweightReport lightweight_report(const SrdNetwork& model, std::size_t cmi_params,
                                     int repeats) {
  LightweightReport report;
  report.conversion_path = model.param_count();
  report.cmi_params = cmi_params;
  const auto& c = model.config();
  Rng rng(7);
  std::vector<Scalar> values(c.n_mels * audio::kSegmentFrames);
  for (auto& v : values) v = static_cast<Scalar>(rng.normal());
  const Tensor z = Tensor::from({c.n_mels, audio::kSegmentFrames}, values);
  NoGradGuard guard;
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < std::max(repeats, 1); ++r) {
    const auto out = model.decode(model.content_encode(z), model.speaker_encode(z));
    (void)out;
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  report.seconds_per_conversion = elapsed.count() / std::max(repeats, 1);
  return report;
}

MAINVC_NAMESPACE_END
