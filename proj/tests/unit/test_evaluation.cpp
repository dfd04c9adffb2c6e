#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "mainvc/audio/synthetic.hpp"
#include "mainvc/eval/embedding.hpp"
#include "mainvc/eval/mcd.hpp"

using namespace mainvc;
using namespace mainvc::eval;
using mainvc::testing::TempDir;

namespace {

const double kMcdScale = 10.0 / std::numbers::ln10 * std::sqrt(2.0);

Cepstra smooth_cepstra(std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  Cepstra c(frames, std::vector<double>(kMcdOrder));
  std::vector<double> phase(kMcdOrder), rate(kMcdOrder);
  for (std::size_t d = 0; d < kMcdOrder; ++d) {
    phase[d] = rng.uniform(0, 6.28);
    rate[d] = rng.uniform(0.05, 0.3);
  }
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t d = 0; d < kMcdOrder; ++d) c[t][d] = 3.0 * std::sin(rate[d] * t + phase[d]);
  }
  return c;
}

std::vector<EmbeddingRow> toy_rows() {
  return {{"a", "1", {1, 0, 0}}, {"a", "2", {0.9, 0.1, 0}}, {"b", "1", {0, 1, 0}}, {"b", "2", {0, 0.8, 0.3}}};
}

}  // namespace

TEST(Mcd, SingleFrameClosedForm) {
  Cepstra ref{{3, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0}};
  Cepstra conv{std::vector<double>(13, 0.0)};
  const auto plain = mcd_from_cepstra(ref, conv, false);
  const auto dtw = mcd_from_cepstra(ref, conv, true);
  EXPECT_NEAR(plain.value, kMcdScale * 5.0, 1e-9);
  EXPECT_NEAR(plain.value, 30.71, 5e-3);
  EXPECT_NEAR(dtw.value, plain.value, 1e-12);
  EXPECT_EQ(plain.frames_compared, 1u);
  EXPECT_TRUE(dtw.aligned);
  EXPECT_FALSE(plain.aligned);
}

TEST(Mcd, IdenticalIsZero) {
  const auto c = smooth_cepstra(40, 1);
  EXPECT_EQ(mcd_from_cepstra(c, c, false).value, 0.0);
  EXPECT_EQ(mcd_from_cepstra(c, c, true).value, 0.0);
  const auto w = audio::synthesize_utterance(audio::make_synthetic_speaker(0, 1), 3, 1.0);
  EXPECT_EQ(mcd(w, w, true).value, 0.0);
  EXPECT_EQ(mcd(w, w, false).value, 0.0);
}

TEST(Mcd, AlignmentBeatsFrameByFrameOnAStretchedCopy) {
  const auto ref = smooth_cepstra(80, 2);
  Cepstra stretched;
  for (std::size_t t = 0; t < 120; ++t) stretched.push_back(ref[t * 2 / 3]);
  const auto plain = mcd_from_cepstra(ref, stretched, false);
  const auto aligned = mcd_from_cepstra(ref, stretched, true);
  EXPECT_LT(aligned.value, plain.value);
  EXPECT_NEAR(aligned.value, 0.0, 1e-12);
  EXPECT_EQ(plain.frames_compared, 80u);
  EXPECT_GE(aligned.frames_compared, 120u);
}

TEST(Mcd, SymmetricAndHomogeneous) {
  const auto a = smooth_cepstra(50, 3);
  const auto b = smooth_cepstra(60, 4);
  for (bool dtw : {false, true}) {
    EXPECT_NEAR(mcd_from_cepstra(a, b, dtw).value, mcd_from_cepstra(b, a, dtw).value, 1e-9);
  }
  Cepstra zero(50, std::vector<double>(kMcdOrder, 0.0));
  Cepstra doubled = a;
  for (auto& f : doubled) {
    for (auto& v : f) v *= 2.5;
  }
  EXPECT_NEAR(mcd_from_cepstra(doubled, zero, false).value, 2.5 * mcd_from_cepstra(a, zero, false).value, 1e-9);
}

TEST(Mcd, RejectsMismatchedOrdersAndEmptyInput) {
  EXPECT_THROW(mcd_from_cepstra({{1, 2}}, {{1, 2, 3}}, false), std::invalid_argument);
  EXPECT_THROW(mcd_from_cepstra({}, {{1, 2, 3}}, true), std::invalid_argument);
}

TEST(Mcd, CepstrumShape) {
  const auto w = audio::synthesize_utterance(audio::make_synthetic_speaker(1, 1), 4, 1.0);
  const auto c = mel_cepstrum(w, audio::MelConfig{});
  EXPECT_EQ(c.size(), 63u);
  EXPECT_EQ(c.front().size(), kMcdOrder);
  auto w2 = w;
  for (auto& s : w2.samples) s *= 0.5;
  // A gain change only moves c0, which is excluded.
  EXPECT_LT(mcd(w, w2, false).value, 1e-3);
}

TEST(Embedding, CosineSimilarity) {
  EXPECT_NEAR(cosine_similarity({1, 0}, {0, 3}), 0.0, 1e-12);
  EXPECT_NEAR(cosine_similarity({1, 2}, {2, 4}), 1.0, 1e-12);
  EXPECT_NEAR(cosine_similarity({1, 2}, {-1, -2}), -1.0, 1e-12);
  EXPECT_THROW(cosine_similarity({1}, {1, 2}), std::invalid_argument);
}

TEST(Embedding, ReportMatchesHandComputation) {
  const auto rows = toy_rows();
  const auto r = embedding_report(rows);
  const double intra = (cosine_similarity(rows[0].values, rows[1].values) +
                        cosine_similarity(rows[2].values, rows[3].values)) / 2.0;
  double inter = 0.0;
  for (int i : {0, 1}) {
    for (int j : {2, 3}) inter += cosine_similarity(rows[i].values, rows[j].values) / 4.0;
  }
  EXPECT_NEAR(r.intra_mean_cosine, intra, 1e-12);
  EXPECT_NEAR(r.inter_mean_cosine, inter, 1e-12);
  EXPECT_NEAR(r.margin(), intra - inter, 1e-12);
  EXPECT_GT(r.silhouette, 0.5);
  EXPECT_LE(r.silhouette, 1.0);
  EXPECT_EQ(r.centroid_spread.size(), 2u);
}

TEST(Embedding, InvariantToOrderAndScale) {
  auto rows = toy_rows();
  const auto base = embedding_report(rows);
  std::swap(rows[0], rows[3]);
  std::swap(rows[1], rows[2]);
  for (auto& v : rows[1].values) v *= 7.0;
  const auto moved = embedding_report(rows);
  EXPECT_NEAR(moved.intra_mean_cosine, base.intra_mean_cosine, 1e-12);
  EXPECT_NEAR(moved.inter_mean_cosine, base.inter_mean_cosine, 1e-12);
  EXPECT_NEAR(moved.silhouette, base.silhouette, 1e-12);
  EXPECT_EQ(moved.rows.front().speaker_id, "a");
}

TEST(Embedding, DuplicatedUtteranceIsPerfectlySimilar) {
  std::vector<EmbeddingRow> rows{{"a", "1", {0.3, -1, 2}}, {"a", "1b", {0.3, -1, 2}},
                                 {"b", "1", {1, 1, 1}},    {"b", "1b", {1, 1, 1}}};
  EXPECT_NEAR(embedding_report(rows).intra_mean_cosine, 1.0, 1e-12);
}

TEST(Embedding, NeedsTwoSpeakersWithTwoRowsEach) {
  auto rows = toy_rows();
  for (auto& r : rows) r.speaker_id = "a";
  EXPECT_THROW(embedding_report(rows), std::invalid_argument);
  auto short_rows = toy_rows();
  short_rows.pop_back();
  EXPECT_THROW(embedding_report(short_rows), std::invalid_argument);
}

TEST(Embedding, SilhouetteIsNearZeroUnderShuffledLabels) {
  TempDir dir("silhouette");
  const auto data = mainvc::testing::make_synthetic_data(dir.path(), 4, 4, 12, 2.0);
  double mean = 0.0;
  constexpr int kSeeds = 5;
  for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
    const SrdNetwork model(ModelConfig::small(), seed);
    auto rows = extract_embeddings(model, data.manifest, data.cache, data.stats);
    ASSERT_EQ(rows.size(), 16u);
    // Two random groups: with more the nearest-other-cluster minimum biases the score.
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < rows.size(); ++i) labels.push_back(i % 2 ? "x" : "y");
    Rng rng(seed);
    rng.shuffle(std::span<std::string>(labels));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i].speaker_id = labels[i];
    mean += embedding_report(rows).silhouette / kSeeds;
  }
  EXPECT_LT(std::abs(mean), 0.2);
}

TEST(Embedding, TsvLayout) {
  TempDir dir("tsv");
  write_embeddings_tsv(dir / "e.tsv", {{"spk", "u1", {0.5, -2}}, {"spk", "u2", {1, 0}}});
  std::ifstream in(dir / "e.tsv");
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  ASSERT_EQ(lines.size(), 2u);
  std::istringstream fields(lines[0]);
  std::string spk, utt;
  double a = 0, b = 0;
  std::getline(fields, spk, '\t');
  std::getline(fields, utt, '\t');
  fields >> a >> b;
  EXPECT_EQ(spk, "spk");
  EXPECT_EQ(utt, "u1");
  EXPECT_EQ(a, 0.5);
  EXPECT_EQ(b, -2.0);
  EXPECT_EQ(std::count(lines[1].begin(), lines[1].end(), '\t'), 3);
}

TEST(Lightweight, HeadlineIsTheConversionPath) {
  const SrdNetwork model(ModelConfig::small(), 1);
  const auto r = lightweight_report(model, 12345, 1);
  EXPECT_EQ(r.headline(), model.param_count().total());
  EXPECT_EQ(r.cmi_params, 12345u);
  EXPECT_EQ(r.conversion_path.sibling_extra, 0u);
  EXPECT_GT(r.seconds_per_conversion, 0.0);
  const auto text = r.to_text();
  EXPECT_NE(text.find("1.31"), std::string::npos);
  EXPECT_NE(text.find(std::to_string(r.headline())), std::string::npos);
}
