#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <thread>

#include "fixtures.hpp"
#include "mainvc/audio/synthetic.hpp"
#include "mainvc/convert/conversion.hpp"
#include "mainvc/tensor/ops.hpp"
#include "mainvc/train/checkpoint.hpp"

using namespace mainvc;
using mainvc::testing::TempDir;

namespace {

audio::MelSpectrogram random_mel(std::size_t frames, std::uint64_t seed) {
  Rng rng(seed);
  audio::MelSpectrogram m;
  m.n_mels = 80;
  m.frames = frames;
  m.values.resize(80 * frames);
  for (auto& v : m.values) v = static_cast<float>(-5.0 + 2.0 * rng.normal());
  return m;
}

audio::NormStats toy_stats() {
  audio::NormStats s;
  for (std::size_t i = 0; i < 80; ++i) {
    s.mean.push_back(-5.0f + 0.01f * static_cast<float>(i));
    s.std.push_back(2.0f + 0.005f * static_cast<float>(i));
  }
  return s;
}

Converter untrained(std::uint64_t seed = 1) {
  return Converter(SrdNetwork(ModelConfig::small(), seed), audio::MelConfig{}, toy_stats());
}

class ConversionFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("convert");
    data_ = new mainvc::testing::SyntheticData(
        mainvc::testing::make_synthetic_data(*dir_ / "corpus", 2, 2, 8));
    auto cfg = mainvc::testing::desk_train_config(3, 5);
    cfg.batch_size = 2;
    cfg.inner_steps = 1;
    Trainer trainer(ModelConfig::small(), audio::MelConfig{}, cfg, data_->stats);
    for (int s = 0; s < 3; ++s) trainer.step(data_->manifest, data_->cache);
    save_checkpoint(trainer, *dir_ / "model.ckpt");
  }
  static void TearDownTestSuite() {
    delete data_;
    delete dir_;
  }
  static ConversionRequest request(const std::string& out) {
    const auto& e = data_->manifest.entries;
    ConversionRequest r;
    r.source_path = e.front().path;
    r.target_path = e.back().path;
    r.checkpoint_path = *dir_ / "model.ckpt";
    r.output_path = *dir_ / out;
    return r;
  }
  static TempDir* dir_;
  static mainvc::testing::SyntheticData* data_;
};
TempDir* ConversionFixture::dir_ = nullptr;
mainvc::testing::SyntheticData* ConversionFixture::data_ = nullptr;

}  // namespace

TEST(Converter, KeepsTheSourceFrameCount) {
  const auto conv = untrained();
  for (std::size_t frames : {100u, 128u, 500u}) {
    const auto out = conv.convert(random_mel(frames, frames), random_mel(77, 3));
    EXPECT_EQ(out.frames, frames);
    EXPECT_EQ(out.n_mels, 80u);
    for (float v : out.values) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(Converter, SelfConversionIsUnshuffledReconstruction) {
  const auto conv = untrained(4);
  const auto stats = toy_stats();
  const auto z = random_mel(128, 5);
  const auto out = conv.convert(z, z);
  const auto zn = mel_to_tensor(stats.normalize(z));
  const auto expected = stats.denormalize(tensor_to_mel(conv.model().reconstruct(zn, zn, std::nullopt)));
  EXPECT_EQ(out.values, expected.values);
}

TEST(Converter, PureAndThreadSafe) {
  const auto conv = untrained(6);
  const auto src = random_mel(90, 7);
  const auto tgt = random_mel(60, 8);
  const auto once = conv.convert(src, tgt);
  EXPECT_EQ(conv.convert(src, tgt).values, once.values);
  std::vector<std::vector<float>> results(4);
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < results.size(); ++i) {
    workers.emplace_back([&, i] { results[i] = conv.convert(src, tgt).values; });
  }
  for (auto& w : workers) w.join();
  for (const auto& r : results) EXPECT_EQ(r, once.values);
}

TEST(Converter, TargetChangesTheOutput) {
  const auto conv = untrained(9);
  const auto src = random_mel(64, 10);
  const auto a = conv.convert(src, random_mel(64, 11));
  const auto b = conv.convert(src, random_mel(64, 12));
  double diff = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) diff = std::max(diff, double(std::abs(a.values[i] - b.values[i])));
  EXPECT_GT(diff, 1e-4);
}

TEST(Converter, RejectsBadInput) {
  const auto conv = untrained();
  EXPECT_THROW(conv.convert(random_mel(10, 1), random_mel(64, 2)), InputError);
  EXPECT_THROW(conv.convert(random_mel(64, 1), random_mel(16, 2)), InputError);
  audio::MelSpectrogram narrow;
  narrow.n_mels = 40;
  narrow.frames = 64;
  narrow.values.assign(40 * 64, 0.0f);
  EXPECT_THROW(conv.convert(narrow, random_mel(64, 2)), InputError);
  audio::Waveform blip;
  blip.samples.assign(300, 0.1);
  EXPECT_THROW(conv.convert(blip, blip), InputError);
}

TEST_F(ConversionFixture, DecoderStatisticsFollowTheTargetCode) {
  const auto conv = Converter::from_checkpoint(*dir_ / "model.ckpt");
  const auto& model = conv.model();
  const auto& stats = conv.norm_stats();
  const auto& items = data_->cache.items();
  const auto src = mel_to_tensor(stats.normalize(items.begin()->second));
  const auto tgt = mel_to_tensor(stats.normalize(items.rbegin()->second));
  NoGradGuard guard;
  const auto src_code = model.speaker_encode(src);
  const auto tgt_code = model.speaker_encode(tgt);
  FeatureTrace trace;
  model.decode(model.content_encode(src), tgt_code, &trace);
  double to_target = 0.0, to_source = 0.0;
  for (std::size_t l = 0; l < trace.maps.size(); ++l) {
    const auto s = channel_stats(trace.maps[l]);
    for (std::size_t c = 0; c < s.mean.size(); ++c) {
      to_target += std::pow(s.mean[c] - tgt_code.alpha.at(l, c), 2);
      to_source += std::pow(s.mean[c] - src_code.alpha.at(l, c), 2);
    }
  }
  EXPECT_GT(std::sqrt(to_source) / std::max(std::sqrt(to_target), 1e-12), 1.0);
}

TEST_F(ConversionFixture, RunWritesMelAndAudio) {
  auto req = request("out.mel");
  req.emit_audio = true;
  req.griffin_lim_iters = 4;
  const auto res = run_conversion(req);
  const auto source_frames = data_->manifest.entries.front().n_frames;
  EXPECT_EQ(res.mel.frames, source_frames);
  const auto file = audio::read_mel_file(*dir_ / "out.mel");
  EXPECT_EQ(file.mel.values, res.mel.values);
  EXPECT_EQ(file.config_hash, audio::MelConfig{}.hash());
  ASSERT_TRUE(res.audio_path.has_value());
  EXPECT_EQ(*res.audio_path, *dir_ / "out.mel.wav");
  const auto wav = audio::load_waveform(*res.audio_path);
  EXPECT_EQ(wav.size(), (source_frames - 1) * 256);
}

TEST_F(ConversionFixture, RunReportsInputAndConfigErrors) {
  auto missing = request("x.mel");
  missing.source_path = *dir_ / "nope.wav";
  EXPECT_THROW(run_conversion(missing), InputError);

  auto no_ckpt = request("x.mel");
  no_ckpt.checkpoint_path = *dir_ / "nope.ckpt";
  EXPECT_THROW(run_conversion(no_ckpt), InputError);

  std::ofstream(*dir_ / "garbage.wav") << "not audio at all";
  auto garbage = request("x.mel");
  garbage.target_path = *dir_ / "garbage.wav";
  EXPECT_THROW(run_conversion(garbage), InputError);

  auto iters = request("x.mel");
  iters.emit_audio = true;
  iters.griffin_lim_iters = 0;
  EXPECT_THROW(run_conversion(iters), InputError);

  audio::MelConfig other;
  other.hop = 128;
  EXPECT_THROW(run_conversion(request("x.mel"), other), ConfigMismatchError);
}
