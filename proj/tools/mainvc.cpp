#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "mainvc/audio/dataset.hpp"
#include "mainvc/audio/synthetic.hpp"
#include "mainvc/convert/conversion.hpp"
#include "mainvc/eval/embedding.hpp"
#include "mainvc/eval/mcd.hpp"
#include "mainvc/train/checkpoint.hpp"
#include "mainvc/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace mainvc;

namespace {

constexpr int kInputError = 2;
constexpr int kConfigMismatch = 3;

struct Dataset {
  audio::DatasetManifest manifest;
  audio::MelCache cache;
  audio::NormStats stats;
};

fs::path cache_dir_for(const fs::path& manifest) { return manifest.parent_path() / "mels"; }

// Manifest plus its mel cache and statistics sidecar; missing pieces are
// recomputed in memory.
Dataset load_dataset(const fs::path& manifest_path, const audio::MelConfig& mel) {
  Dataset d;
  d.manifest = audio::read_manifest(manifest_path);
  const auto cache_dir = cache_dir_for(manifest_path);
  if (fs::exists(cache_dir / "index.json")) {
    d.cache = audio::MelCache::load(cache_dir);
    if (d.cache.config_hash() != mel.hash()) {
      throw ConfigMismatchError("mel cache " + cache_dir.string() +
                                " was built with a different front-end configuration");
    }
  } else {
    d.cache = audio::MelCache::compute(d.manifest, mel);
  }
  const auto stats_path = audio::norm_stats_path(manifest_path);
  if (fs::exists(stats_path)) {
    d.stats = audio::read_norm_stats(stats_path);
  } else {
    std::vector<const audio::MelSpectrogram*> mels;
    for (const auto& [key, m] : d.cache.items()) mels.push_back(&m);
    d.stats = audio::compute_norm_stats(mels);
  }
  return d;
}

int cmd_prepare(const fs::path& root, const fs::path& out) {
  const audio::MelConfig mel;
  fs::create_directories(out);
  auto manifest = audio::build_manifest(root, mel);
  for (const auto& w : manifest.warnings) std::cerr << "warning: " << w << "\n";
  const auto manifest_path = out / "manifest.jsonl";
  audio::write_manifest(manifest_path, manifest);
  const auto cache = audio::MelCache::compute(manifest, mel);
  cache.save(cache_dir_for(manifest_path));
  std::vector<const audio::MelSpectrogram*> mels;
  for (const auto& [key, m] : cache.items()) mels.push_back(&m);
  audio::write_norm_stats(audio::norm_stats_path(manifest_path), audio::compute_norm_stats(mels));
  std::cout << "wrote " << manifest.entries.size() << " entries to " << manifest_path.string()
            << " (" << manifest.pairable_speakers().size() << " pairable speakers)\n";
  return 0;
}

int cmd_train(const fs::path& config_path, const fs::path& data, const fs::path& out,
              const std::string& resume, const std::string& ablation) {
  RunConfig rc = config_path.empty() ? RunConfig{} : load_run_config(config_path);
  if (!ablation.empty()) rc.train.ablation = parse_ablation(ablation);
  const Dataset ds = load_dataset(data, rc.mel);
  fs::create_directories(out);

  std::optional<Trainer> trainer;
  if (!resume.empty()) {
    trainer.emplace(load_checkpoint(resume));
    if (trainer->model_config() != rc.model || !(trainer->mel_config() == rc.mel)) {
      throw ConfigMismatchError("checkpoint " + resume +
                                " was trained with a different model or front-end configuration");
    }
    std::cout << "resuming from step " << trainer->steps_done() << "\n";
  } else {
    trainer.emplace(rc.model, rc.mel, rc.train, ds.stats);
  }

  std::ofstream log(out / "train_log.jsonl", std::ios::app);
  const auto& tc = trainer->train_config();
  while (trainer->steps_done() < tc.total_steps) {
    const auto report = trainer->step(ds.manifest, ds.cache);
    if (report.aborted) {
      std::cerr << "step " << report.step << ": non-finite loss, update skipped\n";
    }
    if (tc.log_every && (report.step % tc.log_every == 0 || report.aborted)) {
      log << report.to_json() << "\n";
      log.flush();
      std::cout << "step " << report.step << " recon " << report.recon << " total "
                << report.total << "\n";
    }
    const auto done = trainer->steps_done();
    if ((tc.checkpoint_every && done % tc.checkpoint_every == 0) || done == tc.total_steps) {
      save_checkpoint(*trainer, out / "latest.ckpt");
    }
  }
  std::cout << "checkpoint: " << (out / "latest.ckpt").string() << "\n";
  return 0;
}

int cmd_convert(const ConversionRequest& req) {
  const auto result = run_conversion(req);
  std::cout << "mel: " << result.mel_path.string() << " (" << result.mel.frames << " frames)\n";
  if (result.audio_path) {
    std::cout << "audio (Griffin-Lim, lower fidelity than a neural vocoder): "
              << result.audio_path->string() << "\n";
  }
  return 0;
}

int cmd_eval_mcd(const fs::path& ref, const fs::path& hyp, bool no_dtw) {
  audio::Waveform a;
  audio::Waveform b;
  try {
    a = audio::load_waveform(ref);
    b = audio::load_waveform(hyp);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  const auto r = eval::mcd(a, b, !no_dtw);
  std::printf("MCD %.4f dB over %zu frames (%s)\n", r.value, r.frames_compared,
              r.aligned ? "DTW" : "frame-by-frame");
  return 0;
}

int cmd_export(const fs::path& ckpt, const fs::path& data, const fs::path& out) {
  const auto converter = Converter::from_checkpoint(ckpt);
  const Dataset ds = load_dataset(data, converter.mel_config());
  const auto rows =
      extract_embeddings(converter.model(), ds.manifest, ds.cache, converter.norm_stats());
  write_embeddings_tsv(out, rows);
  std::cout << "wrote " << rows.size() << " embeddings to " << out.string() << "\n";
  try {
    const auto report = embedding_report(rows);
    std::printf("intra-speaker cosine %.4f, inter-speaker cosine %.4f, silhouette %.4f\n",
                report.intra_mean_cosine, report.inter_mean_cosine, report.silhouette);
  } catch (const std::invalid_argument& e) {
    std::cout << "no similarity report: " << e.what() << "\n";
  }
  return 0;
}

int cmd_info(const fs::path& ckpt) {
  const auto info = read_checkpoint_info(ckpt);
  const Trainer trainer = load_checkpoint(ckpt);
  std::printf("format version %u, step %llu, config hash %016llx, %zu tensors\n", info.version,
              static_cast<unsigned long long>(info.step),
              static_cast<unsigned long long>(info.config_hash), info.tensor_count);
  std::cout << run_config_to_json(info.config) << "\n";
  std::cout << lightweight_report(trainer.model(), trainer.cmi().param_count()).to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"One-shot voice conversion toolkit"};
  app.require_subcommand(1);

  std::string root, out, config, data, resume, ablation, ckpt, ref, hyp;
  ConversionRequest req;
  bool no_dtw = false;
  std::size_t speakers = 4, utterances = 8;
  std::uint64_t seed = 1;
  double seconds = 3.0;

  auto* prepare = app.add_subcommand("prepare", "Scan <root>/<speaker>/<utt>.wav into a manifest, mel cache and statistics");
  prepare->add_option("--root", root, "Corpus root")->required();
  prepare->add_option("--out", out, "Output directory")->required();

  auto* synth = app.add_subcommand("synth-corpus", "Write a small synthetic multi-speaker corpus");
  synth->add_option("--out", out, "Output root")->required();
  synth->add_option("--speakers", speakers);
  synth->add_option("--utterances", utterances);
  synth->add_option("--seed", seed);
  synth->add_option("--seconds", seconds);

  auto* train = app.add_subcommand("train", "Train a model");
  train->add_option("--config", config, "JSON configuration");
  train->add_option("--data", data, "Manifest file")->required();
  train->add_option("--out", out, "Run directory")->required();
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_option("--ablation", ablation, "m1 | m2 | m3")
      ->check(CLI::IsMember({"m1", "m2", "m3", "none"}));

  auto* convert = app.add_subcommand("convert", "Convert one utterance to a target voice");
  convert->add_option("--ckpt", req.checkpoint_path)->required();
  convert->add_option("--source", req.source_path)->required();
  convert->add_option("--target", req.target_path)->required();
  convert->add_option("--out", req.output_path)->required();
  convert->add_flag("--audio", req.emit_audio, "Also render <out>.wav with Griffin-Lim");
  convert->add_option("--gl-iters", req.griffin_lim_iters);

  auto* mcd = app.add_subcommand("eval-mcd", "Mel-cepstral distortion between two waveforms");
  mcd->add_option("--ref", ref)->required();
  mcd->add_option("--hyp", hyp)->required();
  mcd->add_flag("--no-dtw", no_dtw);

  auto* exp = app.add_subcommand("export-embeddings", "Export speaker embeddings as TSV");
  exp->add_option("--ckpt", ckpt)->required();
  exp->add_option("--data", data)->required();
  exp->add_option("--out", out)->required();

  auto* info = app.add_subcommand("info", "Describe a checkpoint");
  info->add_option("--ckpt", ckpt)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*prepare) return cmd_prepare(root, out);
    if (*synth) {
      audio::write_synthetic_corpus(out, speakers, utterances, seed, seconds);
      std::cout << "wrote " << speakers << " x " << utterances << " utterances under " << out
                << "\n";
      return 0;
    }
    if (*train) return cmd_train(config, data, out, resume, ablation);
    if (*convert) return cmd_convert(req);
    if (*mcd) return cmd_eval_mcd(ref, hyp, no_dtw);
    if (*exp) return cmd_export(ckpt, data, out);
    if (*info) return cmd_info(ckpt);
  } catch (const ConfigMismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return 0;
}
