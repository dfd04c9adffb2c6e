#include "mainvc/convert/conversion.hpp"

#include "mainvc/audio/griffin_lim.hpp"
#include "mainvc/tensor/ops.hpp"
#include "mainvc/train/trainer.hpp"

MAINVC_NAMESPACE_BEGIN

Converter::Converter(SrdNetwork model, audio::MelConfig mel, audio::NormStats stats)
    : model_(std::move(model)), mel_(std::move(mel)), stats_(std::move(stats)) {}

Converter Converter::from_checkpoint(const std::filesystem::path& path) {
  Trainer trainer = load_checkpoint(path);
  return Converter(trainer.model(), trainer.mel_config(), trainer.norm_stats());
}

audio::MelSpectrogram Converter::convert(const audio::MelSpectrogram& source,
                                         const audio::MelSpectrogram& target) const {
  const auto& cfg = model_.config();
  for (const auto* mel : {&source, &target}) {
    if (mel->n_mels != cfg.n_mels) {
      throw InputError("mel has " + std::to_string(mel->n_mels) + " bins, model expects " +
                       std::to_string(cfg.n_mels));
    }
    if (mel->frames < cfg.min_frames()) {
      throw InputError("utterance too short: " + std::to_string(mel->frames) +
                       " frames, need at least " + std::to_string(cfg.min_frames()));
    }
  }
  NoGradGuard guard;
  const auto prepare = [&](const audio::MelSpectrogram& m) {
    return mel_to_tensor(stats_.empty() ? m : stats_.normalize(m));
  };
  const Tensor content = model_.content_encode(prepare(source));
  const SpeakerCode code = model_.speaker_encode(prepare(target), SpeakerBranch::main);
  auto out = tensor_to_mel(model_.decode(content, code));
  return stats_.empty() ? out : stats_.denormalize(out);
}

audio::MelSpectrogram Converter::checked_mel(const audio::Waveform& wave, const char* role) const {
  try {
    return audio::waveform_to_mel(wave, mel_);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string(role) + ": " + e.what());
  }
}

audio::MelSpectrogram Converter::convert(const audio::Waveform& source,
                                         const audio::Waveform& target) const {
  return convert(checked_mel(source, "source"), checked_mel(target, "target"));
}

ConversionResult run_conversion(const ConversionRequest& request,
                                const audio::MelConfig& frontend) {
  if (request.emit_audio && request.griffin_lim_iters < 1) {
    throw InputError("--gl-iters must be >= 1");
  }
  for (const auto& p : {request.source_path, request.target_path}) {
    if (!std::filesystem::exists(p)) throw InputError("no such file: " + p.string());
  }
  if (!std::filesystem::exists(request.checkpoint_path)) {
    throw InputError("no such checkpoint: " + request.checkpoint_path.string());
  }
  const Converter converter = Converter::from_checkpoint(request.checkpoint_path);
  if (!(converter.mel_config() == frontend)) {
    throw ConfigMismatchError("checkpoint front end (" + converter.mel_config().canonical() +
                              ") differs from the requested front end (" + frontend.canonical() +
                              ")");
  }
  const auto load = [](const std::filesystem::path& p) {
    try {
      return audio::load_waveform(p);
    } catch (const std::exception& e) {
      throw InputError(p.string() + ": " + e.what());
    }
  };
  ConversionResult result;
  result.mel = converter.convert(load(request.source_path), load(request.target_path));
  result.mel_path = request.output_path;
  audio::write_mel_file(result.mel_path, result.mel, frontend.hash());
  if (request.emit_audio) {
    result.audio = audio::griffin_lim(result.mel, frontend, request.griffin_lim_iters);
    result.audio_path = std::filesystem::path(request.output_path.string() + ".wav");
    audio::save_waveform(*result.audio_path, *result.audio);
  }
  return result;
}

MAINVC_NAMESPACE_END
