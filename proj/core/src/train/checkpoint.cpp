#include "mainvc/train/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

MAINVC_NAMESPACE_BEGIN

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'M', 'A', 'I', 'N', 'V', 'C', 'K', '1'};

json model_to_json(const ModelConfig& c) {
  return {{"n_mels", c.n_mels},
          {"content_channels", c.content_channels},
          {"encoder_width", c.encoder_width},
          {"encoder_depth", c.encoder_depth},
          {"speaker_hidden", c.speaker_hidden},
          {"speaker_depth", c.speaker_depth},
          {"speaker_width", c.speaker_width},
          {"decoder_width", c.decoder_width},
          {"decoder_depth", c.decoder_depth},
          {"apc_dilations", c.apc_dilations},
          {"apc_kernel", c.apc_kernel},
          {"ts_chunk", c.ts_chunk},
          {"eps", c.eps},
          {"leaky_slope", c.leaky_slope}};
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ModelConfig model_from_json(const json& j) {
  ModelConfig c = ModelConfig::small();
  if (j.contains("preset")) {
    const auto preset = j.at("preset").get<std::string>();
    if (preset == "reference") {
      c = ModelConfig::reference();
    } else if (preset != "small") {
      throw std::invalid_argument("unknown model preset '" + preset + "'");
    }
  }
  read_opt(j, "n_mels", c.n_mels);
  read_opt(j, "content_channels", c.content_channels);
  read_opt(j, "encoder_width", c.encoder_width);
  read_opt(j, "encoder_depth", c.encoder_depth);
  read_opt(j, "speaker_hidden", c.speaker_hidden);
  read_opt(j, "speaker_depth", c.speaker_depth);
  read_opt(j, "speaker_width", c.speaker_width);
  read_opt(j, "decoder_width", c.decoder_width);
  read_opt(j, "decoder_depth", c.decoder_depth);
  read_opt(j, "apc_dilations", c.apc_dilations);
  read_opt(j, "apc_kernel", c.apc_kernel);
  read_opt(j, "ts_chunk", c.ts_chunk);
  read_opt(j, "eps", c.eps);
  read_opt(j, "leaky_slope", c.leaky_slope);
  c.validate();
  return c;
}

json mel_to_json(const audio::MelConfig& c) {
  return {{"sample_rate", c.sample_rate}, {"n_fft", c.n_fft},   {"hop", c.hop},
          {"win", c.win},                 {"n_mels", c.n_mels}, {"fmin", c.fmin},
          {"fmax", c.fmax},               {"log_floor", c.log_floor}};
}

audio::MelConfig mel_from_json(const json& j) {
  audio::MelConfig c;
  read_opt(j, "sample_rate", c.sample_rate);
  read_opt(j, "n_fft", c.n_fft);
  read_opt(j, "hop", c.hop);
  read_opt(j, "win", c.win);
  read_opt(j, "n_mels", c.n_mels);
  read_opt(j, "fmin", c.fmin);
  read_opt(j, "fmax", c.fmax);
  read_opt(j, "log_floor", c.log_floor);
  c.validate();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return {{"seed", c.seed},
          {"batch_size", c.batch_size},
          {"total_steps", c.total_steps},
          {"inner_steps", c.inner_steps},
          {"warmup_steps", c.warmup_steps},
          {"checkpoint_every", c.checkpoint_every},
          {"log_every", c.log_every},
          {"segment_frames", c.segment_frames},
          {"lr", c.adam.lr},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"adam_eps", c.adam.eps},
          {"cmi_lr", c.cmi_lr},
          {"cmi_hidden", c.cmi_hidden},
          {"mine_ema", c.mine_ema},
          {"mi_sign_as_printed", c.mi_sign_as_printed},
          {"ablation", to_string(c.ablation)}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  read_opt(j, "seed", c.seed);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "total_steps", c.total_steps);
  read_opt(j, "inner_steps", c.inner_steps);
  read_opt(j, "warmup_steps", c.warmup_steps);
  read_opt(j, "checkpoint_every", c.checkpoint_every);
  read_opt(j, "log_every", c.log_every);
  read_opt(j, "segment_frames", c.segment_frames);
  read_opt(j, "lr", c.adam.lr);
  read_opt(j, "beta1", c.adam.beta1);
  read_opt(j, "beta2", c.adam.beta2);
  read_opt(j, "adam_eps", c.adam.eps);
  read_opt(j, "cmi_lr", c.cmi_lr);
  read_opt(j, "cmi_hidden", c.cmi_hidden);
  read_opt(j, "mine_ema", c.mine_ema);
  read_opt(j, "mi_sign_as_printed", c.mi_sign_as_printed);
  if (j.contains("ablation")) c.ablation = parse_ablation(j.at("ablation").get<std::string>());
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig rc;
  if (j.contains("model")) rc.model = model_from_json(j.at("model"));
  if (j.contains("mel")) rc.mel = mel_from_json(j.at("mel"));
  if (j.contains("train")) rc.train = train_from_json(j.at("train"));
  return rc;
}

json run_config_json(const RunConfig& rc) {
  return {{"model", model_to_json(rc.model)},
          {"mel", mel_to_json(rc.mel)},
          {"train", train_to_json(rc.train)}};
}

// Named flat arrays in payload order.
struct Entry {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

template <typename T>
std::vector<float> to_float(std::span<const T> data) {
  return std::vector<float>(data.begin(), data.end());
}

std::vector<Entry> collect_entries(const Trainer& trainer) {
  std::vector<Entry> out;
  auto add_group = [&](const std::string& prefix, const Adam& adam) {
    const auto& params = adam.parameters();
    const auto& moments = adam.moments();
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& [name, p] = params[i];
      out.push_back({prefix + "/" + name, p.shape(), to_float(p.data())});
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& [name, p] = params[i];
      out.push_back({prefix + ".adam_m/" + name, p.shape(),
                     to_float(std::span<const Scalar>(moments[i].m))});
      out.push_back({prefix + ".adam_v/" + name, p.shape(),
                     to_float(std::span<const Scalar>(moments[i].v))});
    }
  };
  add_group("model", trainer.optimizer());
  add_group("cmi", trainer.cmi().optimizer());
  const auto& stats = trainer.norm_stats();
  out.push_back({"norm/mean", {stats.mean.size()}, stats.mean});
  out.push_back({"norm/std", {stats.std.size()}, stats.std});
  return out;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& bytes, std::size_t pos, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Parsed {
  json header;
  std::string bytes;
  std::size_t payload_offset = 0;
  std::uint32_t version = 0;
};

Parsed parse(const std::filesystem::path& path) {
  Parsed p;
  p.bytes = read_all(path);
  const auto& b = p.bytes;
  if (b.size() < 20 || std::memcmp(b.data(), kMagic, 8) != 0) {
    throw CheckpointError(path.string() + ": not a checkpoint (bad magic or truncated)");
  }
  p.version = static_cast<std::uint32_t>(get_le(b, 8, 4));
  if (p.version != kCheckpointVersion) {
    throw CheckpointError(path.string() + ": unsupported checkpoint version " +
                          std::to_string(p.version));
  }
  const std::uint64_t header_len = get_le(b, 12, 8);
  if (header_len > b.size() - 20) throw CheckpointError(path.string() + ": truncated header");
  try {
    p.header = json::parse(b.substr(20, header_len));
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": malformed header: " + e.what());
  }
  p.payload_offset = 20 + header_len;
  std::size_t expected = 0;
  try {
    for (const auto& t : p.header.at("tensors")) {
      const std::size_t end = t.at("offset").get<std::size_t>() + t.at("count").get<std::size_t>();
      expected = std::max(expected, end);
    }
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": malformed tensor directory: " + e.what());
  }
  if (b.size() != p.payload_offset + 4 * expected) {
    throw CheckpointError(path.string() + ": payload size " +
                          std::to_string(b.size() - p.payload_offset) + " bytes, expected " +
                          std::to_string(4 * expected) + " (truncated or corrupt)");
  }
  return p;
}

float payload_float(const Parsed& p, std::size_t index) {
  return std::bit_cast<float>(
      static_cast<std::uint32_t>(get_le(p.bytes, p.payload_offset + 4 * index, 4)));
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  try {
    return run_config_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid configuration: ") + e.what());
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open configuration " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

std::string run_config_to_json(const RunConfig& config) { return run_config_json(config).dump(2); }

std::uint64_t config_hash(const ModelConfig& model, const audio::MelConfig& mel) {
  return audio::fnv1a(model.canonical() + "|" + mel.canonical());
}

void save_checkpoint(const Trainer& trainer, const std::filesystem::path& path) {
  const auto entries = collect_entries(trainer);
  RunConfig rc{trainer.model_config(), trainer.mel_config(), trainer.train_config()};
  json header;
  header["format_version"] = kCheckpointVersion;
  header["config"] = run_config_json(rc);
  header["config_hash"] = config_hash(rc.model, rc.mel);
  header["step"] = trainer.steps_done();
  header["rng"] = {{"seed", rc.train.seed}, {"step", trainer.steps_done()}};
  header["adam_steps"] = {{"model", trainer.optimizer().steps()},
                          {"cmi", trainer.cmi().optimizer().steps()}};
  header["mine_ema"] = trainer.cmi().mine_ema_value();
  json dir = json::array();
  std::size_t offset = 0;
  for (const auto& e : entries) {
    dir.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset},
                   {"count", e.values.size()}});
    offset += e.values.size();
  }
  header["tensors"] = dir;
  const std::string header_text = header.dump();

  std::string bytes(kMagic, 8);
  put_u32(bytes, kCheckpointVersion);
  put_u64(bytes, header_text.size());
  bytes += header_text;
  bytes.reserve(bytes.size() + 4 * offset);
  for (const auto& e : entries) {
    for (float v : e.values) put_u32(bytes, std::bit_cast<std::uint32_t>(v));
  }

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
  const auto p = parse(path);
  CheckpointInfo info;
  info.version = p.version;
  try {
    info.config = run_config_from_json(p.header.at("config"));
    info.config_hash = p.header.at("config_hash").get<std::uint64_t>();
    info.step = p.header.at("step").get<std::uint64_t>();
    info.tensor_count = p.header.at("tensors").size();
  } catch (const std::exception& e) {
    throw CheckpointError(path.string() + ": malformed header: " + e.what());
  }
  info.payload_floats = (p.bytes.size() - p.payload_offset) / 4;
  if (config_hash(info.config.model, info.config.mel) != info.config_hash) {
    throw ConfigMismatchError(path.string() +
                              ": configuration hash does not match the stored configuration");
  }
  return info;
}

Trainer load_checkpoint(const std::filesystem::path& path) {
  const auto info = read_checkpoint_info(path);
  const auto p = parse(path);

  std::map<std::string, std::pair<Shape, std::size_t>> directory;
  for (const auto& t : p.header.at("tensors")) {
    directory[t.at("name").get<std::string>()] = {t.at("shape").get<Shape>(),
                                                  t.at("offset").get<std::size_t>()};
  }
  auto lookup = [&](const std::string& name, const Shape& shape) {
    const auto it = directory.find(name);
    if (it == directory.end()) throw CheckpointError(path.string() + ": missing tensor " + name);
    if (it->second.first != shape) {
      throw ConfigMismatchError(path.string() + ": tensor " + name + " has shape " +
                                shape_to_string(it->second.first) + ", model expects " +
                                shape_to_string(shape));
    }
    return it->second.second;
  };

  audio::NormStats stats;
  const auto& norm_mean = directory.find("norm/mean");
  const auto& norm_std = directory.find("norm/std");
  if (norm_mean == directory.end() || norm_std == directory.end()) {
    throw CheckpointError(path.string() + ": missing normalization statistics");
  }
  for (std::size_t i = 0; i < norm_mean->second.first.at(0); ++i) {
    stats.mean.push_back(payload_float(p, norm_mean->second.second + i));
  }
  for (std::size_t i = 0; i < norm_std->second.first.at(0); ++i) {
    stats.std.push_back(payload_float(p, norm_std->second.second + i));
  }

  Trainer trainer(info.config.model, info.config.mel, info.config.train, std::move(stats));
  auto restore = [&](const std::string& prefix, Adam& adam) {
    auto& moments = adam.moments();
    const auto& params = adam.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto [name, tensor] = params[i];
      const auto n = tensor.numel();
      const auto off = lookup(prefix + "/" + name, tensor.shape());
      auto data = tensor.mutable_data();
      for (std::size_t k = 0; k < n; ++k) data[k] = static_cast<Scalar>(payload_float(p, off + k));
      const auto off_m = lookup(prefix + ".adam_m/" + name, tensor.shape());
      const auto off_v = lookup(prefix + ".adam_v/" + name, tensor.shape());
      for (std::size_t k = 0; k < n; ++k) {
        moments[i].m[k] = static_cast<Scalar>(payload_float(p, off_m + k));
        moments[i].v[k] = static_cast<Scalar>(payload_float(p, off_v + k));
      }
    }
  };
  restore("model", trainer.optimizer());
  restore("cmi", trainer.cmi().optimizer());
  trainer.optimizer().set_steps(p.header.at("adam_steps").at("model").get<std::uint64_t>());
  trainer.cmi().optimizer().set_steps(p.header.at("adam_steps").at("cmi").get<std::uint64_t>());
  trainer.cmi().set_mine_ema_value(p.header.at("mine_ema").get<double>());
  trainer.set_steps_done(info.step);
  return trainer;
}

MAINVC_NAMESPACE_END
