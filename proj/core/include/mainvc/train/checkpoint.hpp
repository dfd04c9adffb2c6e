#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "mainvc/train/trainer.hpp"

MAINVC_NAMESPACE_BEGIN

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Stored configuration disagrees with what the caller expects.
class ConfigMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Model, front end and training settings of one run.
struct RunConfig {
  ModelConfig model = ModelConfig::small();
  audio::MelConfig mel{};
  TrainConfig train{};
};

/// JSON with optional "model", "mel" and "train" objects; absent keys keep
/// their defaults. "model" may carry "preset": "small" | "reference".
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string run_config_to_json(const RunConfig& config);

/// FNV-1a over the model and front-end descriptions.
std::uint64_t config_hash(const ModelConfig& model, const audio::MelConfig& mel);

struct CheckpointInfo {
  std::uint32_t version = 0;
  RunConfig config;
  std::uint64_t config_hash = 0;
  std::uint64_t step = 0;
  std::size_t tensor_count = 0;
  std::size_t payload_floats = 0;
};

// Layout: "MAINVCK1", u32 version, u64 header length, header JSON (configs,
// step, optimizer counters, tensor directory of names/shapes/offsets), then
// little-endian float32 payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Trainer& trainer, const std::filesystem::path& path);
/// Throws CheckpointError on malformed or truncated files and
/// ConfigMismatchError when the stored hash does not match its configuration.
Trainer load_checkpoint(const std::filesystem::path& path);
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

MAINVC_NAMESPACE_END
