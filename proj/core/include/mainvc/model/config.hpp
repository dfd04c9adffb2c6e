#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mainvc/precision.hpp"

MAINVC_NAMESPACE_BEGIN

struct ModelConfig {
  std::size_t n_mels = 80;
  std::size_t content_channels = 64;  // C_c
  std::size_t encoder_width = 64;
  std::size_t encoder_depth = 3;
  std::size_t speaker_hidden = 64;
  std::size_t speaker_depth = 2;
  std::size_t speaker_width = 128;  // pooled embedding size
  std::size_t decoder_width = 128;
  std::size_t decoder_depth = 4;  // one AdaIN layer per block
  std::vector<std::size_t> apc_dilations = {1, 2, 4, 8};
  std::size_t apc_kernel = 3;
  std::size_t ts_chunk = 8;
  double eps = 1e-5;
  double leaky_slope = 0.2;

  std::size_t n_adain_layers() const noexcept { return decoder_depth; }
  std::size_t max_dilation() const;
  /// Minimum frame count accepted by an APC block.
  std::size_t min_frames() const { return 2 * max_dilation() + 1; }
  /// Size of the flattened speaker code (alpha then beta).
  std::size_t speaker_code_size() const noexcept { return 2 * decoder_depth * decoder_width; }

  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
  /// Stable textual form; used for hashing and checkpoint headers.
  std::string canonical() const;
  bool operator==(const ModelConfig&) const = default;

  /// Full-size configuration used for parameter accounting.
  static ModelConfig reference();
  /// Small configuration for desk-scale training runs.
  static ModelConfig small();
};

MAINVC_NAMESPACE_END
