#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mainvc/model/config.hpp"
#include "mainvc/model/layers.hpp"
#include "mainvc/tensor/tensor.hpp"

MAINVC_NAMESPACE_BEGIN

enum class SpeakerBranch { main, sibling };

struct SpeakerCode {
  Tensor embedding;  // [speaker_width], pooled pre-head vector
  Tensor alpha;      // [n_adain_layers x decoder_width]
  Tensor beta;       // [n_adain_layers x decoder_width]
};

/// Feature maps captured around each normalization layer.
struct FeatureTrace {
  std::vector<Tensor> inputs;  // fed into the layer
  std::vector<Tensor> maps;    // produced by the layer
};

struct ParamBreakdown {
  std::size_t content_encoder = 0;
  std::size_t speaker_encoder = 0;  // shared by main and sibling
  std::size_t sibling_extra = 0;    // always 0
  std::size_t decoder = 0;
  std::size_t total() const noexcept {
    return content_encoder + speaker_encoder + sibling_extra + decoder;
  }
};

/// Column order produced by a chunked time shuffle of `frames` frames.
std::vector<std::size_t> time_shuffle_order(std::size_t frames, std::size_t chunk,
                                            std::uint64_t seed);
/// Reorders the frames (columns) of a [C x T] map chunk-wise.
Tensor time_shuffle(const Tensor& z, std::size_t chunk, std::uint64_t seed);

/// 1 - cos(e1, e2), with norms stabilized as sqrt(sum e^2 + 1e-12).
Tensor siamese_loss(const Tensor& e1, const Tensor& e2);

/// Flattened speaker code (alpha rows then beta rows).
Tensor flatten_speaker_code(const SpeakerCode& code);

class SrdNetwork {
 public:
  SrdNetwork(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }

  /// [n_mels x T] -> [C_c x T].
  Tensor content_encode(const Tensor& z, FeatureTrace* trace = nullptr) const;
  /// The sibling branch shares every parameter with the main branch.
  SpeakerCode speaker_encode(const Tensor& z, SpeakerBranch which = SpeakerBranch::main) const;
  /// [C_c x L] codes -> [n_mels x L]. Throws ShapeError on width mismatch.
  Tensor decode(const Tensor& content, const Tensor& alpha, const Tensor& beta,
                FeatureTrace* trace = nullptr) const;
  Tensor decode(const Tensor& content, const SpeakerCode& code,
                FeatureTrace* trace = nullptr) const {
    return decode(content, code.alpha, code.beta, trace);
  }
  /// Dec(Enc_C(z), Enc_S(TS(z_for_speaker))). Without a seed no shuffle is applied.
  Tensor reconstruct(const Tensor& z, const Tensor& z_for_speaker,
                     std::optional<std::uint64_t> shuffle_seed) const;

  ParamBreakdown param_count() const;
  /// Every trainable tensor, in a fixed order.
  NamedParameters named_parameters() const;

 private:
  ModelConfig config_;
  // Content encoder.
  Conv1dLayer content_in_;
  std::vector<ApcBlock> content_blocks_;
  Conv1dLayer content_out_;
  // Speaker encoder.
  Conv1dLayer speaker_in_;
  std::vector<ApcBlock> speaker_blocks_;
  Conv1dLayer speaker_out_;
  LinearLayer alpha_head_;
  LinearLayer beta_head_;
  // Decoder.
  Conv1dLayer decoder_in_;
  std::vector<ApcBlock> decoder_blocks_;
  Conv1dLayer decoder_out_;
};

/// Closed-form parameter count of a configuration.
ParamBreakdown analytic_param_count(const ModelConfig& config);

MAINVC_NAMESPACE_END
