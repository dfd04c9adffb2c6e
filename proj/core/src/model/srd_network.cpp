#include "mainvc/model/srd_network.hpp"

#include <numeric>

#include "mainvc/random.hpp"
#include "mainvc/tensor/ops.hpp"

MAINVC_NAMESPACE_BEGIN

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x75;

Tensor row(const Tensor& m, std::size_t r) {
  return reshape(gather_rows(m, {r}), {m.dim(1)});
}

}  // namespace

std::vector<std::size_t> time_shuffle_order(std::size_t frames, std::size_t chunk,
                                            std::uint64_t seed) {
  if (chunk == 0) throw std::invalid_argument("time_shuffle: chunk must be >= 1");
  const std::size_t n_chunks = (frames + chunk - 1) / chunk;
  std::vector<std::size_t> chunks(n_chunks);
  std::iota(chunks.begin(), chunks.end(), 0);
  Rng rng(derive_seed(seed, kShuffleStream, 0));
  rng.shuffle(std::span<std::size_t>(chunks));
  std::vector<std::size_t> order;
  order.reserve(frames);
  for (auto c : chunks) {
    for (std::size_t t = c * chunk; t < std::min(frames, (c + 1) * chunk); ++t) order.push_back(t);
  }
  return order;
}

Tensor time_shuffle(const Tensor& z, std::size_t chunk, std::uint64_t seed) {
  if (z.rank() != 2) throw ShapeError("time_shuffle expects [C x T]");
  return gather_cols(z, time_shuffle_order(z.dim(1), chunk, seed));
}

Tensor siamese_loss(const Tensor& e1, const Tensor& e2) {
  if (e1.shape() != e2.shape()) throw ShapeError("siamese_loss: embedding shapes differ");
  const Scalar tiny = Scalar(1e-12);
  const Tensor dot = sum(mul(e1, e2));
  const Tensor n1 = sqrt(add_scalar(sum(square(e1)), tiny));
  const Tensor n2 = sqrt(add_scalar(sum(square(e2)), tiny));
  return add_scalar(scale(div(dot, mul(n1, n2)), Scalar(-1)), Scalar(1));
}

Tensor flatten_speaker_code(const SpeakerCode& code) {
  return concat({reshape(code.alpha, {code.alpha.numel()}), reshape(code.beta, {code.beta.numel()})},
                0);
}

SrdNetwork::SrdNetwork(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const auto& c = config_;
  const std::size_t k = c.apc_kernel;
  Rng rng(derive_seed(seed, kInitStream, 0));

  content_in_ = Conv1dLayer(c.n_mels, c.encoder_width, 1, 1, rng);
  for (std::size_t i = 0; i < c.encoder_depth; ++i) {
    content_blocks_.emplace_back(c.encoder_width, c.apc_dilations, k, rng);
  }
  content_out_ = Conv1dLayer(c.encoder_width, c.content_channels, 1, 1, rng);

  speaker_in_ = Conv1dLayer(c.n_mels, c.speaker_hidden, 1, 1, rng);
  for (std::size_t i = 0; i < c.speaker_depth; ++i) {
    speaker_blocks_.emplace_back(c.speaker_hidden, c.apc_dilations, k, rng);
  }
  speaker_out_ = Conv1dLayer(c.speaker_hidden, c.speaker_width, 1, 1, rng);
  const std::size_t code = c.decoder_depth * c.decoder_width;
  alpha_head_ = LinearLayer(c.speaker_width, code, rng);
  beta_head_ = LinearLayer(c.speaker_width, code, rng);
  // Start near the identity affine: alpha ~ 0, beta ~ 1.
  for (auto* head : {&alpha_head_, &beta_head_}) {
    for (auto& w : head->weight.mutable_data()) w *= Scalar(0.1);
    for (auto& b : head->bias.mutable_data()) b = Scalar(0);
  }
  for (auto& b : beta_head_.bias.mutable_data()) b = Scalar(1);

  decoder_in_ = Conv1dLayer(c.content_channels, c.decoder_width, 1, 1, rng);
  for (std::size_t i = 0; i < c.decoder_depth; ++i) {
    decoder_blocks_.emplace_back(c.decoder_width, c.apc_dilations, k, rng);
  }
  decoder_out_ = Conv1dLayer(c.decoder_width, c.n_mels, 1, 1, rng);
}

Tensor SrdNetwork::content_encode(const Tensor& z, FeatureTrace* trace) const {
  if (z.rank() != 2 || z.dim(0) != config_.n_mels) {
    throw ShapeError("content_encode expects [" + std::to_string(config_.n_mels) +
                     " x T], got " + shape_to_string(z.shape()));
  }
  const auto slope = static_cast<Scalar>(config_.leaky_slope);
  const auto eps = static_cast<Scalar>(config_.eps);
  Tensor h = content_in_.forward(z);
  for (const auto& block : content_blocks_) {
    const Tensor pre = block.forward(h);
    h = instance_norm(pre, eps).first;
    if (trace) {
      trace->inputs.push_back(pre);
      trace->maps.push_back(h);
    }
    h = leaky_relu(h, slope);
  }
  return content_out_.forward(h);
}

SpeakerCode SrdNetwork::speaker_encode(const Tensor& z, SpeakerBranch /*which*/) const {
  if (z.rank() != 2 || z.dim(0) != config_.n_mels) {
    throw ShapeError("speaker_encode expects [" + std::to_string(config_.n_mels) +
                     " x T], got " + shape_to_string(z.shape()));
  }
  const auto slope = static_cast<Scalar>(config_.leaky_slope);
  Tensor h = leaky_relu(speaker_in_.forward(z), slope);
  for (const auto& block : speaker_blocks_) h = leaky_relu(block.forward(h), slope);
  SpeakerCode out;
  out.embedding = mean_time(speaker_out_.forward(h));
  const Shape code_shape{config_.decoder_depth, config_.decoder_width};
  out.alpha = reshape(alpha_head_.forward(out.embedding), code_shape);
  out.beta = reshape(beta_head_.forward(out.embedding), code_shape);
  return out;
}

Tensor SrdNetwork::decode(const Tensor& content, const Tensor& alpha, const Tensor& beta,
                          FeatureTrace* trace) const {
  const Shape code_shape{config_.decoder_depth, config_.decoder_width};
  if (alpha.shape() != code_shape || beta.shape() != code_shape) {
    throw ShapeError("decode: speaker code must be " + shape_to_string(code_shape) + ", got " +
                     shape_to_string(alpha.shape()) + " / " + shape_to_string(beta.shape()));
  }
  if (content.rank() != 2 || content.dim(0) != config_.content_channels) {
    throw ShapeError("decode: content code must have " + std::to_string(config_.content_channels) +
                     " channels, got " + shape_to_string(content.shape()));
  }
  const auto slope = static_cast<Scalar>(config_.leaky_slope);
  const auto eps = static_cast<Scalar>(config_.eps);
  Tensor h = decoder_in_.forward(content);
  for (std::size_t l = 0; l < decoder_blocks_.size(); ++l) {
    const Tensor pre = decoder_blocks_[l].forward(h);
    h = adain(pre, row(alpha, l), row(beta, l), eps);
    if (trace) {
      trace->inputs.push_back(pre);
      trace->maps.push_back(h);
    }
    h = leaky_relu(h, slope);
  }
  return decoder_out_.forward(h);
}

Tensor SrdNetwork::reconstruct(const Tensor& z, const Tensor& z_for_speaker,
                               std::optional<std::uint64_t> shuffle_seed) const {
  const Tensor spk_in =
      shuffle_seed ? time_shuffle(z_for_speaker, config_.ts_chunk, *shuffle_seed) : z_for_speaker;
  return decode(content_encode(z), speaker_encode(spk_in, SpeakerBranch::main));
}

ParamBreakdown SrdNetwork::param_count() const {
  ParamBreakdown p;
  p.content_encoder = content_in_.param_count() + content_out_.param_count();
  for (const auto& b : content_blocks_) p.content_encoder += b.param_count();
  p.speaker_encoder = speaker_in_.param_count() + speaker_out_.param_count() +
                      alpha_head_.param_count() + beta_head_.param_count();
  for (const auto& b : speaker_blocks_) p.speaker_encoder += b.param_count();
  p.decoder = decoder_in_.param_count() + decoder_out_.param_count();
  for (const auto& b : decoder_blocks_) p.decoder += b.param_count();
  return p;
}

NamedParameters SrdNetwork::named_parameters() const {
  NamedParameters out;
  content_in_.collect("content.in", out);
  for (std::size_t i = 0; i < content_blocks_.size(); ++i) {
    content_blocks_[i].collect("content.block" + std::to_string(i), out);
  }
  content_out_.collect("content.out", out);
  speaker_in_.collect("speaker.in", out);
  for (std::size_t i = 0; i < speaker_blocks_.size(); ++i) {
    speaker_blocks_[i].collect("speaker.block" + std::to_string(i), out);
  }
  speaker_out_.collect("speaker.out", out);
  alpha_head_.collect("speaker.alpha_head", out);
  beta_head_.collect("speaker.beta_head", out);
  decoder_in_.collect("decoder.in", out);
  for (std::size_t i = 0; i < decoder_blocks_.size(); ++i) {
    decoder_blocks_[i].collect("decoder.block" + std::to_string(i), out);
  }
  decoder_out_.collect("decoder.out", out);
  return out;
}

ParamBreakdown analytic_param_count(const ModelConfig& c) {
  auto pointwise = [](std::size_t in, std::size_t out) { return in * out + out; };
  const std::size_t nd = c.apc_dilations.size();
  ParamBreakdown p;
  p.content_encoder = pointwise(c.n_mels, c.encoder_width) +
                      c.encoder_depth * apc_param_count(c.encoder_width, nd, c.apc_kernel) +
                      pointwise(c.encoder_width, c.content_channels);
  const std::size_t code = c.decoder_depth * c.decoder_width;
  p.speaker_encoder = pointwise(c.n_mels, c.speaker_hidden) +
                      c.speaker_depth * apc_param_count(c.speaker_hidden, nd, c.apc_kernel) +
                      pointwise(c.speaker_hidden, c.speaker_width) +
                      2 * pointwise(c.speaker_width, code);
  p.decoder = pointwise(c.content_channels, c.decoder_width) +
              c.decoder_depth * apc_param_count(c.decoder_width, nd, c.apc_kernel) +
              pointwise(c.decoder_width, c.n_mels);
  return p;
}

MAINVC_NAMESPACE_END
