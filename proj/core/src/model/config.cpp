#include "mainvc/model/config.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <stdexcept>

MAINVC_NAMESPACE_BEGIN

std::size_t ModelConfig::max_dilation() const {
  if (apc_dilations.empty()) return 0;
  return *std::max_element(apc_dilations.begin(), apc_dilations.end());
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("ModelConfig: " + what); };
  if (apc_kernel != 3) fail("apc_kernel must be 3");
  if (apc_dilations.empty()) fail("apc_dilations must not be empty");
  std::set<std::size_t> seen;
  for (auto d : apc_dilations) {
    if (d < 1) fail("dilations must be >= 1");
    if (!seen.insert(d).second) fail("dilations must be distinct");
  }
  if (n_mels == 0 || content_channels == 0 || encoder_width == 0 || speaker_hidden == 0 ||
      speaker_width == 0 || decoder_width == 0) {
    fail("channel counts must be positive");
  }
  if (encoder_depth == 0 || decoder_depth == 0) fail("encoder and decoder depth must be >= 1");
  if (ts_chunk == 0) fail("ts_chunk must be >= 1");
  if (!(eps > 0.0)) fail("eps must be positive");
}

std::string ModelConfig::canonical() const {
  std::ostringstream out;
  out << "n_mels=" << n_mels << ";content_channels=" << content_channels
      << ";encoder_width=" << encoder_width << ";encoder_depth=" << encoder_depth
      << ";speaker_hidden=" << speaker_hidden << ";speaker_depth=" << speaker_depth
      << ";speaker_width=" << speaker_width << ";decoder_width=" << decoder_width
      << ";decoder_depth=" << decoder_depth << ";apc_dilations=";
  for (std::size_t i = 0; i < apc_dilations.size(); ++i) {
    out << (i ? "," : "") << apc_dilations[i];
  }
  out.precision(17);
  out << ";apc_kernel=" << apc_kernel << ";ts_chunk=" << ts_chunk << ";eps=" << eps
      << ";leaky_slope=" << leaky_slope;
  return out.str();
}

ModelConfig ModelConfig::reference() { return ModelConfig{}; }

ModelConfig ModelConfig::small() {
  ModelConfig c;
  c.content_channels = 16;
  c.encoder_width = 32;
  c.encoder_depth = 2;
  c.speaker_hidden = 32;
  c.speaker_depth = 2;
  c.speaker_width = 32;
  c.decoder_width = 32;
  c.decoder_depth = 2;
  return c;
}

MAINVC_NAMESPACE_END
