#include "mainvc/audio/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace mainvc::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::size_t position() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(std::string("truncated WAV file while reading ") + what);
    }
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    const auto* p = bytes_.data() + pos_;
    pos_ += 4;
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
           std::uint32_t(p[3]) << 24;
  }

  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto* p = bytes_.data() + pos_;
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | p[1] << 8);
  }

  std::string tag(const char* what) {
    need(4, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), 4);
    pos_ += 4;
    return s;
  }

  void skip(std::size_t n, const char* what) {
    need(n, what);
    pos_ += n;
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct Format {
  std::uint16_t code = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
};

double decode_sample(const std::uint8_t* p, const Format& fmt) {
  if (fmt.code == kFormatFloat) {
    std::uint32_t raw = std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                        std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
    return static_cast<double>(std::bit_cast<float>(raw));
  }
  switch (fmt.bits) {
    case 16: {
      const auto v = static_cast<std::int16_t>(p[0] | p[1] << 8);
      return v / 32768.0;
    }
    case 24: {
      std::int32_t v = p[0] | p[1] << 8 | p[2] << 16;
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: {
      const auto v = static_cast<std::int32_t>(std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 |
                                               std::uint32_t(p[2]) << 16 |
                                               std::uint32_t(p[3]) << 24);
      return v / 2147483648.0;
    }
    default:
      throw FormatError("unsupported PCM bit depth " + std::to_string(fmt.bits));
  }
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  if (in.remaining() < 12) throw FormatError("truncated WAV header");
  if (in.tag("RIFF tag") != "RIFF") throw FormatError("not a RIFF file");
  in.u32("RIFF size");
  if (in.tag("WAVE tag") != "WAVE") throw FormatError("RIFF file is not WAVE");

  Format fmt;
  bool have_fmt = false;
  std::span<const std::uint8_t> data;
  bool have_data = false;
  while (in.remaining() >= 8 && !have_data) {
    const std::string id = in.tag("chunk id");
    const std::uint32_t size = in.u32("chunk size");
    if (id == "fmt ") {
      if (size < 16) throw FormatError("fmt chunk too small");
      auto body = in.take(size, "fmt chunk");
      Reader f(body);
      fmt.code = f.u16("format code");
      fmt.channels = f.u16("channel count");
      fmt.rate = f.u32("sample rate");
      f.u32("byte rate");
      f.u16("block align");
      fmt.bits = f.u16("bits per sample");
      if (fmt.code == kFormatExtensible) {
        if (size < 40) throw FormatError("extensible fmt chunk too small");
        f.skip(8, "extension header");
        fmt.code = f.u16("sub-format");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk");
      data = in.take(size, "data chunk");
      have_data = true;
    } else {
      in.skip(size + (size & 1u), "chunk body");
    }
    if (!have_data && (size & 1u) && id == "fmt ") in.skip(1, "padding");
  }
  if (!have_fmt) throw FormatError("missing fmt chunk");
  if (!have_data) throw FormatError("missing data chunk");

  if (fmt.code != kFormatPcm && fmt.code != kFormatFloat) {
    throw FormatError("unsupported WAV encoding (format code " + std::to_string(fmt.code) +
                      "); only PCM and IEEE float are readable");
  }
  if (fmt.code == kFormatFloat && fmt.bits != 32) {
    throw FormatError("unsupported float bit depth " + std::to_string(fmt.bits));
  }
  if (fmt.code == kFormatPcm && fmt.bits != 16 && fmt.bits != 24 && fmt.bits != 32) {
    throw FormatError("unsupported PCM bit depth " + std::to_string(fmt.bits));
  }
  if (fmt.channels == 0) throw FormatError("WAV declares zero channels");
  if (fmt.rate == 0) throw FormatError("WAV declares zero sample rate");

  const std::size_t width = fmt.bits / 8;
  const std::size_t frame_bytes = width * fmt.channels;
  const std::size_t frames = data.size() / frame_bytes;

  Waveform wave;
  wave.sample_rate = static_cast<int>(fmt.rate);
  wave.samples.resize(frames);
  for (std::size_t n = 0; n < frames; ++n) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt.channels; ++c) {
      acc += decode_sample(data.data() + n * frame_bytes + c * width, fmt);
    }
    wave.samples[n] = acc / fmt.channels;
  }
  for (double s : wave.samples) {
    if (!std::isfinite(s)) throw FormatError("WAV contains non-finite samples");
  }
  return wave;
}

Waveform load_waveform(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw FormatError("cannot open audio file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_wav(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_wav(const Waveform& wave, WavEncoding encoding) {
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t code = encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * bits / 8);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, code);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * bits / 8);
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : wave.samples) {
    if (encoding == WavEncoding::pcm16) {
      const double scaled = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
      const auto v = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  return out;
}

void save_waveform(const std::filesystem::path& path, const Waveform& wave,
                   WavEncoding encoding) {
  const auto bytes = encode_wav(wave, encoding);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw FormatError("cannot write audio file " + path.string());
  file.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!file) throw FormatError("short write to " + path.string());
}

}  // namespace mainvc::audio
