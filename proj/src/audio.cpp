#include "azarnet/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include "azarnet/errors.hpp"

namespace azarnet {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatFloat = 0x0003;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) { return std::uint16_t(p[0] | p[1] << 8); }
std::uint32_t le32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 |
         std::uint32_t(p[3]) << 24;
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v & 0xFF));
  out.push_back(std::uint8_t(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}
void put_id(std::vector<std::uint8_t>& out, const char* id) { out.insert(out.end(), id, id + 4); }

std::string codec_name(std::uint16_t tag) {
  switch (tag) {
    case 0x0001: return "PCM";
    case 0x0002: return "MS ADPCM";
    case 0x0003: return "IEEE float";
    case 0x0006: return "A-law";
    case 0x0007: return "mu-law";
    case 0x0011: return "IMA ADPCM";
    case 0x0055: return "MPEG Layer 3";
    default: {
      char buf[16];
      std::snprintf(buf, sizeof buf, "0x%04X", tag);
      return std::string("format tag ") + buf;
    }
  }
}

struct FmtChunk {
  std::uint16_t tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes, const std::string& name) {
  if (bytes.size() < 12) throw CorruptFileError(name + ": file too short for a RIFF header");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(name + ": not a RIFF/WAVE file");
  }

  std::optional<FmtChunk> fmt;
  std::span<const std::uint8_t> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* hdr = bytes.data() + pos;
    const std::uint32_t size = le32(hdr + 4);
    const std::size_t body = pos + 8;
    if (size > bytes.size() - body) {
      throw CorruptFileError(name + ": chunk '" + std::string(reinterpret_cast<const char*>(hdr), 4) +
                             "' truncated (declares " + std::to_string(size) + " bytes, " +
                             std::to_string(bytes.size() - body) + " available)");
    }
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw CorruptFileError(name + ": fmt chunk shorter than 16 bytes");
      const std::uint8_t* p = bytes.data() + body;
      FmtChunk f;
      f.tag = le16(p);
      f.channels = le16(p + 2);
      f.sample_rate = le32(p + 4);
      f.block_align = le16(p + 12);
      f.bits = le16(p + 14);
      if (f.tag == kFormatExtensible) {
        if (size < 40) throw CorruptFileError(name + ": extensible fmt chunk too short");
        f.tag = le16(p + 24);  // first two bytes of the subformat GUID
      }
      fmt = f;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data = bytes.subspan(body, size);
      have_data = true;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!fmt) throw CorruptFileError(name + ": missing fmt chunk");
  if (!have_data) throw CorruptFileError(name + ": missing data chunk");

  const bool pcm16 = fmt->tag == kFormatPcm && fmt->bits == 16;
  const bool f32 = fmt->tag == kFormatFloat && fmt->bits == 32;
  if (!pcm16 && !f32) {
    throw FormatError(name + ": unsupported codec " + codec_name(fmt->tag) + " " +
                      std::to_string(fmt->bits) + "-bit (need PCM 16-bit or IEEE float 32-bit)");
  }
  if (fmt->channels != 1 && fmt->channels != 2) {
    throw FormatError(name + ": unsupported channel count " + std::to_string(fmt->channels));
  }
  if (fmt->sample_rate == 0) throw CorruptFileError(name + ": zero sample rate");

  const std::size_t bytes_per_sample = pcm16 ? 2 : 4;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  if (data.size() % frame_bytes != 0) {
    throw CorruptFileError(name + ": data chunk ends mid-frame");
  }
  const std::size_t frames = data.size() / frame_bytes;

  auto sample_at = [&](std::size_t i) -> float {
    const std::uint8_t* p = data.data() + i * bytes_per_sample;
    if (pcm16) return static_cast<float>(static_cast<std::int16_t>(le16(p))) / 32768.0f;
    const float v = std::bit_cast<float>(le32(p));
    if (!std::isfinite(v)) throw CorruptFileError(name + ": non-finite float sample");
    return std::clamp(v, -1.0f, 1.0f);
  };

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.samples.resize(frames);
  if (fmt->channels == 1) {
    for (std::size_t i = 0; i < frames; ++i) clip.samples[i] = sample_at(i);
  } else {
    for (std::size_t i = 0; i < frames; ++i) {
      clip.samples[i] = (sample_at(2 * i) + sample_at(2 * i + 1)) * 0.5f;
    }
  }
  return clip;
}

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path);
}

std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate, WavEncoding encoding) {
  if (channels < 1 || sample_rate <= 0 || interleaved.size() % std::size_t(channels) != 0) {
    throw FormatError("encode_wav: bad channel count or sample rate");
  }
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
  const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_id(out, "RIFF");
  put32(out, 36 + data_bytes);
  put_id(out, "WAVE");
  put_id(out, "fmt ");
  put32(out, 16);
  put16(out, encoding == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat);
  put16(out, static_cast<std::uint16_t>(channels));
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * block_align);
  put16(out, block_align);
  put16(out, bits);
  put_id(out, "data");
  put32(out, data_bytes);
  for (float v : interleaved) {
    const float c = std::isfinite(v) ? std::clamp(v, -1.0f, 1.0f) : 0.0f;
    if (encoding == WavEncoding::Pcm16) {
      const long q = std::lround(static_cast<double>(c) * 32768.0);
      put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(q, -32768L, 32767L))));
    } else {
      put32(out, std::bit_cast<std::uint32_t>(c));
    }
  }
  if (data_bytes & 1u) out.push_back(0);
  return out;
}

void write_wav(const std::string& path, const AudioClip& clip) {
  const AudioClip mono = clip.sample_rate == kSampleRate ? clip : resample(clip, kSampleRate);
  const auto bytes = encode_wav(mono.samples, 1, kSampleRate, WavEncoding::Pcm16);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw FormatError("resample: target rate must be positive");
  if (clip.sample_rate == target_rate || clip.samples.empty()) {
    AudioClip out = clip;
    out.sample_rate = target_rate;
    return out;
  }
  const std::uint64_t len = clip.samples.size();
  const auto src = static_cast<std::uint64_t>(clip.sample_rate);
  const auto dst = static_cast<std::uint64_t>(target_rate);
  const std::uint64_t out_len = (2 * len * dst + src) / (2 * src);  // round half up

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  const double step = static_cast<double>(src) / static_cast<double>(dst);
  for (std::uint64_t i = 0; i < out_len; ++i) {
    const double pos = static_cast<double>(i) * step;
    auto i0 = static_cast<std::uint64_t>(pos);
    if (i0 >= len) i0 = len - 1;
    const std::uint64_t i1 = std::min(i0 + 1, len - 1);
    const double frac = pos - static_cast<double>(i0);
    const double v = clip.samples[i0] + (clip.samples[i1] - clip.samples[i0]) * frac;
    out.samples[i] = static_cast<float>(v);
  }
  return out;
}

AudioClip fix_length(const AudioClip& clip, std::size_t n) {
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.assign(n, 0.0f);
  std::copy_n(clip.samples.begin(), std::min(n, clip.samples.size()), out.samples.begin());
  return out;
}

}  // namespace azarnet
