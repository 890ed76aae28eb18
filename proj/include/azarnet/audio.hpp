#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace azarnet {

inline constexpr int kSampleRate = 8192;
inline constexpr std::size_t kClipSamples = 131072;  // 16 s at 8192 Hz

// Mono sample buffer, values in [-1, 1].
struct AudioClip {
  std::vector<float> samples;
  int sample_rate = kSampleRate;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

enum class WavEncoding { Pcm16, Float32 };

// Reads a RIFF/WAVE file holding PCM16 or IEEE float32 with one or two
// channels. Stereo is averaged to mono; PCM16 is scaled by 1/32768.
AudioClip load_wav(const std::string& path);
AudioClip decode_wav(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>");

// Low-level encoder over interleaved frames. Float values are clamped to
// [-1, 1]; PCM16 quantizes as round(v * 32768) saturated to int16.
std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, int channels,
                                     int sample_rate, WavEncoding encoding);

// The project's writer: always mono PCM16 at 8192 Hz (resampling first when
// the clip has another rate). load_wav(write_wav(c)) is exact for any clip
// that already went through one PCM16 round trip.
void write_wav(const std::string& path, const AudioClip& clip);

// Linear interpolation. Output length is round(len * target / source).
AudioClip resample(const AudioClip& clip, int target_rate);

// Keeps the first n samples, or zero-pads at the end.
AudioClip fix_length(const AudioClip& clip, std::size_t n = kClipSamples);

}  // namespace azarnet
