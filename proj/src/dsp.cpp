#include "azarnet/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace azarnet {

using cd = std::complex<double>;

Fft::Fft(std::size_t n) : n_(n) {
  if (n == 0) throw DimensionError("FFT size must be positive");
  std::size_t rest = n;
  for (std::size_t p = 2; p * p <= rest; ++p) {
    while (rest % p == 0) {
      factors_.push_back(p);
      rest /= p;
    }
  }
  if (rest > 1) factors_.push_back(rest);

  twiddles_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    twiddles_[j] = cd(std::cos(angle), std::sin(angle));
  }
}

void Fft::recurse(const cd* in, std::size_t stride, cd* out, std::size_t n, std::size_t factor_idx,
                  std::size_t tw_stride) const {
  if (n == 1) {
    out[0] = in[0];
    return;
  }
  const std::size_t p = factors_[factor_idx];
  const std::size_t m = n / p;
  for (std::size_t q = 0; q < p; ++q) {
    recurse(in + q * stride, stride * p, out + q * m, m, factor_idx + 1, tw_stride * p);
  }

  const std::size_t root_p = n_ / p;  // W_p = W_N^(N/p)
  std::vector<cd> scratch(p);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t q = 0; q < p; ++q) {
      scratch[q] = out[q * m + k] * twiddles_[q * k * tw_stride];
    }
    for (std::size_t s = 0; s < p; ++s) {
      cd acc = scratch[0];
      for (std::size_t q = 1; q < p; ++q) acc += scratch[q] * twiddles_[((q * s) % p) * root_p];
      out[k + s * m] = acc;
    }
  }
}

std::vector<cd> Fft::forward(std::span<const cd> x) const {
  if (x.size() != n_) {
    throw DimensionError("FFT of size " + std::to_string(n_) + " given " + std::to_string(x.size()) +
                         " samples");
  }
  std::vector<cd> out(n_);
  recurse(x.data(), 1, out.data(), n_, 0, 1);
  return out;
}

std::vector<double> Fft::real_magnitude(std::span<const double> x) const {
  std::vector<cd> cx(x.begin(), x.end());
  const auto spectrum = forward(cx);
  std::vector<double> mag(n_ / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(spectrum[k]);
  return mag;
}

std::size_t StftConfig::frames(std::size_t len) const noexcept {
  const std::size_t padded = center ? len + 2 * (n_fft / 2) : len;
  if (padded < n_fft) return 0;
  return 1 + (padded - n_fft) / hop;
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

Tensor stft_frames(std::span<const float> samples, const StftConfig& cfg) {
  if (cfg.n_fft == 0 || cfg.hop == 0) throw DimensionError("STFT n_fft and hop must be >= 1");
  const std::size_t pad = cfg.center ? cfg.n_fft / 2 : 0;
  const std::size_t len = samples.size();
  if (cfg.center && len <= pad) {
    throw DimensionError("signal of " + std::to_string(len) + " samples too short to reflect-pad by " +
                         std::to_string(pad));
  }
  const std::size_t frames = cfg.frames(len);
  if (frames == 0) throw DimensionError("signal shorter than one STFT window");

  // Reflect padding without repeating the edge sample.
  std::vector<double> padded(len + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) padded[i] = samples[pad - i];
  for (std::size_t i = 0; i < len; ++i) padded[pad + i] = samples[i];
  for (std::size_t i = 0; i < pad; ++i) padded[pad + len + i] = samples[len - 2 - i];

  const Fft fft(cfg.n_fft);
  const auto window = hann_window(cfg.n_fft);
  const std::size_t bins = cfg.bins();
  Tensor out({frames, bins});
  std::vector<double> frame(cfg.n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = padded.data() + t * cfg.hop;
    for (std::size_t i = 0; i < cfg.n_fft; ++i) frame[i] = src[i] * window[i];
    const auto mag = fft.real_magnitude(frame);
    for (std::size_t k = 0; k < bins; ++k) out(t, k) = static_cast<float>(mag[k]);
  }
  return out;
}

Tensor stft_magnitude(const AudioClip& clip, const StftConfig& cfg) {
  if (clip.samples.size() != kClipSamples) {
    throw DimensionError("STFT front end expects " + std::to_string(kClipSamples) + " samples, got " +
                         std::to_string(clip.samples.size()));
  }
  return stft_frames(clip.samples, cfg);
}

Spectrogram to_db_shifted(const Tensor& magnitude) {
  double peak = 0.0;
  for (float v : magnitude.values()) {
    if (v < 0.0f) throw DimensionError("to_db_shifted: negative magnitude");
    peak = std::max(peak, static_cast<double>(v));
  }
  Spectrogram spec{magnitude};
  // Silence has no reference level; it maps to the floor.
  if (peak <= kAmin) {
    spec.values.fill(0.0f);
    return spec;
  }
  const double ref = peak;
  for (float& v : spec.values.values()) {
    double db = 20.0 * std::log10(std::max(static_cast<double>(v), kAmin) / ref);
    db = std::clamp(db, kDbFloor, 0.0);
    v = static_cast<float>(db - kDbFloor);
  }
  return spec;
}

Spectrogram preprocess_clip(const AudioClip& clip, const StftConfig& cfg) {
  const AudioClip fixed = fix_length(resample(clip, kSampleRate), kClipSamples);
  return to_db_shifted(stft_magnitude(fixed, cfg));
}

Spectrogram preprocess(const std::string& path, const StftConfig& cfg) {
  return preprocess_clip(load_wav(path), cfg);
}

void save_spectrogram(const std::string& path, const Spectrogram& spec) {
  save_tensor(path, spec.values);
}

Spectrogram load_spectrogram(const std::string& path) {
  Spectrogram spec{load_tensor(path)};
  if (spec.values.rank() != 2) {
    throw CorruptFileError(path + ": spectrogram cache must be rank 2, got " +
                           shape_to_string(spec.values.shape()));
  }
  return spec;
}

}  // namespace azarnet
