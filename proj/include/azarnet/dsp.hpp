#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "azarnet/audio.hpp"
#include "azarnet/tensor.hpp"

namespace azarnet {

// Mixed-radix Cooley-Tukey DFT for any length. Each prime factor p costs an
// O(p^2) butterfly, which is fine for smooth lengths such as 510 = 2*3*5*17.
class Fft {
 public:
  explicit Fft(std::size_t n);

  std::size_t size() const noexcept { return n_; }
  const std::vector<std::size_t>& factors() const noexcept { return factors_; }

  // Forward transform, X[k] = sum_t x[t] exp(-2 pi i k t / n).
  std::vector<std::complex<double>> forward(std::span<const std::complex<double>> x) const;

  // |X[k]| for k = 0 .. n/2 of a real input.
  std::vector<double> real_magnitude(std::span<const double> x) const;

 private:
  void recurse(const std::complex<double>* in, std::size_t stride, std::complex<double>* out,
               std::size_t n, std::size_t factor_idx, std::size_t tw_stride) const;

  std::size_t n_;
  std::vector<std::size_t> factors_;
  std::vector<std::complex<double>> twiddles_;  // exp(-2 pi i j / n), j < n
};

struct StftConfig {
  std::size_t n_fft = 510;
  std::size_t hop = 514;
  bool center = true;  // reflect-pad n_fft/2 on both ends

  std::size_t bins() const noexcept { return n_fft / 2 + 1; }
  // Frames produced for a signal of `len` samples.
  std::size_t frames(std::size_t len) const noexcept;
};

// Periodic Hann window: 0.5 - 0.5 cos(2 pi i / n).
std::vector<double> hann_window(std::size_t n);

// Magnitude STFT of an arbitrary-length signal, indexed [time, frequency].
Tensor stft_frames(std::span<const float> samples, const StftConfig& cfg = {});

// The network's front end: requires exactly 131072 samples and returns the
// (256, 256) magnitude matrix for the default configuration.
Tensor stft_magnitude(const AudioClip& clip, const StftConfig& cfg = {});

inline constexpr double kDbFloor = -80.0;
inline constexpr double kAmin = 1e-10;

// Shifted-decibel feature matrix fed to the network, values in [0, 80].
struct Spectrogram {
  Tensor values;
};

// 20 log10(max(m, amin) / global max), clamped to [-80, 0], +80. A matrix
// whose max is at most amin (silence) maps to all zeros.
Spectrogram to_db_shifted(const Tensor& magnitude);

// load_wav -> resample(8192) -> fix_length(131072) -> STFT -> dB shift.
Spectrogram preprocess_clip(const AudioClip& clip, const StftConfig& cfg = {});
Spectrogram preprocess(const std::string& path, const StftConfig& cfg = {});

// `.spec` cache files use the tensor binary encoding.
void save_spectrogram(const std::string& path, const Spectrogram& spec);
Spectrogram load_spectrogram(const std::string& path);

}  // namespace azarnet
