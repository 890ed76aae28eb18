#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace azarnet {

struct GradcheckResult {
  std::string check;         // layer type, or "model" for the end-to-end spot check
  double max_rel_error = 0;  // worst over the input and every parameter tensor
  double threshold = 0;
  std::size_t entries = 0;   // number of finite-difference evaluations

  bool passed() const noexcept { return max_rel_error < threshold; }
};

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kLayerGradTolerance = 1e-4;
inline constexpr double kModelGradTolerance = 1e-3;

// ||a - n||_2 / max(||a||_2, ||n||_2, 1e-12).
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

// Central differences in double precision against every layer type's
// analytic backward: conv2d, maxpool, batchnorm, dropout (fixed mask),
// leaky_relu, gru, dense, softmax+cross-entropy.
std::vector<GradcheckResult> run_layer_gradchecks(std::uint64_t seed);

// Loss (cross-entropy + regularization) gradient of a reduced network,
// spot-checked on `samples` randomly chosen parameters.
GradcheckResult run_model_gradcheck(std::uint64_t seed, std::size_t samples = 24);

}  // namespace azarnet
