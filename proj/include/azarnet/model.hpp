#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "azarnet/layers.hpp"

namespace azarnet {

// Label order is fixed repository-wide; index i is class i everywhere.
inline constexpr std::array<std::string_view, 7> kClassNames = {
    "Shour", "Homayoun", "Mahour", "Segah", "Chahargah", "Rastpanjgah", "Nava"};
inline constexpr std::size_t kNumClasses = kClassNames.size();

struct ModelConfig {
  Shape input_shape{256, 256, 1};
  std::vector<std::size_t> conv_filters{16, 32, 32, 32, 64};
  std::vector<double> dropout_rates{0.1, 0.2, 0.3, 0.3, 0.4};
  std::vector<std::size_t> gru_units{50, 100};
  std::size_t bottleneck = 5;
  std::size_t classes = kNumClasses;
  double leaky_alpha = 0.1;
  double bn_momentum = 0.8;
  double bn_epsilon = 1e-3;
  // Regularizer strengths on conv and GRU layers: kernel weights, then outputs.
  double l1 = 0.01;
  double l2 = 0.01;
  double activity_l1 = 0.01;
  double activity_l2 = 0.01;
  std::uint64_t seed = 0;

  // Throws ConfigError when the stack cannot be assembled.
  void validate() const;
  std::vector<std::string> class_names() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct SummaryRow {
  std::string name;
  std::string label;
  Shape output_shape;
  std::size_t params = 0;
};

template <typename T>
struct NamedParam {
  std::string name;  // "<layer>/<param>"
  ParamRef<T> ref;
};

// The conv-recurrent classifier: repeated [conv3x3 -> LeakyReLU -> dropout ->
// batchnorm -> maxpool2x2] blocks, a reshape to a (time, feature) sequence,
// stacked GRUs, a LeakyReLU bottleneck and a softmax classifier.
template <typename T>
class BasicModel {
 public:
  // Builds the stack and draws initial weights from Rng(cfg.seed).
  explicit BasicModel(ModelConfig cfg);
  BasicModel(ModelConfig cfg, Rng& init_rng);

  BasicModel(BasicModel&&) noexcept = default;
  BasicModel& operator=(BasicModel&&) noexcept = default;

  const ModelConfig& config() const noexcept { return cfg_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  std::size_t num_layers() const noexcept { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
  Layer<T>* find_layer(std::string_view name);

  // batch: [B, H, W, C] (or [B, H, W] when C == 1). Returns [B, classes]
  // class probabilities. Train mode caches state for backward().
  BasicTensor<T> forward(const BasicTensor<T>& batch, Mode mode, Rng& rng);
  BasicTensor<T> predict(const BasicTensor<T>& batch);

  // Backpropagates softmax + cross-entropy (and the regularizers) from the
  // last train-mode forward, filling every layer's parameter gradients.
  void backward(const BasicTensor<T>& targets);

  // Kernel + activity penalty of the last train-mode forward.
  double penalty() const;

  std::vector<SummaryRow> summary() const;
  std::size_t total_params() const;

  std::vector<NamedParam<T>> parameters();
  std::vector<NamedParam<T>> trainable_parameters();

  // Copies of every parameter and running statistic, in parameters() order.
  std::vector<BasicTensor<T>> snapshot();
  void restore(const std::vector<BasicTensor<T>>& state);

  void clear_cache();

 private:
  void build(Rng& init_rng);

  ModelConfig cfg_;
  std::vector<std::string> class_names_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  BasicTensor<T> probs_;
  bool cached_ = false;
};

using Model = BasicModel<float>;
using ModelD = BasicModel<double>;

extern template class BasicModel<float>;
extern template class BasicModel<double>;

// Text table in the layout of the architecture diagram plus a total line.
std::string format_summary(const std::vector<SummaryRow>& rows);

// Sum of the kernel and activity penalties; throws StateError when the
// model has no train-mode forward cached.
template <typename T>
double regularization_penalty(const BasicModel<T>& model) {
  return model.penalty();
}

// ---- checkpoints ----
//
// "AZNETCK1" | u64 LE header length | JSON header | tensor blocks.
// The header holds the format version, model config, class names and a
// directory of {name, offset, size} into the concatenated tensor blocks.
inline constexpr char kCheckpointMagic[9] = "AZNETCK1";
inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace azarnet
