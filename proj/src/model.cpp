#include "azarnet/model.hpp"

#include <iomanip>
#include <map>
#include <sstream>

namespace azarnet {

void ModelConfig::validate() const {
  if (input_shape.size() != 3) {
    throw ConfigError("input_shape must be (H, W, C), got " + shape_to_string(input_shape));
  }
  for (std::size_t d : input_shape) {
    if (d == 0) throw ConfigError("input_shape has a zero extent");
  }
  if (conv_filters.empty()) throw ConfigError("at least one conv block is required");
  if (conv_filters.size() != dropout_rates.size()) {
    throw ConfigError("conv_filters and dropout_rates differ in length (" + std::to_string(conv_filters.size()) +
                      " vs " + std::to_string(dropout_rates.size()) + ")");
  }
  for (std::size_t f : conv_filters) {
    if (f == 0) throw ConfigError("conv filter count must be positive");
  }
  for (double r : dropout_rates) {
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
  }
  const std::size_t shrink = std::size_t(1) << conv_filters.size();
  if (input_shape[0] % shrink != 0 || input_shape[1] % shrink != 0) {
    throw ConfigError("input " + shape_to_string(input_shape) + " cannot be halved " +
                      std::to_string(conv_filters.size()) + " times before the reshape");
  }
  if (gru_units.empty()) throw ConfigError("at least one GRU layer is required");
  for (std::size_t u : gru_units) {
    if (u == 0) throw ConfigError("GRU units must be positive");
  }
  if (bottleneck == 0) throw ConfigError("bottleneck width must be positive");
  if (classes < 2) throw ConfigError("need at least two classes");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) throw ConfigError("bn_momentum must be in [0, 1]");
  if (!(bn_epsilon > 0.0)) throw ConfigError("bn_epsilon must be positive");
  if (l1 < 0.0 || l2 < 0.0 || activity_l1 < 0.0 || activity_l2 < 0.0) throw ConfigError("regularizer strengths must be non-negative");
}

std::vector<std::string> ModelConfig::class_names() const {
  std::vector<std::string> names;
  if (classes == kNumClasses) {
    for (auto n : kClassNames) names.emplace_back(n);
  } else {
    for (std::size_t i = 0; i < classes; ++i) names.push_back("class_" + std::to_string(i));
  }
  return names;
}

template <typename T>
BasicModel<T>::BasicModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
  Rng rng(cfg_.seed);
  build(rng);
}

template <typename T>
BasicModel<T>::BasicModel(ModelConfig cfg, Rng& init_rng) : cfg_(std::move(cfg)) {
  build(init_rng);
}

template <typename T>
void BasicModel<T>::build(Rng& rng) {
  cfg_.validate();
  class_names_ = cfg_.class_names();

  std::map<std::string, int> counters;
  auto next_name = [&](const std::string& base) { return base + "_" + std::to_string(++counters[base]); };
  const Regularizer reg{cfg_.l1, cfg_.l2};
  const Regularizer act{cfg_.activity_l1, cfg_.activity_l2};

  std::size_t channels = cfg_.input_shape[2];
  std::size_t h = cfg_.input_shape[0];
  std::size_t w = cfg_.input_shape[1];
  for (std::size_t i = 0; i < cfg_.conv_filters.size(); ++i) {
    const std::size_t out = cfg_.conv_filters[i];
    auto conv = std::make_unique<Conv2d<T>>(next_name("conv2d"), channels, out, reg, act);
    glorot_uniform(conv->kernel, 9 * channels, 9 * out, rng);
    conv->propagate_input_grad = i != 0;
    layers_.push_back(std::move(conv));
    layers_.push_back(std::make_unique<LeakyRelu<T>>(next_name("leaky_re_lu"), cfg_.leaky_alpha));
    layers_.push_back(std::make_unique<Dropout<T>>(next_name("dropout"), cfg_.dropout_rates[i]));
    layers_.push_back(
        std::make_unique<BatchNorm<T>>(next_name("batch_normalization"), out, cfg_.bn_momentum, cfg_.bn_epsilon));
    layers_.push_back(std::make_unique<MaxPool2x2<T>>(next_name("max_pooling2d")));
    channels = out;
    h /= 2;
    w /= 2;
  }

  // (h, w, c) -> (h * w, c): the leading (time) axis stays outermost.
  layers_.push_back(std::make_unique<Reshape<T>>(next_name("reshape"), Shape{h * w, channels}));

  std::size_t features = channels;
  for (std::size_t i = 0; i < cfg_.gru_units.size(); ++i) {
    const std::size_t units = cfg_.gru_units[i];
    const bool sequences = i + 1 < cfg_.gru_units.size();
    auto gru = std::make_unique<Gru<T>>(next_name("gru"), features, units, sequences, reg, act);
    glorot_uniform(gru->kernel, features, 3 * units, rng);
    glorot_uniform(gru->recurrent_kernel, units, 3 * units, rng);
    layers_.push_back(std::move(gru));
    features = units;
  }

  auto bottleneck = std::make_unique<Dense<T>>(next_name("dense"), features, cfg_.bottleneck);
  glorot_uniform(bottleneck->weights, features, cfg_.bottleneck, rng);
  layers_.push_back(std::move(bottleneck));
  layers_.push_back(std::make_unique<LeakyRelu<T>>(next_name("leaky_re_lu"), cfg_.leaky_alpha));

  auto classifier = std::make_unique<Dense<T>>(next_name("dense"), cfg_.bottleneck, cfg_.classes,
                                               "FC (" + std::to_string(cfg_.classes) + ") (classifier)");
  glorot_uniform(classifier->weights, cfg_.bottleneck, cfg_.classes, rng);
  layers_.push_back(std::move(classifier));
}

template <typename T>
Layer<T>* BasicModel<T>::find_layer(std::string_view name) {
  for (auto& l : layers_) {
    if (l->name() == name) return l.get();
  }
  return nullptr;
}

template <typename T>
BasicTensor<T> BasicModel<T>::forward(const BasicTensor<T>& batch, Mode mode, Rng& rng) {
  BasicTensor<T> x = batch;
  if (x.rank() == 3 && cfg_.input_shape[2] == 1) {
    x = std::move(x).reshaped({batch.dim(0), batch.dim(1), batch.dim(2), 1});
  }
  if (x.rank() != 4 || Shape(x.shape().begin() + 1, x.shape().end()) != cfg_.input_shape) {
    throw DimensionError("model expects [B, " + shape_to_string(cfg_.input_shape).substr(1) + " input, got " +
                         shape_to_string(batch.shape()));
  }
  for (auto& layer : layers_) x = layer->forward(x, mode, rng);
  BasicTensor<T> probs = softmax(x);
  if (mode == Mode::Train) {
    probs_ = probs;
    cached_ = true;
  } else {
    probs_ = {};
    cached_ = false;
  }
  return probs;
}

template <typename T>
BasicTensor<T> BasicModel<T>::predict(const BasicTensor<T>& batch) {
  Rng unused(0);
  return forward(batch, Mode::Infer, unused);
}

template <typename T>
void BasicModel<T>::backward(const BasicTensor<T>& targets) {
  if (!cached_) throw StateError("model backward without a cached train-mode forward");
  BasicTensor<T> g = softmax_cross_entropy_grad(probs_, targets);
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
}

template <typename T>
double BasicModel<T>::penalty() const {
  double total = 0.0;
  for (const auto& l : layers_) total += l->penalty();
  return total;
}

template <typename T>
std::vector<SummaryRow> BasicModel<T>::summary() const {
  std::vector<SummaryRow> rows;
  Shape shape = cfg_.input_shape;
  for (const auto& l : layers_) {
    shape = l->output_shape(shape);
    if (!l->listed()) continue;
    rows.push_back({l->name(), l->label(), shape, l->param_count()});
  }
  return rows;
}

template <typename T>
std::size_t BasicModel<T>::total_params() const {
  std::size_t total = 0;
  for (const auto& l : layers_) total += l->param_count();
  return total;
}

template <typename T>
std::vector<NamedParam<T>> BasicModel<T>::parameters() {
  std::vector<NamedParam<T>> out;
  for (auto& l : layers_) {
    for (auto& p : l->params()) out.push_back({l->name() + "/" + p.name, p});
  }
  return out;
}

template <typename T>
std::vector<NamedParam<T>> BasicModel<T>::trainable_parameters() {
  std::vector<NamedParam<T>> out;
  for (auto& p : parameters()) {
    if (p.ref.trainable()) out.push_back(p);
  }
  return out;
}

template <typename T>
std::vector<BasicTensor<T>> BasicModel<T>::snapshot() {
  std::vector<BasicTensor<T>> state;
  for (auto& p : parameters()) state.push_back(*p.ref.value);
  return state;
}

template <typename T>
void BasicModel<T>::restore(const std::vector<BasicTensor<T>>& state) {
  auto params = parameters();
  if (params.size() != state.size()) throw StateError("snapshot does not match the model layout");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].ref.value->shape() != state[i].shape()) {
      throw StateError("snapshot shape mismatch for " + params[i].name);
    }
    *params[i].ref.value = state[i];
  }
}

template <typename T>
void BasicModel<T>::clear_cache() {
  for (auto& l : layers_) l->clear_cache();
  probs_ = {};
  cached_ = false;
}

template class BasicModel<float>;
template class BasicModel<double>;

std::string format_summary(const std::vector<SummaryRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(34) << "Layer type" << std::setw(20) << "Output shape" << std::right
     << std::setw(12) << "# Parameters" << '\n';
  os << std::string(66, '-') << '\n';
  std::size_t total = 0;
  for (const auto& r : rows) {
    os << std::left << std::setw(34) << r.label << std::setw(20) << shape_to_string(r.output_shape) << std::right
       << std::setw(12) << r.params << '\n';
    total += r.params;
  }
  os << std::string(66, '-') << '\n';
  os << std::left << std::setw(54) << "Total" << std::right << std::setw(12) << total << '\n';
  return os.str();
}

}  // namespace azarnet
