#include "azarnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace azarnet {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split_fraction must be in (0, 1)");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
  if (early_stop_patience < 1) throw ConfigError("early_stop_patience must be >= 1");
}

template <typename T>
void adam_step(std::span<NamedParam<T>> params, AdamState<T>& state, const TrainConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.ref.value->shape());
      state.v.emplace_back(p.ref.value->shape());
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("Adam state does not match the parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(cfg.adam_beta1);
  const T b2 = static_cast<T>(cfg.adam_beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.adam_beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(cfg.adam_beta2, t)));
  const T lr = static_cast<T>(cfg.learning_rate);
  const T eps = static_cast<T>(cfg.adam_eps);

  for (std::size_t i = 0; i < params.size(); ++i) {
    BasicTensor<T>& w = *params[i].ref.value;
    const BasicTensor<T>& g = *params[i].ref.grad;
    BasicTensor<T>& m = state.m[i];
    BasicTensor<T>& v = state.v[i];
    if (g.shape() != w.shape() || m.shape() != w.shape()) {
      throw DimensionError("Adam shape mismatch for " + params[i].name);
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      const T mhat = m[k] * c1;
      const T vhat = v[k] * c2;
      w[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

template void adam_step(std::span<NamedParam<float>>, AdamState<float>&, const TrainConfig&);
template void adam_step(std::span<NamedParam<double>>, AdamState<double>&, const TrainConfig&);

void LabeledSet::add(Tensor input, int label) {
  inputs.push_back(std::move(input));
  labels.push_back(label);
}

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ValidationError("label " + std::to_string(labels[i]) + " out of range");
    }
    t(i, static_cast<std::size_t>(labels[i])) = 1.0f;
  }
  return t;
}

std::pair<Tensor, Tensor> make_batch(const LabeledSet& set, std::span<const std::size_t> items,
                                     std::size_t classes) {
  if (items.empty()) throw DataError("empty batch");
  const Tensor& first = set.inputs.at(items[0]);
  if (first.rank() != 2) throw DimensionError("samples must be [H, W], got " + shape_to_string(first.shape()));
  const std::size_t h = first.dim(0), w = first.dim(1);
  Tensor x({items.size(), h, w, 1});
  std::vector<int> labels;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const Tensor& s = set.inputs.at(items[i]);
    if (s.shape() != first.shape()) {
      throw DimensionError("sample shape " + shape_to_string(s.shape()) + " differs from " +
                           shape_to_string(first.shape()));
    }
    std::copy(s.values().begin(), s.values().end(), x.data() + i * h * w);
    labels.push_back(set.labels.at(items[i]));
  }
  return {std::move(x), one_hot(labels, classes)};
}

std::pair<std::vector<ManifestRecord>, std::vector<ManifestRecord>> stratified_split(
    const std::vector<ManifestRecord>& records, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(kNumClasses);
  for (std::size_t i = 0; i < records.size(); ++i) {
    by_class[static_cast<std::size_t>(class_index(records[i].label))].push_back(i);
  }
  std::vector<ManifestRecord> train_part, test_part;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) throw DataError("class '" + std::string(kClassNames[c]) + "' has no records");
    rng.shuffle(std::span(idx));
    const auto n_test =
        static_cast<std::size_t>(std::llround((1.0 - fraction) * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      (k < n_test ? test_part : train_part).push_back(records[idx[k]]);
    }
  }
  return {std::move(train_part), std::move(test_part)};
}

std::string TrainingHistory::to_csv() const {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char line[256];
  for (const auto& e : epochs) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.train_loss, e.train_acc, e.val_loss,
                  e.val_acc);
    out += line;
  }
  return out;
}

void TrainingHistory::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << to_csv();
  if (!out) throw IoError("write failed for '" + path + "'");
}

namespace {

int argmax_row(const Tensor& probs, std::size_t row) {
  const std::size_t k = probs.dim(1);
  const float* p = probs.data() + row * k;
  return static_cast<int>(std::max_element(p, p + k) - p);
}

}  // namespace

Evaluation evaluate(Model& model, const LabeledSet& set, std::size_t batch_size) {
  Evaluation ev;
  if (set.empty()) return ev;
  const std::size_t classes = model.config().classes;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> items;
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    items.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + batch_size); ++i) items.push_back(i);
    auto [x, y] = make_batch(set, items, classes);
    const Tensor probs = model.predict(x);
    loss_sum += cross_entropy_loss(probs, y) * static_cast<double>(items.size());
    for (std::size_t b = 0; b < items.size(); ++b) {
      const int pred = argmax_row(probs, b);
      ev.predictions.push_back(pred);
      if (pred == set.labels[items[b]]) ++correct;
      Tensor row({classes});
      std::copy(probs.data() + b * classes, probs.data() + (b + 1) * classes, row.data());
      ev.probabilities.push_back(std::move(row));
    }
  }
  ev.loss = loss_sum / static_cast<double>(set.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return ev;
}

TrainingHistory train(Model& model, const LabeledSet& train_set, const LabeledSet& val_set,
                      const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  const std::size_t classes = model.config().classes;

  Rng rng(cfg.seed);
  AdamState<float> adam;
  auto params = model.trainable_parameters();
  TrainingHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<Tensor> best_state;
  int since_best = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t(0));

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> items(order.data() + start, end - start);
      auto [x, y] = make_batch(train_set, items, classes);

      const Tensor probs = model.forward(x, Mode::Train, rng);
      const double loss = cross_entropy_loss(probs, y) + model.penalty();
      if (!std::isfinite(loss)) throw NonFiniteLossError(epoch, batch_no, loss);
      model.backward(y);
      adam_step(std::span(params), adam, cfg);

      loss_sum += loss;
      for (std::size_t b = 0; b < items.size(); ++b) {
        if (argmax_row(probs, b) == train_set.labels[items[b]]) ++correct;
      }
    }
    model.clear_cache();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / batch_no;
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    if (!val_set.empty()) {
      const Evaluation ev = evaluate(model, val_set, cfg.batch_size);
      rec.val_loss = ev.loss;
      rec.val_acc = ev.accuracy;
    }
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (cfg.target_train_accuracy > 0.0 &&
        evaluate(model, train_set, cfg.batch_size).accuracy >= cfg.target_train_accuracy) {
      history.reached_target = true;
      history.best_epoch = epoch;
      return history;
    }

    if (val_set.empty()) {
      history.best_epoch = epoch;
      continue;
    }
    if (rec.val_loss < best_val) {
      best_val = rec.val_loss;
      best_state = model.snapshot();
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.early_stop_patience) {
      history.early_stopped = true;
      break;
    }
  }
  if (!best_state.empty()) model.restore(best_state);
  return history;
}

}  // namespace azarnet
