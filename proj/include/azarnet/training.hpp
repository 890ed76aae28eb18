#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "azarnet/dataset.hpp"
#include "azarnet/model.hpp"

namespace azarnet {

struct TrainConfig {
  std::size_t batch_size = 16;
  int max_epochs = 100;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int early_stop_patience = 10;  // epochs without validation-loss improvement
  double split_fraction = 0.8;   // share of each class used for training
  std::uint64_t seed = 0;
  // Stop as soon as infer-mode accuracy on the training set reaches this
  // value (checked after every epoch). 0 disables the check.
  double target_train_accuracy = 0.0;

  void validate() const;
};

template <typename T>
struct AdamState {
  std::vector<BasicTensor<T>> m;
  std::vector<BasicTensor<T>> v;
  std::uint64_t step = 0;
};

// Bias-corrected Adam over the given parameters, reading their gradients.
template <typename T>
void adam_step(std::span<NamedParam<T>> params, AdamState<T>& state, const TrainConfig& cfg);

// In-memory samples: inputs are [H, W] spectrograms, labels class indices.
struct LabeledSet {
  std::vector<Tensor> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  void add(Tensor input, int label);
};

// [B, H, W, 1] batch of the given items and their [B, classes] one-hot targets.
std::pair<Tensor, Tensor> make_batch(const LabeledSet& set, std::span<const std::size_t> items,
                                     std::size_t classes = kNumClasses);

Tensor one_hot(std::span<const int> labels, std::size_t classes = kNumClasses);

// Per class: shuffle with rng, hold out round((1 - fraction) * n) records as
// test. Every class of kClassNames must be present.
std::pair<std::vector<ManifestRecord>, std::vector<ManifestRecord>> stratified_split(
    const std::vector<ManifestRecord>& records, double fraction, Rng& rng);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // cross-entropy + penalty, mean over batches
  double train_acc = 0.0;   // train-mode predictions during the epoch
  double val_loss = 0.0;    // cross-entropy in infer mode
  double val_acc = 0.0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;          // epoch whose parameters were kept
  bool early_stopped = false;
  bool reached_target = false;

  std::string to_csv() const;
  void write_csv(const std::string& path) const;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<int> predictions;
  std::vector<Tensor> probabilities;
};

Evaluation evaluate(Model& model, const LabeledSet& set, std::size_t batch_size = 16);

using EpochCallback = std::function<void(const EpochRecord&)>;

// Shuffled mini-batch Adam on cross-entropy + regularization. With a
// validation set the parameters of the best validation-loss epoch are
// restored at the end and training stops after `early_stop_patience`
// epochs without improvement. Throws NonFiniteLossError on NaN/Inf loss.
TrainingHistory train(Model& model, const LabeledSet& train_set, const LabeledSet& val_set,
                      const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace azarnet
