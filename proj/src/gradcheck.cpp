#include "azarnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "azarnet/layers.hpp"
#include "azarnet/model.hpp"

namespace azarnet {

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

namespace {

constexpr double h = kFiniteDifferenceStep;

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Central differences of f with respect to every entry of `t`.
std::vector<double> numeric_grad(TensorD& t, const std::function<double()>& f) {
  std::vector<double> g(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double saved = t[i];
    t[i] = saved + h;
    const double up = f();
    t[i] = saved - h;
    const double down = f();
    t[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Objective sum(R * layer(x)) [+ layer penalty]; dropout masks are frozen by
// reseeding the rng before every forward.
GradcheckResult check_layer(const std::string& check, Layer<double>& layer, TensorD x, Rng& rng,
                            bool with_penalty) {
  const std::uint64_t mask_seed = rng.next_u64();
  TensorD proj;
  {
    Rng r(mask_seed);
    proj = random_tensor(layer.forward(x, Mode::Train, r).shape(), rng);
  }
  auto objective = [&]() {
    Rng r(mask_seed);
    const TensorD y = layer.forward(x, Mode::Train, r);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += proj[i] * y[i];
    if (with_penalty) s += layer.penalty();
    return s;
  };

  {
    Rng r(mask_seed);
    layer.forward(x, Mode::Train, r);
  }
  const TensorD grad_in = layer.backward(proj);
  std::vector<std::vector<double>> param_grads;
  auto params = layer.params();
  for (auto& p : params) {
    if (p.trainable()) param_grads.push_back(p.grad->vector());
  }

  GradcheckResult res{check, 0.0, kLayerGradTolerance, 0};
  const auto num_in = numeric_grad(x, objective);
  res.max_rel_error = relative_error(grad_in.vector(), num_in);
  res.entries += x.size();
  std::size_t k = 0;
  for (auto& p : params) {
    if (!p.trainable()) continue;
    const auto num = numeric_grad(*p.value, objective);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(param_grads[k++], num));
    res.entries += num.size();
  }
  return res;
}

// Strictly distinct values spaced well beyond the FD step, shuffled.
TensorD spaced_tensor(Shape shape, Rng& rng) {
  TensorD t(std::move(shape));
  std::vector<std::size_t> order(t.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span(order));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = (static_cast<double>(order[i]) - 0.5 * t.size()) * 0.05 + rng.uniform(-0.01, 0.01);
  }
  return t;
}

TensorD one_hot_d(std::size_t rows, std::size_t classes, Rng& rng) {
  TensorD t({rows, classes});
  for (std::size_t r = 0; r < rows; ++r) t(r, rng.below(classes)) = 1.0;
  return t;
}

void randomize_params(Layer<double>& layer, Rng& rng, double scale) {
  for (auto& p : layer.params()) {
    if (!p.trainable()) continue;
    for (double& v : p.value->values()) v = rng.uniform(-scale, scale);
  }
}

}  // namespace

std::vector<GradcheckResult> run_layer_gradchecks(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradcheckResult> out;
  const Regularizer reg{0.01, 0.01};

  {
    Conv2d<double> conv("conv2d", 2, 3, reg, reg);
    randomize_params(conv, rng, 0.5);
    out.push_back(check_layer("conv2d", conv, random_tensor({2, 5, 6, 2}, rng), rng, true));
  }
  {
    MaxPool2x2<double> pool("maxpool");
    out.push_back(check_layer("maxpool", pool, spaced_tensor({2, 4, 6, 3}, rng), rng, false));
  }
  {
    BatchNorm<double> bn("batchnorm", 3);
    for (double& v : bn.gamma.values()) v = rng.uniform(0.5, 1.5);
    for (double& v : bn.beta.values()) v = rng.uniform(-0.5, 0.5);
    out.push_back(check_layer("batchnorm", bn, random_tensor({3, 4, 3}, rng, -2.0, 2.0), rng, false));
  }
  {
    Dropout<double> drop("dropout", 0.4);
    out.push_back(check_layer("dropout", drop, random_tensor({4, 10}, rng), rng, false));
  }
  {
    LeakyRelu<double> act("leaky_relu", 0.1);
    TensorD x = random_tensor({3, 12}, rng, 0.05, 1.0);
    for (std::size_t i = 0; i < x.size(); i += 2) x[i] = -x[i];
    out.push_back(check_layer("leaky_relu", act, std::move(x), rng, false));
  }
  {
    GradcheckResult worst{"gru", 0.0, kLayerGradTolerance, 0};
    for (bool sequences : {true, false}) {
      Gru<double> gru("gru", 3, 5, sequences, reg, reg);
      randomize_params(gru, rng, 0.5);
      const auto r = check_layer("gru", gru, random_tensor({2, 4, 3}, rng), rng, true);
      worst.max_rel_error = std::max(worst.max_rel_error, r.max_rel_error);
      worst.entries += r.entries;
    }
    out.push_back(worst);
  }
  {
    Dense<double> dense("dense", 4, 5);
    randomize_params(dense, rng, 0.5);
    out.push_back(check_layer("dense", dense, random_tensor({3, 4}, rng), rng, false));
  }
  {
    TensorD logits = random_tensor({3, 7}, rng, -2.0, 2.0);
    const TensorD targets = one_hot_d(3, 7, rng);
    const TensorD analytic = softmax_cross_entropy_grad(softmax(logits), targets);
    const auto numeric = numeric_grad(logits, [&] { return cross_entropy_loss(softmax(logits), targets); });
    out.push_back({"softmax_cross_entropy", relative_error(analytic.vector(), numeric), kLayerGradTolerance,
                   numeric.size()});
  }
  return out;
}

GradcheckResult run_model_gradcheck(std::uint64_t seed, std::size_t samples) {
  Rng rng(seed);
  ModelConfig cfg;
  cfg.input_shape = {16, 16, 1};
  cfg.conv_filters = {2, 3};
  cfg.dropout_rates = {0.1, 0.2};
  cfg.gru_units = {3, 4};
  cfg.bottleneck = 3;
  cfg.seed = rng.next_u64();
  ModelD model(cfg);
  for (auto& p : model.trainable_parameters()) {
    for (double& v : p.ref.value->values()) v += rng.uniform(-0.1, 0.1);
  }

  const std::size_t batch = 3;
  const TensorD x = random_tensor({batch, 16, 16, 1}, rng, 0.0, 1.0);
  const TensorD targets = one_hot_d(batch, cfg.classes, rng);
  const std::uint64_t mask_seed = rng.next_u64();
  auto objective = [&]() {
    Rng r(mask_seed);
    const TensorD probs = model.forward(x, Mode::Train, r);
    return cross_entropy_loss(probs, targets) + model.penalty();
  };

  {
    Rng r(mask_seed);
    model.forward(x, Mode::Train, r);
  }
  model.backward(targets);

  auto params = model.trainable_parameters();
  std::size_t total = 0;
  for (auto& p : params) total += p.ref.value->size();
  std::set<std::size_t> picks;
  while (picks.size() < std::min(samples, total)) picks.insert(rng.below(total));

  std::vector<double> analytic, numeric;
  for (std::size_t flat : picks) {
    std::size_t k = 0;
    while (flat >= params[k].ref.value->size()) flat -= params[k++].ref.value->size();
    analytic.push_back((*params[k].ref.grad)[flat]);
  }
  for (std::size_t flat : picks) {
    std::size_t k = 0;
    while (flat >= params[k].ref.value->size()) flat -= params[k++].ref.value->size();
    double& w = (*params[k].ref.value)[flat];
    const double saved = w;
    w = saved + h;
    const double up = objective();
    w = saved - h;
    const double down = objective();
    w = saved;
    numeric.push_back((up - down) / (2.0 * h));
  }
  return {"model", relative_error(analytic, numeric), kModelGradTolerance, picks.size()};
}

}  // namespace azarnet
