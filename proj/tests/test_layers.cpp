#include <gtest/gtest.h>

#include <cmath>

#include "azarnet/gradcheck.hpp"
#include "azarnet/layers.hpp"

using namespace azarnet;

namespace {

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST(Conv2d, DeltaKernelIsIdentity) {
  Conv2d<double> conv("c", 1, 1);
  conv.kernel.fill(0.0);
  conv.kernel(1, 1, 0, 0) = 1.0;
  conv.bias.fill(0.0);
  Rng rng(1);
  const TensorD x = random_tensor({1, 5, 4, 1}, rng);
  EXPECT_EQ(conv.forward(x, Mode::Infer, rng), x);
}

TEST(Conv2d, OnesShowZeroPadding) {
  Conv2d<double> conv("c", 1, 1);
  conv.kernel.fill(1.0);
  conv.bias.fill(0.0);
  Rng rng(1);
  const TensorD y = conv.forward(TensorD({1, 3, 3, 1}, 1.0), Mode::Infer, rng);
  EXPECT_EQ(y(0, 1, 1, 0), 9.0);
  EXPECT_EQ(y(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y(0, 2, 2, 0), 4.0);
  EXPECT_EQ(y(0, 0, 1, 0), 6.0);
  EXPECT_EQ(y(0, 1, 2, 0), 6.0);
}

TEST(Conv2d, MatchesDirectLoop) {
  Rng rng(2);
  Conv2d<double> conv("c", 2, 3);
  for (double& v : conv.kernel.values()) v = rng.uniform(-1, 1);
  for (double& v : conv.bias.values()) v = rng.uniform(-1, 1);
  const TensorD x = random_tensor({2, 8, 8, 2}, rng);
  const TensorD y = conv.forward(x, Mode::Infer, rng);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 8; ++j)
        for (std::size_t o = 0; o < 3; ++o) {
          double s = conv.bias[o];
          for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj)
              for (std::size_t c = 0; c < 2; ++c) {
                const int ii = static_cast<int>(i) + di, jj = static_cast<int>(j) + dj;
                if (ii < 0 || jj < 0 || ii >= 8 || jj >= 8) continue;
                s += x(b, ii, jj, c) * conv.kernel(di + 1, dj + 1, c, o);
              }
          ASSERT_NEAR(y(b, i, j, o), s, 1e-10);
        }
}

TEST(Conv2d, ParameterCountAndChannelCheck) {
  EXPECT_EQ(Conv2d<float>("c", 1, 16).param_count(), 160u);
  EXPECT_EQ(Conv2d<float>("c", 16, 32).param_count(), 4640u);
  Conv2d<float> conv("c", 2, 3);
  Rng rng(0);
  EXPECT_THROW(conv.forward(Tensor({1, 4, 4, 3}), Mode::Infer, rng), DimensionError);
}

TEST(MaxPool, MaxAndTieRule) {
  MaxPool2x2<double> pool("p");
  Rng rng(0);
  EXPECT_EQ(pool.forward(TensorD({1, 2, 2, 1}, {1, 2, 3, 4}), Mode::Train, rng)[0], 4.0);

  const TensorD g = pool.forward(TensorD({1, 4, 4, 1}, 2.0), Mode::Train, rng);
  EXPECT_EQ(g.shape(), (Shape{1, 2, 2, 1}));
  const TensorD gin = pool.backward(TensorD({1, 2, 2, 1}, {1, 2, 3, 4}));
  EXPECT_EQ(gin(0, 0, 0, 0), 1.0);
  EXPECT_EQ(gin(0, 0, 2, 0), 2.0);
  EXPECT_EQ(gin(0, 2, 0, 0), 3.0);
  EXPECT_EQ(gin(0, 2, 2, 0), 4.0);
  EXPECT_EQ(reduce_sum(gin), 10.0);
}

TEST(MaxPool, TableShapeAndOddDims) {
  MaxPool2x2<float> pool("p");
  EXPECT_EQ(pool.output_shape({256, 256, 16}), (Shape{128, 128, 16}));
  Rng rng(0);
  EXPECT_THROW(pool.forward(Tensor({1, 3, 4, 1}), Mode::Infer, rng), DimensionError);
}

TEST(MaxPool, BackwardConservesMass) {
  Rng rng(4);
  MaxPool2x2<double> pool("p");
  pool.forward(random_tensor({2, 6, 4, 3}, rng), Mode::Train, rng);
  const TensorD g = random_tensor({2, 3, 2, 3}, rng);
  EXPECT_NEAR(reduce_sum(pool.backward(g)), reduce_sum(g), 1e-12);
}

TEST(BatchNorm, TrainModeStandardizes) {
  Rng rng(5);
  BatchNorm<double> bn("bn", 2);
  const TensorD y = bn.forward(random_tensor({64, 2}, rng, -3, 5), Mode::Train, rng);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0, var = 0;
    for (std::size_t b = 0; b < 64; ++b) mean += y(b, c) / 64;
    for (std::size_t b = 0; b < 64; ++b) var += (y(b, c) - mean) * (y(b, c) - mean) / 64;
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-3);
  }
}

TEST(BatchNorm, RunningStatsMomentum) {
  BatchNorm<double> bn("bn", 1);
  Rng rng(0);
  bn.forward(TensorD({4, 1}, 1.0), Mode::Train, rng);
  EXPECT_NEAR(bn.running_mean[0], 0.2, 1e-12);
  EXPECT_NEAR(bn.running_var[0], 0.8, 1e-12);
  EXPECT_EQ(bn.param_count(), 4u);
  EXPECT_EQ(BatchNorm<float>("bn", 16).param_count(), 64u);
}

TEST(BatchNorm, InferUsesRunningStats) {
  Rng rng(6);
  const TensorD x = random_tensor({10, 3}, rng);
  BatchNorm<double> bn("bn", 3);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    for (std::size_t b = 0; b < 10; ++b) mean += x(b, c) / 10;
    for (std::size_t b = 0; b < 10; ++b) var += (x(b, c) - mean) * (x(b, c) - mean) / 10;
    bn.running_mean[c] = mean;
    bn.running_var[c] = var;
  }
  const TensorD a = bn.forward(x, Mode::Infer, rng);
  const TensorD t = bn.forward(x, Mode::Train, rng);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], t[i], 1e-12);
  EXPECT_EQ(bn.forward(x, Mode::Infer, rng), a);
}

TEST(Dropout, IdentityCases) {
  Rng rng(7);
  const TensorD x = random_tensor({5, 9}, rng);
  Dropout<double> none("d", 0.0), heavy("d", 0.4);
  EXPECT_EQ(none.forward(x, Mode::Train, rng), x);
  EXPECT_EQ(none.forward(x, Mode::Infer, rng), x);
  EXPECT_EQ(heavy.forward(x, Mode::Infer, rng), x);
  EXPECT_THROW(Dropout<double>("d", 1.0), ConfigError);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  Rng rng(8);
  Dropout<double> d("d", 0.5);
  const TensorD y = d.forward(TensorD({100000}, 1.0), Mode::Train, rng);
  EXPECT_NEAR(reduce_sum(y) / 100000.0, 1.0, 0.05);
  for (double v : y.values()) ASSERT_TRUE(v == 0.0 || v == 2.0);
}

TEST(LeakyRelu, ValuesAndSlope) {
  const TensorD y = leaky_relu(TensorD({3}, {2.0, -2.0, 0.0}));
  EXPECT_EQ(y[0], 2.0);
  EXPECT_NEAR(y[1], -0.2, 1e-15);
  EXPECT_EQ(y[2], 0.0);
  LeakyRelu<double> act("a");
  Rng rng(0);
  act.forward(TensorD({1}, {-3.0}), Mode::Train, rng);
  EXPECT_NEAR(act.backward(TensorD({1}, {1.0}))[0], 0.1, 1e-15);
}

TEST(Gru, ZeroParamsStayAtZero) {
  Gru<double> gru("g", 4, 3, true);
  for (auto& p : gru.params()) p.value->fill(0.0);
  Rng rng(9);
  const TensorD y = gru.forward(random_tensor({2, 5, 4}, rng), Mode::Infer, rng);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gru, ParameterCounts) {
  EXPECT_EQ(Gru<float>("g", 64, 50, true).param_count(), 17400u);
  EXPECT_EQ(Gru<float>("g", 50, 100, false).param_count(), 45600u);
}

TEST(Gru, SingleStepMatchesScalarRecurrence) {
  Rng rng(10);
  const std::size_t m = 3, n = 4;
  Gru<double> gru("g", m, n, false);
  for (auto& p : gru.params()) {
    for (double& v : p.value->values()) v = rng.uniform(-1, 1);
  }
  const TensorD x = random_tensor({1, 1, m}, rng);
  const TensorD h0 = random_tensor({1, n}, rng);
  const TensorD y = gru.forward_from(x, h0, Mode::Infer);
  auto W = [&](std::size_t i, std::size_t j) { return gru.kernel(i, j); };
  auto U = [&](std::size_t i, std::size_t j) { return gru.recurrent_kernel(i, j); };
  for (std::size_t u = 0; u < n; ++u) {
    double xz = gru.input_bias[u], xr = gru.input_bias[n + u], xh = gru.input_bias[2 * n + u];
    double hz = gru.recurrent_bias[u], hr = gru.recurrent_bias[n + u], hh = gru.recurrent_bias[2 * n + u];
    for (std::size_t i = 0; i < m; ++i) {
      xz += x[i] * W(i, u);
      xr += x[i] * W(i, n + u);
      xh += x[i] * W(i, 2 * n + u);
    }
    for (std::size_t i = 0; i < n; ++i) {
      hz += h0[i] * U(i, u);
      hr += h0[i] * U(i, n + u);
      hh += h0[i] * U(i, 2 * n + u);
    }
    const double z = sigmoid(xz + hz), r = sigmoid(xr + hr);
    const double cand = std::tanh(xh + r * hh);
    EXPECT_NEAR(y(0, u), (1 - z) * cand + z * h0[u], 1e-10);
  }
}

TEST(Gru, FeatureMismatchThrows) {
  Gru<float> gru("g", 4, 3, true);
  Rng rng(0);
  EXPECT_THROW(gru.forward(Tensor({1, 2, 5}), Mode::Infer, rng), DimensionError);
}

TEST(Dense, IdentityMatmulAndGradStructure) {
  Dense<double> dense("d", 2, 2);
  dense.weights = TensorD({2, 2}, {1, 0, 0, 1});
  dense.bias.fill(0.0);
  Rng rng(11);
  const TensorD x({1, 2}, {0.3, -0.7});
  EXPECT_EQ(dense.forward(x, Mode::Train, rng), x);
  dense.backward(TensorD({1, 2}, {1.5, -2.5}));

  Dense<double> d2("d", 2, 3);
  d2.forward(TensorD({1, 2}, {1, 0}), Mode::Train, rng);
  d2.backward(TensorD({1, 3}, {4, 5, 6}));
  EXPECT_EQ(d2.weights_grad, TensorD({2, 3}, {4, 5, 6, 0, 0, 0}));

  Dense<double> d3("d", 4, 3);
  for (double& v : d3.weights.values()) v = rng.uniform(-1, 1);
  for (double& v : d3.bias.values()) v = rng.uniform(-1, 1);
  const TensorD in = random_tensor({5, 4}, rng);
  const TensorD got = d3.forward(in, Mode::Infer, rng);
  TensorD want = matmul(in, d3.weights);
  for (std::size_t b = 0; b < 5; ++b)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(got(b, j), want(b, j) + d3.bias[j], 1e-12);
  EXPECT_EQ(Dense<float>("d", 100, 5).param_count(), 505u);
  EXPECT_EQ(Dense<float>("d", 5, 7).param_count(), 42u);
}

TEST(Softmax, UniformShiftAndOracle) {
  const TensorD u = softmax(TensorD({1, 7}, 0.0));
  for (double v : u.values()) EXPECT_NEAR(v, 1.0 / 7, 1e-15);

  const TensorD p = softmax(TensorD({1, 3}, {2, 0, 0}));
  const double denom = std::exp(2.0) + 2.0;
  EXPECT_NEAR(p[0], std::exp(2.0) / denom, 1e-12);
  EXPECT_NEAR(p[0], 0.78699, 1e-5);
  EXPECT_NEAR(p[1], 0.10651, 1e-5);

  Rng rng(12);
  const TensorD x = random_tensor({4, 7}, rng, -5, 5);
  TensorD shifted = x;
  for (double& v : shifted.values()) v += 123.0;
  const TensorD a = softmax(x), b = softmax(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0;
    for (std::size_t k = 0; k < 7; ++k) s += a(r, k);
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Backward, WithoutForwardIsStateError) {
  Conv2d<float> conv("c", 1, 1);
  EXPECT_THROW(conv.backward(Tensor({1, 2, 2, 1})), StateError);
  Gru<float> gru("g", 2, 2, true);
  EXPECT_THROW(gru.backward(Tensor({1, 2, 2})), StateError);
  Dense<float> dense("d", 2, 2);
  EXPECT_THROW(dense.backward(Tensor({1, 2})), StateError);
}

TEST(Gradcheck, EveryLayerBelowTolerance) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto results = run_layer_gradchecks(seed);
    ASSERT_EQ(results.size(), 8u);
    for (const auto& r : results) {
      EXPECT_LT(r.max_rel_error, 1e-4) << r.check << " seed " << seed;
      EXPECT_GT(r.entries, 0u);
    }
  }
}

TEST(Gradcheck, RelativeErrorDefinition) {
  const std::vector<double> a{1, 0}, n{1, 0};
  EXPECT_EQ(relative_error(a, n), 0.0);
  const std::vector<double> b{3, 4}, m{0, 0};
  EXPECT_NEAR(relative_error(b, m), 1.0, 1e-15);
}
