#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "azarnet/rng.hpp"
#include "azarnet/tensor.hpp"

using namespace azarnet;

namespace {

TensorD random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  TensorD t({r, c});
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

TensorD naive_matmul(const TensorD& a, const TensorD& b) {
  TensorD out({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i)
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor eye({2, 2}, {1, 0, 0, 1});
  const Tensor m({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(matmul(eye, m), m);
}

TEST(Matmul, RowTimesColumn) {
  const Tensor r = matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4}));
  EXPECT_EQ(r.shape(), (Shape{1, 1}));
  EXPECT_EQ(r[0], 11.0f);
}

TEST(Matmul, MatchesTripleLoop) {
  Rng rng(5);
  const TensorD a = random_matrix(5, 7, rng), b = random_matrix(7, 3, rng);
  const TensorD got = matmul(a, b), want = naive_matmul(a, b);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
}

TEST(Matmul, Associative) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const TensorD a = random_matrix(4, 6, rng), b = random_matrix(6, 5, rng), c = random_matrix(5, 3, rng);
    const TensorD l = matmul(matmul(a, b), c), r = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < l.size(); ++i) EXPECT_NEAR(l[i], r[i], 1e-9);
  }
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Tensor({2, 3}), Tensor({4, 2}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(2, 3)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(4, 2)"), std::string::npos) << msg;
  }
}

TEST(Reshape, TableRowPreservesOrder) {
  Tensor t({8, 8, 64});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(i);
  const Tensor r = reshape(t, {64, 64});
  EXPECT_EQ(r.shape(), (Shape{64, 64}));
  for (std::size_t i = 0; i < t.size(); ++i) ASSERT_EQ(r[i], t[i]);
}

TEST(Reshape, RoundTrip) {
  const Tensor t({4}, {1, 2, 3, 4});
  EXPECT_EQ(reshape(reshape(t, {2, 2}), {4}), t);
}

TEST(Reshape, RowMajorRows) {
  const Tensor r = reshape(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}), {3, 2});
  EXPECT_EQ(r(0, 0), 1);
  EXPECT_EQ(r(0, 1), 2);
  EXPECT_EQ(r(1, 0), 3);
  EXPECT_EQ(r(2, 1), 6);
}

TEST(Reshape, CountMismatchThrows) { EXPECT_THROW(reshape(Tensor({2, 3}), {4, 2}), DimensionError); }

TEST(Tensor, RejectsBadConstruction) {
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
}

TEST(MapReduce, Basics) {
  EXPECT_EQ(map_unary<float>(Tensor({2}, {-1, 2}), [](float v) { return std::fabs(v); }), Tensor({2}, {1, 2}));
  EXPECT_EQ(reduce_sum(Tensor({3}, {1, 2, 3})), 6.0f);
  EXPECT_EQ(reduce_sum(Tensor::zeros({100})), 0.0f);
}

TEST(TensorCodec, RoundTripIsBitExact) {
  Rng rng(1);
  Tensor t({3, 4, 5});
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-10, 10));
  EXPECT_EQ(decode_tensor(encode_tensor(t)), t);
}

TEST(TensorCodec, LayoutIsMagicRankDimsPayload) {
  const auto bytes = encode_tensor(Tensor({2, 1}, {1.0f, -2.0f}));
  ASSERT_EQ(bytes.size(), 8u + 4 + 2 * 4 + 2 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "AZTN0001");
  EXPECT_EQ(bytes[8], 2);
  EXPECT_EQ(bytes[12], 2);
  EXPECT_EQ(bytes[16], 1);
  // 1.0f = 0x3F800000 little-endian
  EXPECT_EQ(bytes[20], 0x00);
  EXPECT_EQ(bytes[23], 0x3F);
}

TEST(TensorCodec, CorruptInputThrows) {
  auto bytes = encode_tensor(Tensor({4}, {1, 2, 3, 4}));
  auto truncated = bytes;
  truncated.resize(truncated.size() - 3);
  EXPECT_THROW(decode_tensor(truncated), CorruptFileError);
  bytes[0] = 'X';
  EXPECT_THROW(decode_tensor(bytes), CorruptFileError);
}

TEST(Rng, EqualSeedsGiveEqualStreams) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const auto x = a.next_u64();
    ASSERT_EQ(x, b.next_u64());
    differs = differs || x != c.next_u64();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, MatchesReferenceXoshiro) {
  // Independent reference: xoshiro256** seeded by four splitmix64 outputs.
  std::uint64_t x = 7, s[4];
  for (auto& w : s) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    w = z ^ (z >> 31);
  }
  auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const std::uint64_t want = rotl(s[1] * 5, 7) * 9;
    const std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    ASSERT_EQ(rng.next_u64(), want);
  }
}

TEST(Rng, UniformAndBelowRanges) {
  Rng rng(3);
  std::vector<int> hist(5, 0);
  for (int i = 0; i < 50000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++hist[rng.below(5)];
  }
  for (int h : hist) EXPECT_NEAR(h, 10000, 500);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng rng(9);
  std::vector<int> v(50);
  for (int i = 0; i < 50; ++i) v[i] = i;
  rng.shuffle(std::span(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_NE(v, sorted);
}
