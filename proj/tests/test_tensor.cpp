#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace crashsurr;
using ad::Tensor;
using testing_support::gradient_error;
using testing_support::random_tensor;

namespace {

constexpr double kTol = 1e-4;

// Sum of the output weighted by fixed random coefficients, so every output
// entry gets a distinct upstream gradient.
Tensor weighted(const Tensor& y, std::uint64_t seed = 99) {
  std::mt19937_64 rng(seed);
  return ad::sum(ad::mul(y, random_tensor(y.rows(), y.cols(), rng, false)));
}

}  // namespace

TEST(Tensor, FromChecksBufferLength) {
  EXPECT_THROW(Tensor::from(2, 2, {1.0, 2.0}), Error);
  const auto t = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t(1, 2), 6.0);
}

TEST(Tensor, MatmulMatchesLoop) {
  std::mt19937_64 rng(1);
  const auto a = random_tensor(5, 7, rng, false), b = random_tensor(7, 3, rng, false);
  const auto c = ad::matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < 7; ++p) s += a(i, p) * b(p, j);
      EXPECT_NEAR(c(i, j), s, 1e-14);
    }
  EXPECT_THROW(ad::matmul(a, a), Error);
}

TEST(Tensor, MatmulVariantsAgree) {
  std::mt19937_64 rng(2);
  const auto a = random_tensor(4, 6, rng, false), b = random_tensor(5, 6, rng, false);
  const auto nt = ad::matmul_nt(a, b);
  std::vector<double> bt(30);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) bt[j * 5 + i] = b(i, j);
  const auto ref = ad::matmul(a, Tensor::from(6, 5, bt));
  for (std::size_t k = 0; k < nt.size(); ++k) EXPECT_NEAR(nt.values()[k], ref.values()[k], 1e-14);
  const auto tn = ad::matmul_tn(b, b);
  EXPECT_EQ(tn.rows(), 6u);
  EXPECT_EQ(tn.cols(), 6u);
}

TEST(Tensor, RowSoftmaxOfZerosIsUniform) {
  const auto s = ad::row_softmax(Tensor::from(1, 2, {0.0, 0.0}));
  EXPECT_EQ(s(0, 0), 0.5);
  EXPECT_EQ(s(0, 1), 0.5);
  EXPECT_THROW(ad::row_softmax(Tensor::from(2, 0, {})), Error);
}

TEST(Tensor, RowSoftmaxRowsSumToOneAndShiftInvariant) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto x = random_tensor(6, 9, rng, false, -30.0, 30.0);
    const auto s = ad::row_softmax(x);
    std::vector<double> shifted(x.values().begin(), x.values().end());
    for (std::size_t r = 0; r < 6; ++r)
      for (std::size_t c = 0; c < 9; ++c) shifted[r * 9 + c] += 100.0 * static_cast<double>(r) - 7.0;
    const auto s2 = ad::row_softmax(Tensor::from(6, 9, shifted));
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 9; ++c) {
        total += s(r, c);
        EXPECT_NEAR(s(r, c), s2(r, c), 1e-12);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(Tensor, ScatterThenGatherOnDisjointIndicesIsIdentity) {
  std::mt19937_64 rng(4);
  const auto a = random_tensor(4, 3, rng, false);
  const ad::Index idx = {5, 0, 3, 1};
  const auto back = ad::gather_rows(ad::scatter_add_rows(a, idx, 6), idx);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(back.values()[k], a.values()[k]);
}

TEST(Tensor, ScatterAddAccumulatesRepeatedIndices) {
  const auto a = Tensor::from(3, 1, {1.0, 2.0, 4.0});
  const auto s = ad::scatter_add_rows(a, {1, 1, 0}, 2);
  EXPECT_EQ(s(0, 0), 4.0);
  EXPECT_EQ(s(1, 0), 3.0);
  EXPECT_THROW(ad::scatter_add_rows(a, {0, 1, 2}, 2), Error);
}

TEST(Tensor, LayerNormMatchesHandComputation) {
  const auto x = Tensor::from(1, 4, {1.0, 2.0, 3.0, 4.0});
  const auto y = ad::layer_norm(x, Tensor::from(1, 4, {1, 1, 1, 1}), Tensor::from(1, 4, {0, 0, 0, 0}), 0.0);
  const double sd = std::sqrt(1.25);
  EXPECT_NEAR(y(0, 0), -1.5 / sd, 1e-15);
  EXPECT_NEAR(y(0, 3), 1.5 / sd, 1e-15);
}

TEST(Tensor, GeluAndReluValues) {
  const auto x = Tensor::from(1, 3, {-1.0, 0.0, 2.0});
  const auto r = ad::relu(x);
  EXPECT_EQ(r(0, 0), 0.0);
  EXPECT_EQ(r(0, 2), 2.0);
  const auto g = ad::gelu(x);
  EXPECT_NEAR(g(0, 2), 2.0 * 0.5 * (1.0 + std::erf(2.0 / std::sqrt(2.0))), 1e-15);
  EXPECT_EQ(g(0, 1), 0.0);
}

TEST(Tensor, ReluProbeRecordsSignsWhileActive) {
  const auto x = Tensor::from(1, 3, {-1.0, 0.0, 2.0});
  std::vector<char> outer_signs;
  {
    ad::ReluProbe outer;
    ad::relu(x);
    {
      ad::ReluProbe inner;
      ad::relu(x);
      ad::relu(x);
      EXPECT_EQ(inner.signs(), (std::vector<char>{0, 0, 1, 0, 0, 1}));
    }
    ad::gelu(x);
    outer_signs = outer.signs();
  }
  EXPECT_EQ(outer_signs, (std::vector<char>{0, 0, 1}));
  EXPECT_EQ(ad::relu_probe(), nullptr);
}

TEST(Backward, SumGivesOnes) {
  auto p = Tensor::from(2, 3, {1, 2, 3, 4, 5, 6}, true);
  ad::backward(ad::sum(p));
  for (double g : p.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, MseOfScalarAgainstZero) {
  auto p = Tensor::from(1, 1, {3.0}, true);
  ad::backward(ad::mse(p, Tensor::zeros(1, 1)));
  EXPECT_EQ(p.grad()[0], 6.0);
}

TEST(Backward, RepeatedCallsAccumulate) {
  auto p = Tensor::from(1, 2, {1.0, -2.0}, true);
  const auto loss = ad::sum(ad::mul(p, p));
  ad::backward(loss);
  ad::backward(loss);
  EXPECT_EQ(p.grad()[0], 4.0);
  EXPECT_EQ(p.grad()[1], -8.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  auto p = Tensor::from(1, 2, {1.0, 2.0}, true);
  EXPECT_THROW(ad::backward(p), Error);
}

TEST(Backward, NoGradGuardRecordsNothing) {
  auto p = Tensor::from(1, 1, {2.0}, true);
  ad::NoGradGuard guard;
  const auto y = ad::mul(p, p);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, DiamondGraphSumsBothPaths) {
  auto p = Tensor::from(1, 1, {1.5}, true);
  const auto a = ad::scale(p, 2.0);
  const auto loss = ad::sum(ad::mul(a, ad::exp(p)));  // 2p e^p
  ad::backward(loss);
  EXPECT_NEAR(p.grad()[0], 2.0 * std::exp(1.5) * (1.0 + 1.5), 1e-12);
}

// Finite-difference checks, one per op.

TEST(Gradients, MseOfMatmul) {
  std::mt19937_64 rng(10);
  auto a = random_tensor(4, 3, rng), b = random_tensor(3, 2, rng);
  const auto c = random_tensor(4, 2, rng, false);
  EXPECT_LE(gradient_error([&] { return ad::mse(ad::matmul(a, b), c); }, {a, b}), 1e-5);
}

TEST(Gradients, MatmulNtAndTn) {
  std::mt19937_64 rng(11);
  auto a = random_tensor(4, 3, rng), b = random_tensor(5, 3, rng), c = random_tensor(4, 2, rng);
  EXPECT_LE(gradient_error([&] { return weighted(ad::matmul_nt(a, b)); }, {a, b}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::matmul_tn(a, c)); }, {a, c}), kTol);
}

TEST(Gradients, ElementwiseArithmetic) {
  std::mt19937_64 rng(12);
  auto a = random_tensor(3, 4, rng), b = random_tensor(3, 4, rng);
  auto row = random_tensor(1, 4, rng), col = random_tensor(3, 1, rng), s = random_tensor(1, 1, rng);
  EXPECT_LE(gradient_error([&] { return weighted(ad::add(a, b)); }, {a, b}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::sub(a, b)); }, {a, b}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::mul(a, b)); }, {a, b}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::add_row(a, row)); }, {a, row}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::mul_row(a, row)); }, {a, row}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::mul_col(a, col)); }, {a, col}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::scale(a, -1.7)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::scale_by(a, s)); }, {a, s}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::add_scalar(a, 0.3)); }, {a}), kTol);
}

TEST(Gradients, Nonlinearities) {
  std::mt19937_64 rng(13);
  // Keep relu/clamp inputs away from the kink.
  std::vector<double> v = testing_support::random_values(12, rng, 0.1, 1.0);
  for (std::size_t k = 0; k < v.size(); k += 2) v[k] = -v[k];
  auto a = Tensor::from(3, 4, v, true);
  auto pos = random_tensor(3, 4, rng, true, 0.5, 2.0);
  EXPECT_LE(gradient_error([&] { return weighted(ad::relu(a)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::gelu(a)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::exp(a)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::reciprocal(pos)); }, {pos}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::clamp_min(a, 0.0)); }, {a}), kTol);
}

TEST(Gradients, StructuralOps) {
  std::mt19937_64 rng(14);
  auto a = random_tensor(4, 3, rng), b = random_tensor(4, 2, rng);
  EXPECT_LE(gradient_error([&] { return weighted(ad::concat_cols({a, b, a})); }, {a, b}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::slice_cols(a, 1, 2)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::gather_rows(a, {3, 0, 0, 2, 1})); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::scatter_add_rows(a, {2, 0, 2, 1}, 3)); }, {a}), kTol);
}

TEST(Gradients, ReductionsAndNormalisation) {
  std::mt19937_64 rng(15);
  auto a = random_tensor(3, 5, rng), gamma = random_tensor(1, 5, rng), beta = random_tensor(1, 5, rng);
  auto c = random_tensor(3, 5, rng);
  EXPECT_LE(gradient_error([&] { return weighted(ad::row_softmax(a)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::layer_norm(a, gamma, beta)); }, {a, gamma, beta}), kTol);
  EXPECT_LE(gradient_error([&] { return weighted(ad::row_norm(a)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return ad::mean(ad::mul(a, a)); }, {a}), kTol);
  EXPECT_LE(gradient_error([&] { return ad::mse(a, c); }, {a, c}), kTol);
}

TEST(Gradients, TwoLayerMlp) {
  std::mt19937_64 rng(16);
  auto x = random_tensor(6, 4, rng, false);
  auto w1 = random_tensor(4, 5, rng), b1 = random_tensor(1, 5, rng);
  auto w2 = random_tensor(5, 2, rng), b2 = random_tensor(1, 2, rng);
  const auto target = random_tensor(6, 2, rng, false);
  auto loss = [&] {
    const auto h = ad::gelu(ad::add_row(ad::matmul(x, w1), b1));
    return ad::mse(ad::add_row(ad::matmul(h, w2), b2), target);
  };
  EXPECT_LE(gradient_error(loss, {w1, b1, w2, b2}), kTol);
}
