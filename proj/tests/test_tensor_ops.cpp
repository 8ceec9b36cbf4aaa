#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "eegnet/ops.hpp"
#include "eegnet/rng.hpp"
#include "eegnet/tensor.hpp"

using eegnet::Mode;
using eegnet::RngStream;
using eegnet::Tensor;

TEST(Tensor, IndexingMatchesRowMajorLayout) {
  Tensor<double> t({2, 3, 4});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  EXPECT_EQ(t(0, 0, 0), 0.0);
  EXPECT_EQ(t(0, 0, 3), 3.0);
  EXPECT_EQ(t(0, 1, 0), 4.0);
  EXPECT_EQ(t(1, 0, 0), 12.0);
  EXPECT_EQ(t(1, 2, 3), 23.0);
}

TEST(Tensor, ReshapedKeepsLinearOrder) {
  Tensor<double> t({2, 6});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  const Tensor<double> r = t.reshaped({3, 4});
  EXPECT_EQ(r.rank(), 2);
  EXPECT_EQ(r.extent(0), 3);
  for (std::int64_t i = 0; i < r.size(); ++i) EXPECT_EQ(r[i], t[i]);
  EXPECT_THROW(t.reshaped({5, 2}), eegnet::ShapeError);
}

TEST(Elu, MatchesClosedForm) {
  Tensor<double> x({3});
  x[0] = -1.0;
  x[1] = 0.0;
  x[2] = 2.0;
  const Tensor<double> y = eegnet::elu(x, 1.0);
  EXPECT_NEAR(y[0], -0.63212055882855767, 1e-15);
  EXPECT_EQ(y[1], 0.0);
  EXPECT_EQ(y[2], 2.0);
}

TEST(Elu, BackwardUsesOutputSlope) {
  Tensor<double> x({2});
  x[0] = -1.0;
  x[1] = 2.0;
  const Tensor<double> y = eegnet::elu(x, 1.0);
  Tensor<double> g({2}, 1.0);
  Tensor<double> dx({2});
  eegnet::elu_backward(y, 1.0, g, dx);
  EXPECT_NEAR(dx[0], std::exp(-1.0), 1e-15);  // alpha * e^x = y + alpha
  EXPECT_EQ(dx[1], 1.0);
}

TEST(Softmax, MatchesFrozenValues) {
  Tensor<double> z({1, 3});
  z(0, 0) = 2.0;
  z(0, 1) = 1.0;
  z(0, 2) = 0.0;
  const Tensor<double> p = eegnet::softmax_rows(z);
  EXPECT_NEAR(p(0, 0), 0.66524095577482190, 1e-15);
  EXPECT_NEAR(p(0, 1), 0.24472847105479764, 1e-15);
  EXPECT_NEAR(p(0, 2), 0.09003057317038046, 1e-15);
  EXPECT_NEAR(p(0, 0) + p(0, 1) + p(0, 2), 1.0, 1e-15);
}

TEST(Softmax, LargeLogitsStayFinite) {
  Tensor<double> z({1, 2});
  z(0, 0) = 1000.0;
  z(0, 1) = -1000.0;
  const Tensor<double> p = eegnet::softmax_rows(z);
  EXPECT_NEAR(p(0, 0), 1.0, 1e-15);
  EXPECT_TRUE(p.all_finite());
}

TEST(CrossEntropy, MatchesLogOracleAndFloorsZeros) {
  Tensor<double> p({2});
  p[0] = 0.9;
  p[1] = 0.1;
  EXPECT_NEAR(eegnet::cross_entropy(p, 1), 2.3025850929940457, 1e-14);
  Tensor<double> z({2});
  z[0] = 1.0;
  z[1] = 0.0;
  const double floored = eegnet::cross_entropy(z, 1);
  EXPECT_TRUE(std::isfinite(floored));
  EXPECT_NEAR(floored, -std::log(std::numeric_limits<double>::min()), 1e-9);
  EXPECT_THROW(eegnet::cross_entropy(p, 2), eegnet::DataError);
}

TEST(CrossEntropy, BackwardIsZeroBelowFloor) {
  Tensor<double> p({1, 2});
  p(0, 0) = 1.0;
  p(0, 1) = 0.0;
  Tensor<double> g({1}, 1.0);
  Tensor<double> dp({1, 2});
  eegnet::cross_entropy_backward(p, {1}, g, dp);
  EXPECT_EQ(dp(0, 0), 0.0);
  EXPECT_EQ(dp(0, 1), 0.0);
  p(0, 1) = 0.25;
  dp.fill(0);
  eegnet::cross_entropy_backward(p, {1}, g, dp);
  EXPECT_NEAR(dp(0, 1), -4.0, 1e-12);
}

TEST(Affine, MatchesHandComputation) {
  Tensor<double> x({1, 3});
  x(0, 0) = 1.0;
  x(0, 1) = 2.0;
  x(0, 2) = 3.0;
  Tensor<double> w({2, 3});
  for (std::int64_t i = 0; i < 6; ++i) w[i] = static_cast<double>(i + 1);
  Tensor<double> b({2});
  b[0] = 0.5;
  b[1] = -0.5;
  const Tensor<double> z = eegnet::affine_forward_batch(x, w, b);
  EXPECT_NEAR(z(0, 0), 1 + 4 + 9 + 0.5, 1e-14);
  EXPECT_NEAR(z(0, 1), 4 + 10 + 18 - 0.5, 1e-14);
}

TEST(MaxPool, ForwardPicksMaximaAndValidatesDivisibility) {
  Tensor<double> x({1, 1, 2, 4});
  const double vals[] = {1, 5, 2, 0, 3, -1, 7, 2};
  for (std::int64_t i = 0; i < 8; ++i) x[i] = vals[i];
  std::vector<std::int64_t> argmax;
  const Tensor<double> y = eegnet::maxpool2d_forward_batch(x, 2, 4, &argmax);
  EXPECT_EQ(y.extent(2), 1);
  EXPECT_EQ(y.extent(3), 1);
  EXPECT_EQ(y(0, 0, 0, 0), 7.0);
  EXPECT_EQ(argmax[0], 6);
  Tensor<double> bad({1, 1, 3, 4});
  EXPECT_THROW(eegnet::maxpool2d_forward_batch(bad, 2, 4, nullptr),
               eegnet::ShapeError);
}

TEST(MaxPool, TiesGoToFirstInScanOrder) {
  Tensor<double> x({1, 1, 2, 2}, 4.0);
  std::vector<std::int64_t> argmax;
  eegnet::maxpool2d_forward_batch(x, 2, 2, &argmax);
  EXPECT_EQ(argmax[0], 0);
}

TEST(MaxPool, BackwardRoutesGradientToArgmax) {
  Tensor<double> x({1, 1, 2, 4});
  for (std::int64_t i = 0; i < 8; ++i) x[i] = static_cast<double>(i);
  std::vector<std::int64_t> argmax;
  const Tensor<double> y = eegnet::maxpool2d_forward_batch(x, 2, 4, &argmax);
  Tensor<double> g(y.shape(), 2.5);
  Tensor<double> dx(x.shape());
  eegnet::maxpool2d_backward_batch(argmax, g, dx);
  for (std::int64_t i = 0; i < 8; ++i) {
    EXPECT_EQ(dx[i], i == 7 ? 2.5 : 0.0);
  }
}

TEST(BatchNorm, NormalizesTwoPointBatch) {
  Tensor<double> x({2, 1});
  x(0, 0) = 1.0;
  x(1, 0) = 3.0;
  Tensor<double> gamma({1}, 1.0), beta({1}, 0.0);
  Tensor<double> rm({1}, 0.0), rv({1}, 1.0);
  eegnet::BatchNormCache<double> cache;
  const Tensor<double> y = eegnet::batchnorm_forward(x, gamma, beta, rm, rv,
                                                     1e-5, 0.1, Mode::train,
                                                     &cache);
  const double inv = 1.0 / std::sqrt(1.0 + 1e-5);
  EXPECT_NEAR(y(0, 0), -inv, 1e-15);
  EXPECT_NEAR(y(1, 0), inv, 1e-15);
  EXPECT_NEAR(rm[0], 0.2, 1e-15);   // 0.9 * 0 + 0.1 * 2
  EXPECT_NEAR(rv[0], 1.0, 1e-15);   // 0.9 * 1 + 0.1 * 1
}

TEST(BatchNorm, ConstantBatchYieldsExactlyBeta) {
  Tensor<double> x({4, 2, 3}, 3.5);
  Tensor<double> gamma({2}, 2.0);
  Tensor<double> beta({2});
  beta[0] = 0.25;
  beta[1] = -1.5;
  Tensor<double> rm({2}, 0.0), rv({2}, 1.0);
  const Tensor<double> y = eegnet::batchnorm_forward(
      x, gamma, beta, rm, rv, 1e-5, 0.1, Mode::train);
  for (std::int64_t b = 0; b < 4; ++b) {
    for (std::int64_t m = 0; m < 3; ++m) {
      EXPECT_EQ(y(b, 0, m), 0.25);
      EXPECT_EQ(y(b, 1, m), -1.5);
    }
  }
}

TEST(BatchNorm, SingleSampleTrainBatchIsRejected) {
  Tensor<double> x({1, 2});
  Tensor<double> gamma({2}, 1.0), beta({2}, 0.0);
  Tensor<double> rm({2}, 0.0), rv({2}, 1.0);
  EXPECT_THROW(eegnet::batchnorm_forward(x, gamma, beta, rm, rv, 1e-5, 0.1,
                                         Mode::train),
               eegnet::DataError);
  EXPECT_NO_THROW(eegnet::batchnorm_forward(x, gamma, beta, rm, rv, 1e-5, 0.1,
                                            Mode::infer));
}

TEST(BatchNorm, InferUsesRunningStatistics) {
  Tensor<double> x({1, 1});
  x(0, 0) = 5.0;
  Tensor<double> gamma({1}, 1.0), beta({1}, 0.0);
  Tensor<double> rm({1}, 5.0), rv({1}, 4.0);
  const Tensor<double> y = eegnet::batchnorm_forward(
      x, gamma, beta, rm, rv, 1e-5, 0.1, Mode::infer);
  EXPECT_NEAR(y(0, 0), 0.0, 1e-15);
  EXPECT_EQ(rm[0], 5.0);  // infer mode must not touch the running stats
  EXPECT_EQ(rv[0], 4.0);
}

TEST(Dropout, InferIsIdentityAndTrainScalesSurvivors) {
  Tensor<double> x({1000}, 1.0);
  const Tensor<double> y_infer =
      eegnet::dropout(x, 0.5, Mode::infer, RngStream(1));
  for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_EQ(y_infer[i], 1.0);
  Tensor<double> mask;
  const Tensor<double> y = eegnet::dropout_forward(x, 0.5, Mode::train,
                                                   RngStream(1), &mask);
  std::int64_t kept = 0;
  for (std::int64_t i = 0; i < x.size(); ++i) {
    EXPECT_TRUE(y[i] == 0.0 || y[i] == 2.0);
    EXPECT_EQ(mask[i], y[i]);
    if (y[i] != 0.0) ++kept;
  }
  EXPECT_NEAR(static_cast<double>(kept), 500.0, 60.0);
  EXPECT_THROW(eegnet::dropout(x, 1.0, Mode::train, RngStream(1)),
               eegnet::ValueError);
}

TEST(Dropout, ZeroRateIsIdentityInTrainMode) {
  Tensor<double> x({64});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const Tensor<double> y = eegnet::dropout(x, 0.0, Mode::train, RngStream(7));
  for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

// The mask draws consume one uniform per element whatever p is, so from the
// same stream the kept set at a higher rate nests inside the kept set at a
// lower rate.
TEST(Dropout, KeepSetsNestAcrossRatesFromTheSameStream) {
  Tensor<double> x({2000}, 1.0);
  Tensor<double> mask_low, mask_high;
  eegnet::dropout_forward(x, 0.25, Mode::train, RngStream(9), &mask_low);
  eegnet::dropout_forward(x, 0.5, Mode::train, RngStream(9), &mask_high);
  for (std::int64_t i = 0; i < x.size(); ++i) {
    if (mask_high[i] != 0.0) EXPECT_NE(mask_low[i], 0.0);
  }
}

TEST(Transpose, SwapsTheRequestedAxes) {
  Tensor<double> x({2, 3, 4});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const Tensor<double> y = eegnet::transpose_swap(x, 0, 1);
  EXPECT_EQ(y.extent(0), 3);
  EXPECT_EQ(y.extent(1), 2);
  EXPECT_EQ(y.extent(2), 4);
  for (std::int64_t i = 0; i < 2; ++i) {
    for (std::int64_t j = 0; j < 3; ++j) {
      for (std::int64_t k = 0; k < 4; ++k) {
        EXPECT_EQ(y(j, i, k), x(i, j, k));
      }
    }
  }
  const Tensor<double> z = eegnet::transpose_swap(x, 1, 2);
  for (std::int64_t i = 0; i < 2; ++i) {
    for (std::int64_t j = 0; j < 3; ++j) {
      for (std::int64_t k = 0; k < 4; ++k) {
        EXPECT_EQ(z(i, k, j), x(i, j, k));
      }
    }
  }
  EXPECT_THROW(eegnet::transpose_swap(x, 0, 3), eegnet::ShapeError);
}

TEST(Transpose, DoubleSwapIsIdentity) {
  Tensor<double> x({3, 5, 2});
  RngStream rng(4);
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform01();
  const Tensor<double> y =
      eegnet::transpose_swap(eegnet::transpose_swap(x, 0, 2), 0, 2);
  for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}
