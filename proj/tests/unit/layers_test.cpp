/*
 * Copyright 2026 The passband authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "passband/layers.hpp"

#include <gtest/gtest.h>

#include "passband/rng.hpp"
#include "support/grad_check.hpp"

namespace passband {
namespace {

using testing::check_avgpool_gradients;
using testing::check_batchnorm_gradients;
using testing::check_conv_gradients;
using testing::check_linear_gradients;
using testing::check_maxpool_gradients;
using testing::check_relu_gradients;
using testing::check_softmax_gradients;
using testing::naive_conv2d;
using testing::random_tensor;

TEST(Conv2d, OneByOneIdentityWeight) {
  Rng rng(1);
  Tensor4<double> x = random_tensor(2, 1, 4, 4, rng);
  Tensor4<double> w(1, 1, 1, 1);
  w.data[0] = 1.0;
  Tensor4<double> y = conv2d_forward(x, w, {}, 1, 0);
  EXPECT_EQ(y.data, x.data);
}

TEST(Conv2d, AllOnesKernelSumsWindows) {
  // 1x1x3x3 input, 2x2 all-ones kernel, stride 1, pad 0.
  Tensor4<double> x(1, 1, 3, 3);
  x.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  Tensor4<double> w(1, 1, 2, 2, 1.0);
  Tensor4<double> y = conv2d_forward(x, w, {}, 1, 0);
  ASSERT_EQ(y.h, 2);
  ASSERT_EQ(y.w, 2);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 0), 1 + 2 + 4 + 5);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 0, 1), 2 + 3 + 5 + 6);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 0), 4 + 5 + 7 + 8);
  EXPECT_DOUBLE_EQ(y.at(0, 0, 1, 1), 5 + 6 + 8 + 9);
}

TEST(Conv2d, MatchesNaiveOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad = static_cast<int>(rng.below(2));
    const int k = 1 + 2 * static_cast<int>(rng.below(2));  // 1 or 3
    Tensor4<double> x = random_tensor(2, 3, 6, 5, rng);
    Tensor4<double> w = random_tensor(4, 3, k, k, rng);
    std::vector<double> bias(4);
    for (double& b : bias) b = rng.uniform(-1, 1);
    Tensor4<double> fast = conv2d_forward(x, w, bias, stride, pad);
    Tensor4<double> ref = naive_conv2d(x, w, bias, stride, pad);
    ASSERT_TRUE(fast.same_shape(ref));
    for (std::size_t i = 0; i < fast.data.size(); ++i)
      ASSERT_NEAR(fast.data[i], ref.data[i], 1e-12);
  }
}

TEST(Conv2d, RejectsShapeMismatch) {
  Rng rng(3);
  Tensor4<double> x = random_tensor(1, 3, 4, 4, rng);
  Tensor4<double> w = random_tensor(2, 4, 3, 3, rng);  // wrong in_ch
  EXPECT_THROW(conv2d_forward(x, w, {}, 1, 1), shape_error);
  Tensor4<double> big = random_tensor(2, 3, 9, 9, rng);  // kernel larger than input
  EXPECT_THROW(conv2d_forward(x, big, {}, 1, 0), shape_error);
}

TEST(Conv2dBackward, ZeroGradOutGivesZeroGrads) {
  Rng rng(5);
  Tensor4<double> x = random_tensor(2, 3, 5, 5, rng);
  Tensor4<double> w = random_tensor(4, 3, 3, 3, rng);
  Tensor4<double> gout(2, 4, 5, 5);
  Conv2dGrads<double> grads = conv2d_backward(x, w, gout, 1, 1);
  for (double v : grads.grad_x.data) ASSERT_EQ(v, 0.0);
  for (double v : grads.grad_weights.data) ASSERT_EQ(v, 0.0);
  for (double v : grads.grad_bias) ASSERT_EQ(v, 0.0);
}

TEST(Conv2dBackward, OneByOneGradWeightIsChannelCorrelation) {
  Rng rng(9);
  Tensor4<double> x = random_tensor(2, 3, 4, 4, rng);
  Tensor4<double> w = random_tensor(5, 3, 1, 1, rng);
  Tensor4<double> gout = random_tensor(2, 5, 4, 4, rng);
  Conv2dGrads<double> grads = conv2d_backward(x, w, gout, 1, 0);
  for (int oc = 0; oc < 5; ++oc)
    for (int ic = 0; ic < 3; ++ic) {
      double expected = 0.0;
      for (int n = 0; n < 2; ++n)
        for (int y = 0; y < 4; ++y)
          for (int xx = 0; xx < 4; ++xx) expected += gout.at(n, oc, y, xx) * x.at(n, ic, y, xx);
      ASSERT_NEAR(grads.grad_weights.at(oc, ic, 0, 0), expected, 1e-12);
    }
}

TEST(Conv2dBackward, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    EXPECT_LT(check_conv_gradients(seed), 1e-4) << "seed " << seed;
}

TEST(BatchNorm, TrainModeStandardizesChannels) {
  Rng rng(11);
  Tensor4<double> x = random_tensor(4, 3, 5, 5, rng, -3.0, 5.0);
  std::vector<double> scale(3, 1.0), shift(3, 0.0), rm(3, 0.0), rv(3, 1.0);
  Tensor4<double> y = batchnorm_forward(x, scale, shift, rm, rv, BatchNormMode::Train, 1e-5, 0.1);
  for (int c = 0; c < 3; ++c) {
    double sum = 0, sum_sq = 0;
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 25; ++i) {
        double v = y.data[y.index(n, c, 0, 0) + i];
        sum += v;
        sum_sq += v * v;
      }
    double mean = sum / 100, var = sum_sq / 100 - mean * mean;
    EXPECT_NEAR(mean, 0.0, 1e-5);
    EXPECT_NEAR(var, 1.0, 1e-4);  // eps shaves a hair off unit variance
  }
}

TEST(BatchNorm, EvalModeWithUnitStatsIsNearIdentity) {
  Rng rng(13);
  Tensor4<double> x = random_tensor(2, 3, 4, 4, rng);
  std::vector<double> scale(3, 1.0), shift(3, 0.0), rm(3, 0.0), rv(3, 1.0);
  Tensor4<double> y = batchnorm_forward(x, scale, shift, rm, rv, BatchNormMode::Eval, 1e-5, 0.1);
  for (std::size_t i = 0; i < x.data.size(); ++i) ASSERT_NEAR(y.data[i], x.data[i], 1e-5);
}

TEST(BatchNorm, UpdatesRunningStatsWithMomentum) {
  Tensor4<double> x(2, 1, 1, 2);
  x.data = {1.0, 1.0, 3.0, 3.0};  // mean 2, var 1
  std::vector<double> scale(1, 1.0), shift(1, 0.0), rm(1, 0.0), rv(1, 1.0);
  batchnorm_forward(x, scale, shift, rm, rv, BatchNormMode::Train, 1e-5, 0.1);
  EXPECT_NEAR(rm[0], 0.9 * 0.0 + 0.1 * 2.0, 1e-12);
  EXPECT_NEAR(rv[0], 0.9 * 1.0 + 0.1 * 1.0, 1e-12);
}

TEST(BatchNorm, SingletonTrainBatchRejected) {
  Tensor4<double> x(1, 2, 3, 3, 1.0);
  std::vector<double> scale(2, 1.0), shift(2, 0.0), rm(2, 0.0), rv(2, 1.0);
  EXPECT_THROW(
      batchnorm_forward(x, scale, shift, rm, rv, BatchNormMode::Train, 1e-5, 0.1),
      std::invalid_argument);
  // Eval mode has no batch requirement.
  EXPECT_NO_THROW(
      batchnorm_forward(x, scale, shift, rm, rv, BatchNormMode::Eval, 1e-5, 0.1));
}

TEST(BatchNorm, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    EXPECT_LT(check_batchnorm_gradients(seed), 1e-4) << "seed " << seed;
}

TEST(Relu, ClampsNegatives) {
  Tensor4<double> x(1, 1, 1, 2);
  x.data = {-1.0, 2.0};
  Tensor4<double> y = relu_forward(x);
  EXPECT_EQ(y.data, (std::vector<double>{0.0, 2.0}));
}

TEST(Relu, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    EXPECT_LT(check_relu_gradients(seed), 1e-4) << "seed " << seed;
}

TEST(MaxPool, PicksWindowMaxima) {
  Tensor4<double> x(1, 1, 2, 4);
  x.data = {1, 5, 2, 0, 3, 4, 1, 9};
  Tensor4<double> y = maxpool2x2_forward<double>(x, nullptr);
  ASSERT_EQ(y.h, 1);
  ASSERT_EQ(y.w, 2);
  EXPECT_EQ(y.data, (std::vector<double>{5, 9}));
  Tensor4<double> odd(1, 1, 3, 3, 0.0);
  EXPECT_THROW(maxpool2x2_forward<double>(odd, nullptr), shape_error);
}

TEST(MaxPool, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    EXPECT_LT(check_maxpool_gradients(seed), 1e-4) << "seed " << seed;
}

TEST(GlobalAvgPool, AveragesPlanes) {
  Tensor4<double> x(1, 2, 2, 2);
  x.data = {1, 2, 3, 4, 10, 20, 30, 40};
  MatrixRM<double> y = global_avgpool_forward(x);
  EXPECT_DOUBLE_EQ(y(0, 0), 2.5);
  EXPECT_DOUBLE_EQ(y(0, 1), 25.0);
}

TEST(GlobalAvgPool, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    EXPECT_LT(check_avgpool_gradients(seed), 1e-4) << "seed " << seed;
}

TEST(Linear, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    EXPECT_LT(check_linear_gradients(seed), 1e-4) << "seed " << seed;
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  MatrixRM<double> logits = MatrixRM<double>::Zero(3, 10);
  SoftmaxLoss<double> out = softmax_cross_entropy(logits, {0, 5, 9});
  EXPECT_NEAR(out.loss, 2.3025850929940459, 1e-12);  // ln 10
}

TEST(SoftmaxCrossEntropy, GradRowsSumToZero) {
  Rng rng(17);
  MatrixRM<double> logits(6, 8);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-4, 4);
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) labels.push_back(static_cast<int>(rng.below(8)));
  SoftmaxLoss<double> out = softmax_cross_entropy(logits, labels);
  for (Eigen::Index i = 0; i < 6; ++i) ASSERT_NEAR(out.grad_logits.row(i).sum(), 0.0, 1e-6);
}

TEST(SoftmaxCrossEntropy, StableUnderLargeLogits) {
  MatrixRM<double> logits(1, 3);
  logits << 1000.0, 999.0, 998.0;
  SoftmaxLoss<double> out = softmax_cross_entropy(logits, {0});
  EXPECT_TRUE(std::isfinite(out.loss));
  EXPECT_NEAR(out.loss, std::log(1 + std::exp(-1.0) + std::exp(-2.0)), 1e-12);
}

TEST(SoftmaxCrossEntropy, RejectsBadLabels) {
  MatrixRM<double> logits = MatrixRM<double>::Zero(2, 4);
  EXPECT_THROW(softmax_cross_entropy(logits, {0, 4}), std::invalid_argument);
  EXPECT_THROW(softmax_cross_entropy(logits, {-1, 0}), std::invalid_argument);
  EXPECT_THROW(softmax_cross_entropy(logits, {0}), shape_error);
}

TEST(SoftmaxCrossEntropy, FiniteDifferenceCheck) {
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    EXPECT_LT(check_softmax_gradients(seed), 1e-4) << "seed " << seed;
}

}  // namespace
}  // namespace passband
