/* Copyright 2026 The PotQ Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "potq/errors.h"
#include "potq/model.h"
#include "potq/ops.h"
#include "potq/qat.h"
#include "potq/sgd.h"
#include "potq/tensor.h"
#include "grad_check.h"
#include "test_util.h"

namespace potq {
namespace {

using testing::random_tensor;

using testing::away_from_zero;
using testing::distinct_values;
using testing::grad_check;
using testing::kGradTolerance;

std::vector<float> naive_linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t n = x.dim(0), in = x.dim(1), out = w.dim(0);
  std::vector<float> y(n * out);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t k = 0; k < in; ++k) {
        acc += static_cast<double>(x.data()[i * in + k]) * w.data()[o * in + k];
      }
      y[i * out + o] = static_cast<float>(acc + b.data()[o]);
    }
  }
  return y;
}

std::vector<float> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                              std::size_t pad) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t f = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  std::vector<float> y(n * f * oh * ow);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t o = 0; o < f; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t u = 0; u < k; ++u)
              for (std::size_t v = 0; v < k; ++v) {
                const long yy = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long xx = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(wd)) continue;
                acc += static_cast<double>(x.data()[((s * c + ch) * h + yy) * wd + xx]) *
                       w.data()[((o * c + ch) * k + u) * k + v];
              }
          y[((s * f + o) * oh + i) * ow + j] = static_cast<float>(acc + (b.defined() ? b.data()[o] : 0.0f));
        }
  return y;
}

void expect_close(std::span<const float> got, const std::vector<float>& want, double rel) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(got[i], want[i], rel * std::max(1.0, std::fabs(static_cast<double>(want[i])))) << i;
  }
}

TEST(Tensor, ShapeAndDataMustAgree) {
  EXPECT_THROW(Tensor::from_data({2, 3}, std::vector<float>(5)), DimensionError);
  EXPECT_THROW(Tensor::zeros({2, 0}), DimensionError);
  const Tensor t = Tensor::full({2, 3}, 1.5f);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(shape_to_string(t.shape()), "[2,3]");
  EXPECT_THROW(t.item(), DimensionError);
}

TEST(Tensor, GradBufferMatchesShape) {
  Tensor t = Tensor::zeros({3, 2}, true);
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(t.mutable_grad().size(), 6u);
  EXPECT_TRUE(t.has_grad());
}

TEST(Tensor, CloneDoesNotAlias) {
  Tensor a = Tensor::full({2}, 1.0f);
  Tensor b = a.clone();
  b.mutable_data()[0] = 5.0f;
  EXPECT_EQ(a.data()[0], 1.0f);
}

TEST(Linear, IdentityWeight) {
  const Tensor y = linear(Tensor::from_data({1, 2}, {1, 2}), Tensor::from_data({2, 2}, {1, 0, 0, 1}),
                          Tensor::from_data({2}, {0, 0}));
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{1, 2}));
}

TEST(Linear, HandArithmetic) {
  const Tensor y = linear(Tensor::from_data({1, 2}, {1, 1}), Tensor::from_data({1, 2}, {2, 3}),
                          Tensor::from_data({1}, {1}));
  EXPECT_EQ(y.item(), 6.0f);
}

TEST(Linear, MatchesTripleLoop) {
  const Tensor x = random_tensor({3, 4}, 1), w = random_tensor({5, 4}, 2), b = random_tensor({5}, 3);
  expect_close(linear(x, w, b).data(), naive_linear(x, w, b), 0.0);
}

TEST(Linear, ShapeMismatch) {
  EXPECT_THROW(linear(random_tensor({3, 4}, 1), random_tensor({5, 3}, 2), Tensor()), DimensionError);
  EXPECT_THROW(linear(random_tensor({3, 4}, 1), random_tensor({5, 4}, 2), random_tensor({4}, 3)),
               DimensionError);
}

TEST(Conv2d, OnesKernelSumsWindow) {
  const Tensor y = conv2d(Tensor::full({1, 1, 3, 3}, 1.0f), Tensor::full({1, 1, 3, 3}, 1.0f), Tensor(),
                          {1, 0});
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 9.0f);
}

TEST(Conv2d, DeltaKernelIsIdentity) {
  const Tensor x = random_tensor({1, 1, 5, 5}, 4);
  std::vector<float> k(9, 0.0f);
  k[4] = 1.0f;
  const Tensor y = conv2d(x, Tensor::from_data({1, 1, 3, 3}, k), Tensor(), {1, 1});
  EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()),
            std::vector<float>(x.data().begin(), x.data().end()));
}

TEST(Conv2d, MatchesNaiveLoops) {
  const Tensor x = random_tensor({2, 3, 8, 8}, 5), w = random_tensor({4, 3, 3, 3}, 6),
               b = random_tensor({4}, 7);
  for (std::size_t stride : {1, 2}) {
    for (std::size_t pad : {0, 1, 2}) {
      expect_close(conv2d(x, w, b, {stride, pad}).data(), naive_conv(x, w, b, stride, pad), 1e-5);
    }
  }
}

TEST(Conv2d, OutputExtent) {
  EXPECT_EQ(conv_output_extent(8, 3, {1, 1}), 8u);
  EXPECT_EQ(conv_output_extent(8, 3, {2, 0}), 3u);
  EXPECT_THROW(conv_output_extent(2, 5, {1, 1}), DimensionError);
  EXPECT_THROW(conv2d(random_tensor({1, 1, 2, 2}, 1), random_tensor({1, 1, 5, 5}, 2), Tensor(), {1, 0}),
               DimensionError);
  EXPECT_THROW(conv2d(random_tensor({1, 2, 4, 4}, 1), random_tensor({1, 3, 3, 3}, 2), Tensor(), {1, 0}),
               DimensionError);
}

TEST(Relu, Values) {
  const Tensor y = relu(Tensor::from_data({2}, {-1, 2}));
  EXPECT_EQ(y.data()[0], 0.0f);
  EXPECT_EQ(y.data()[1], 2.0f);
}

TEST(MaxPool, PicksWindowMaximum) {
  const Tensor x = Tensor::from_data({1, 1, 2, 4}, {1, 5, 2, 0, 3, 4, 8, 7});
  const Tensor y = max_pool2d(x, 2);
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 2}));
  EXPECT_EQ(y.data()[0], 5.0f);
  EXPECT_EQ(y.data()[1], 8.0f);
}

TEST(CrossEntropy, UniformLogitsGiveLogK) {
  for (std::size_t k : {2, 5, 10}) {
    const std::vector<int> labels{0, static_cast<int>(k) - 1};
    const Tensor l = cross_entropy(Tensor::zeros({2, k}), labels);
    EXPECT_NEAR(l.item(), std::log(static_cast<double>(k)), 1e-6);
  }
}

TEST(CrossEntropy, LabelOutOfRange) {
  const std::vector<int> bad{3};
  EXPECT_THROW(cross_entropy(Tensor::zeros({1, 3}), bad), InputError);
  const std::vector<int> neg{-1};
  EXPECT_THROW(cross_entropy(Tensor::zeros({1, 3}), neg), InputError);
  const std::vector<int> two{0, 1};
  EXPECT_THROW(cross_entropy(Tensor::zeros({1, 3}), two), DimensionError);
}

TEST(FoldScale, GainTimesScaleFactor) { EXPECT_EQ(fold_scale(2.0, 0.5), 1.0); }

TEST(Backward, SquareAtThree) {
  Tensor x = Tensor::scalar(3.0f, true);
  Tensor y = sum(mul(x, x));
  y.backward();
  EXPECT_EQ(x.grad()[0], 6.0f);
}

TEST(Backward, ConstantLossGivesZeroGradient) {
  Tensor x = random_tensor({4}, 1, true);
  Tensor loss = sum(mul(x, Tensor::zeros({4})));
  loss.backward();
  for (float g : x.grad()) EXPECT_EQ(g, 0.0f);
}

TEST(Backward, SharedSubexpressionAccumulates) {
  Tensor x = Tensor::scalar(2.0f, true);
  Tensor y = mul(x, x);
  Tensor loss = sum(mul(y, y));  // x^4
  loss.backward();
  EXPECT_EQ(x.grad()[0], 32.0f);
}

TEST(Backward, TwiceIsStateError) {
  Tensor x = random_tensor({3}, 1, true);
  Tensor loss = sum(x);
  loss.backward();
  EXPECT_THROW(loss.backward(), StateError);
}

TEST(Backward, NonScalarIsInputError) {
  Tensor x = random_tensor({3}, 1, true);
  Tensor y = relu(x);
  EXPECT_THROW(y.backward(), InputError);
}

TEST(GradCheck, Linear) {
  EXPECT_LT(grad_check({random_tensor({3, 4}, 1, true), random_tensor({5, 4}, 2, true),
                        random_tensor({5}, 3, true)},
                       [](const auto& t) { return linear(t[0], t[1], t[2]); }),
            kGradTolerance);
}

TEST(GradCheck, Conv2d) {
  for (Conv2dGeometry g : {Conv2dGeometry{1, 1}, Conv2dGeometry{2, 0}, Conv2dGeometry{1, 2}}) {
    EXPECT_LT(grad_check({random_tensor({2, 3, 5, 5}, 4, true), random_tensor({4, 3, 3, 3}, 5, true),
                          random_tensor({4}, 6, true)},
                         [g](const auto& t) { return conv2d(t[0], t[1], t[2], g); }),
              kGradTolerance);
  }
}

TEST(GradCheck, Relu) {
  EXPECT_LT(grad_check({away_from_zero({4, 6}, 7)}, [](const auto& t) { return relu(t[0]); }),
            kGradTolerance);
}

TEST(GradCheck, MaxPool) {
  EXPECT_LT(grad_check({distinct_values({2, 3, 4, 4}, 8)},
                       [](const auto& t) { return max_pool2d(t[0], 2); }),
            kGradTolerance);
}

TEST(GradCheck, Flatten) {
  EXPECT_LT(grad_check({random_tensor({2, 3, 2, 2}, 9, true)}, [](const auto& t) { return flatten(t[0]); }),
            kGradTolerance);
}

TEST(GradCheck, ChannelScale) {
  EXPECT_LT(grad_check({random_tensor({2, 3, 4, 4}, 10, true), random_tensor({3}, 11, true)},
                       [](const auto& t) { return channel_scale(t[0], t[1]); }),
            kGradTolerance);
}

TEST(GradCheck, MulAndSum) {
  EXPECT_LT(grad_check({random_tensor({3, 5}, 12, true), random_tensor({3, 5}, 13, true)},
                       [](const auto& t) { return mul(t[0], t[1]); }),
            kGradTolerance);
  EXPECT_LT(grad_check({random_tensor({7}, 14, true)}, [](const auto& t) { return sum(t[0]); }),
            kGradTolerance);
}

TEST(GradCheck, CrossEntropy) {
  const std::vector<int> labels{0, 3, 2, 1};
  EXPECT_LT(grad_check({random_tensor({4, 5}, 15, true, -2.0f, 2.0f)},
                       [&](const auto& t) { return cross_entropy(t[0], labels); }),
            kGradTolerance);
}

TEST(GradCheck, RandomizedShapes) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = dim(rng), c = dim(rng), f = dim(rng), h = dim(rng) + 2;
    const std::uint64_t s = 100 + trial;
    EXPECT_LT(grad_check({random_tensor({n, c, h, h}, s, true), random_tensor({f, c, 3, 3}, s + 1, true),
                          random_tensor({f}, s + 2, true)},
                         [](const auto& t) { return conv2d(t[0], t[1], t[2], {1, 1}); }),
              kGradTolerance);
    EXPECT_LT(grad_check({random_tensor({n, c * h}, s + 3, true), random_tensor({f, c * h}, s + 4, true),
                          random_tensor({f}, s + 5, true)},
                         [](const auto& t) { return linear(t[0], t[1], t[2]); }),
              kGradTolerance);
  }
}

TEST(Sgd, StepScheduleMultipliesFromItsEpoch) {
  SgdConfig c;
  c.base_lr = 0.001;
  c.lr_schedule = {{5, 0.1}};
  EXPECT_DOUBLE_EQ(learning_rate(c, 4), 0.001);
  EXPECT_DOUBLE_EQ(learning_rate(c, 5), 0.0001);
  const SgdConfig defaults;
  EXPECT_EQ(defaults.epochs, 15);
  EXPECT_DOUBLE_EQ(defaults.base_lr, 0.001);
  EXPECT_NEAR(learning_rate(defaults, 10), 0.00001, 1e-18);
  EXPECT_NEAR(learning_rate(defaults, 14), 0.00001, 1e-18);
}

TEST(Sgd, PlainStep) {
  std::vector<Tensor> p{Tensor::scalar(1.0f, true)};
  p[0].mutable_grad()[0] = 2.0f;
  Sgd(0.0).step(p, 0.1);
  EXPECT_FLOAT_EQ(p[0].item(), 0.8f);
}

TEST(Sgd, ZeroGradLeavesWeights) {
  std::vector<Tensor> p{random_tensor({4}, 1, true)};
  const std::vector<float> before(p[0].data().begin(), p[0].data().end());
  p[0].mutable_grad();
  Sgd sgd(0.9);
  sgd.step(p, 0.1);
  sgd.step(p, 0.1);
  EXPECT_EQ(std::vector<float>(p[0].data().begin(), p[0].data().end()), before);
}

TEST(Sgd, MomentumAccumulates) {
  std::vector<Tensor> p{Tensor::scalar(0.0f, true)};
  Sgd sgd(0.5);
  p[0].mutable_grad()[0] = 1.0f;
  sgd.step(p, 1.0);  // v = 1
  sgd.step(p, 1.0);  // v = 1.5
  EXPECT_FLOAT_EQ(p[0].item(), -2.5f);
}

TEST(Sgd, RejectsBadConfig) {
  SgdConfig c;
  c.lr_schedule = {{5, 0.1}, {5, 0.1}};
  EXPECT_THROW(c.validate(), ConfigError);
  c = SgdConfig{};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, ArchitectureRoundTrip) {
  const auto layers = parse_architecture("conv3x3:16,relu,conv3x3:32/s2/p0,relu,maxpool2,gain,fc:10");
  EXPECT_EQ(layers.size(), 8u);  // flatten inserted before fc
  EXPECT_EQ(layers[6].kind, LayerKind::kFlatten);
  EXPECT_EQ(parse_architecture(format_architecture(layers)), layers);
  EXPECT_THROW(parse_architecture("conv3x3:16,bogus,fc:10"), ConfigError);
  EXPECT_EQ(format_input_shape(parse_input_shape("1x8x8")), "1x8x8");
}

TEST(Model, ResolvesWeightShapes) {
  const auto info = resolve_weight_layers(
      parse_architecture("conv3x3:16,relu,conv3x3:32,relu,maxpool2,fc:10"), {1, 8, 8});
  ASSERT_EQ(info.size(), 3u);
  EXPECT_EQ(info[0].name, "conv1");
  EXPECT_EQ(info[1].weight_shape, (Shape{32, 16, 3, 3}));
  EXPECT_EQ(info[2].name, "fc1");
  EXPECT_EQ(info[2].weight_shape, (Shape{10, 32 * 4 * 4}));
  EXPECT_THROW(resolve_weight_layers(parse_architecture("conv3x3:4,relu"), {1, 8, 8}), DimensionError);
}

TEST(Model, KaimingInitIsSeededAndBounded) {
  const auto layers = parse_architecture("conv3x3:4,relu,fc:3");
  const Model a(layers, {1, 4, 4}, 7), b(layers, {1, 4, 4}, 7), c(layers, {1, 4, 4}, 8);
  EXPECT_TRUE(std::equal(a.weights()[0].data().begin(), a.weights()[0].data().end(),
                         b.weights()[0].data().begin()));
  EXPECT_FALSE(std::equal(a.weights()[0].data().begin(), a.weights()[0].data().end(),
                          c.weights()[0].data().begin()));
  for (std::size_t i = 0; i < a.weights().size(); ++i) {
    const double bound = std::sqrt(6.0 / static_cast<double>(a.weight_layers()[i].fan_in));
    for (float w : a.weights()[i].data()) EXPECT_LE(std::fabs(w), bound);
    for (float v : a.biases()[i].data()) EXPECT_EQ(v, 0.0f);
  }
}

TEST(Model, ForwardShapeAndInputCheck) {
  const Model m(parse_architecture("conv3x3:4,relu,maxpool2,gain,fc:3"), {1, 4, 4}, 1);
  EXPECT_EQ(m.forward(random_tensor({5, 1, 4, 4}, 1)).shape(), (Shape{5, 3}));
  EXPECT_THROW(m.forward(random_tensor({5, 2, 4, 4}, 1)), DimensionError);
}

TEST(Model, TrainingIsDeterministic) {
  BlobsConfig bc;
  bc.classes = 3;
  bc.samples_per_class = 20;
  bc.shape = {1, 4, 4};
  const Dataset train = make_gaussian_blobs(bc);
  SgdConfig s;
  s.base_lr = 0.05;
  s.epochs = 2;
  const auto layers = parse_architecture("conv3x3:4,relu,fc:3");
  const TrainResult a = train_float(Model(layers, {1, 4, 4}, 3), s, 8, train, train);
  const TrainResult b = train_float(Model(layers, {1, 4, 4}, 3), s, 8, train, train);
  for (std::size_t i = 0; i < a.final_weights.weights().size(); ++i) {
    const auto wa = a.final_weights.weights()[i].data(), wb = b.final_weights.weights()[i].data();
    EXPECT_TRUE(std::equal(wa.begin(), wa.end(), wb.begin()));
  }
  EXPECT_EQ(a.history.back().val_loss, b.history.back().val_loss);
}

}  // namespace
}  // namespace potq
