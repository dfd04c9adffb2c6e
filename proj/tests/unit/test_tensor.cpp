#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "mainvc/tensor/adam.hpp"
#include "mainvc/tensor/ops.hpp"

using namespace mainvc;
using mainvc::testing::random_tensor;
using mainvc::testing::to_doubles;

namespace {

std::vector<double> row(const Tensor& x, std::size_t r) {
  const auto v = to_doubles(x);
  const std::size_t t = x.dim(1);
  return {v.begin() + static_cast<long>(r * t), v.begin() + static_cast<long>((r + 1) * t)};
}

double mean(const std::vector<double>& v) {
  double a = 0.0;
  for (double x : v) a += x;
  return a / static_cast<double>(v.size());
}

double pstd(const std::vector<double>& v) {
  const double m = mean(v);
  double a = 0.0;
  for (double x : v) a += (x - m) * (x - m);
  return std::sqrt(a / static_cast<double>(v.size()));
}

}  // namespace

TEST(TensorCore, ShapeAndDataAgree) {
  const auto t = Tensor::zeros({3, 4});
  EXPECT_EQ(t.numel(), 12u);
  EXPECT_EQ(t.data().size(), shape_numel(t.shape()));
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
}

TEST(TensorCore, GradientOfSquareAtThree) {
  const auto x = Tensor::scalar(3, true);
  square(x).backward();
  ASSERT_EQ(x.grad().size(), 1u);
  EXPECT_FLOAT_EQ(x.grad()[0], 6.0f);
}

TEST(TensorCore, GradientsSumOverPathsAndAccumulate) {
  const auto x = Tensor::scalar(2, true);
  add(mul(x, x), x).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 5.0f);
  add(mul(x, x), x).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 10.0f);
  auto y = x;
  y.zero_grad();
  EXPECT_FALSE(x.has_grad());
  EXPECT_TRUE(x.grad().empty());
}

TEST(TensorCore, BackwardRejectsNonScalar) {
  const auto x = Tensor::from({2}, {1, 2}, true);
  EXPECT_THROW(scale(x, 2).backward(), ShapeError);
}

TEST(TensorCore, NoGradGuardStopsRecording) {
  const auto x = Tensor::from({2}, {1, 2}, true);
  Tensor y;
  {
    NoGradGuard guard;
    y = square(x);
  }
  EXPECT_FALSE(y.requires_grad());
  EXPECT_TRUE(square(x).requires_grad());
}

TEST(TensorCore, ForwardStaysFiniteOnFiniteInput) {
  const auto x = random_tensor({4, 16}, 3, 30.0);
  for (const auto& y : {exp(clamp(x, -50, 50)), softplus(x), leaky_relu(x), logsumexp(x),
                        instance_norm(x, 1e-5f).first}) {
    for (float v : y.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Conv1d, IdentityKernel) {
  const auto x = Tensor::from({1, 5}, {1, -2, 3, 4, 0.5});
  const auto y = conv1d(x, Tensor::from({1, 1, 1}, {1}), Tensor::from({1}, {0}));
  EXPECT_EQ(to_doubles(y), to_doubles(x));
}

TEST(Conv1d, LengthFormulaExample) {
  EXPECT_EQ(conv1d_output_length(10, 3, 1, 2, 0), 6u);
  const auto y = conv1d(Tensor::zeros({1, 10}), Tensor::zeros({1, 1, 3}), Tensor::zeros({1}), 1, 2, 0);
  EXPECT_EQ(y.dim(1), 6u);
}

TEST(Conv1d, ZeroPaddedSumKernel) {
  const auto y = conv1d(Tensor::from({1, 3}, {1, 2, 3}), Tensor::from({1, 1, 3}, {1, 1, 1}),
                        Tensor::from({1}, {0}), 1, 1, 1);
  EXPECT_EQ(to_doubles(y), (std::vector<double>{3, 6, 5}));
}

TEST(Conv1d, OutputLengthGrid) {
  for (std::size_t k = 1; k <= 4; ++k) {
    for (std::size_t stride = 1; stride <= 3; ++stride) {
      for (std::size_t dil = 1; dil <= 3; ++dil) {
        for (std::size_t pad = 0; pad <= 3; ++pad) {
          for (std::size_t t = 1; t <= 12; ++t) {
            const long span = static_cast<long>(dil * (k - 1) + 1);
            if (static_cast<long>(t + 2 * pad) < span) {
              EXPECT_THROW(conv1d(Tensor::zeros({1, t}), Tensor::zeros({1, 1, k}), Tensor::zeros({1}),
                                  stride, dil, pad),
                           ShapeError);
              continue;
            }
            const std::size_t expected = (t + 2 * pad - dil * (k - 1) - 1) / stride + 1;
            EXPECT_EQ(conv1d_output_length(t, k, stride, dil, pad), expected);
            const auto y = conv1d(Tensor::zeros({1, t}), Tensor::zeros({1, 1, k}), Tensor::zeros({1}),
                                  stride, dil, pad);
            EXPECT_EQ(y.dim(1), expected);
          }
        }
      }
    }
  }
}

TEST(Conv1d, MatchesDirectSummation) {
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const std::size_t cin = 1 + rng.uniform_below(4), cout = 1 + rng.uniform_below(4);
    const std::size_t k = 1 + rng.uniform_below(3), stride = 1 + rng.uniform_below(2);
    const std::size_t dil = 1 + rng.uniform_below(3), pad = rng.uniform_below(4);
    const std::size_t t = dil * (k - 1) + 1 + rng.uniform_below(20);
    const auto x = random_tensor({cin, t}, 10 + i);
    const auto w = random_tensor({cout, cin, k}, 100 + i);
    const auto b = random_tensor({cout}, 200 + i);
    const auto y = conv1d(x, w, b, stride, dil, pad);
    const auto ref = mainvc::testing::naive_conv1d(to_doubles(x), cin, t, to_doubles(w), cout, k,
                                           to_doubles(b), stride, dil, pad);
    const auto got = to_doubles(y);
    ASSERT_EQ(got.size(), ref.size());
    for (std::size_t j = 0; j < ref.size(); ++j) EXPECT_NEAR(got[j], ref[j], 1e-4);
  }
}

TEST(Conv1d, RejectsChannelMismatch) {
  EXPECT_THROW(conv1d(Tensor::zeros({2, 8}), Tensor::zeros({1, 3, 3}), Tensor::zeros({1})), ShapeError);
}

TEST(InstanceNorm, ConstantChannelMapsToZero) {
  const auto y = instance_norm(Tensor::from({1, 4}, {5, 5, 5, 5}), 1e-5f).first;
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(InstanceNorm, TwoPointChannel) {
  const auto y = instance_norm(Tensor::from({1, 2}, {0, 2}), 1e-12f).first;
  EXPECT_NEAR(y[0], -1.0, 1e-6);
  EXPECT_NEAR(y[1], 1.0, 1e-6);
}

TEST(InstanceNorm, ZeroMeanUnitStd) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = random_tensor({6, 40}, s, 3.0);
    const auto y = instance_norm(x, 1e-5f).first;
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_LT(std::abs(mean(row(y, c))), 1e-6);
      EXPECT_NEAR(pstd(row(y, c)), 1.0, 1e-3);
    }
  }
}

TEST(InstanceNorm, InvariantToPerChannelAffine) {
  Rng rng(8);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto x = random_tensor({4, 32}, s);
    const auto xd = to_doubles(x);
    std::vector<float> v(x.data().begin(), x.data().end());
    std::vector<double> expected(xd.size());
    for (std::size_t c = 0; c < 4; ++c) {
      const double a = rng.uniform(0.2, 5.0), b = rng.uniform(-3.0, 3.0);
      for (std::size_t j = 0; j < 32; ++j) v[c * 32 + j] = static_cast<float>(a * v[c * 32 + j] + b);
      double mu = 0.0, var = 0.0;
      for (std::size_t j = 0; j < 32; ++j) mu += xd[c * 32 + j] / 32.0;
      for (std::size_t j = 0; j < 32; ++j) var += std::pow(xd[c * 32 + j] - mu, 2) / 32.0;
      // eps is divided by a^2 once the scale is pulled out
      for (std::size_t j = 0; j < 32; ++j) {
        expected[c * 32 + j] = (xd[c * 32 + j] - mu) / std::sqrt(var + 1e-5 / (a * a));
      }
    }
    const auto y1 = to_doubles(instance_norm(Tensor::from({4, 32}, v), 1e-5f).first);
    for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y1[i], expected[i], 1e-5);
  }
}

TEST(InstanceNorm, StatsHonourEpsilonFloor) {
  const auto [y, stats] = instance_norm(Tensor::from({2, 3}, {1, 1, 1, 0, 1, 2}), 1e-5f);
  EXPECT_GE(stats.std[0], std::sqrt(1e-5f) * 0.999f);
  EXPECT_NEAR(stats.mean[1], 1.0, 1e-6);
}

TEST(Adain, IdentityAffineEqualsInstanceNorm) {
  const auto x = random_tensor({3, 20}, 1);
  const auto a = adain(x, Tensor::zeros({3}), Tensor::full({3}, 1), 1e-5f);
  EXPECT_EQ(to_doubles(a), to_doubles(instance_norm(x, 1e-5f).first));
}

TEST(Adain, StandardizedInputGetsAffine) {
  const auto x = instance_norm(random_tensor({1, 64}, 2), 1e-12f).first.detach();
  const auto y = adain(x, Tensor::from({1}, {3}), Tensor::from({1}, {2}), 1e-12f);
  for (std::size_t j = 0; j < 64; ++j) EXPECT_NEAR(y[j], 2 * x[j] + 3, 1e-5);
}

TEST(Adain, ZeroScaleGivesConstant) {
  const auto y = adain(random_tensor({2, 10}, 3), Tensor::from({2}, {1.5, -2}), Tensor::zeros({2}), 1e-5f);
  for (std::size_t j = 0; j < 10; ++j) {
    EXPECT_FLOAT_EQ(y.at(0, j), 1.5f);
    EXPECT_FLOAT_EQ(y.at(1, j), -2.0f);
  }
}

TEST(Adain, ChannelStatsFollowAlphaBeta) {
  const auto x = random_tensor({5, 100}, 4, 2.0);
  const auto alpha = random_tensor({5}, 5), beta = random_tensor({5}, 6);
  const auto y = adain(x, alpha, beta, 1e-5f);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_NEAR(mean(row(y, c)), alpha[c], 1e-4);
    EXPECT_NEAR(pstd(row(y, c)), std::abs(beta[c]), 1e-4);
  }
}

TEST(Adain, RejectsWidthMismatch) {
  EXPECT_THROW(adain(Tensor::zeros({3, 4}), Tensor::zeros({2}), Tensor::zeros({2}), 1e-5f), ShapeError);
}

TEST(Ops, LogsumexpIsShiftStable) {
  const auto y = logsumexp(Tensor::from({3}, {1000, 1000, 1000}));
  EXPECT_NEAR(y.item(), 1000 + std::log(3.0), 1e-3);
}

TEST(Ops, GatherAndConcatShapes) {
  const auto x = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(to_doubles(gather_cols(x, {2, 0})), (std::vector<double>{3, 1, 6, 4}));
  EXPECT_EQ(to_doubles(gather_rows(x, {1, 1})), (std::vector<double>{4, 5, 6, 4, 5, 6}));
  EXPECT_EQ(concat({x, x}, 1).shape(), (Shape{2, 6}));
  EXPECT_THROW(gather_rows(x, {2}), ShapeError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto p = Tensor::from({3}, {1, -2, 3}, true);
  Adam opt({{"p", p}}, AdamConfig{});
  sum(scale(p, 0)).backward();
  opt.step();
  EXPECT_EQ(to_doubles(p), (std::vector<double>{1, -2, 3}));
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  auto p = Tensor::from({3}, {1, -2, 3}, true);
  Adam opt({{"p", p}}, AdamConfig{1e-2, 0.9, 0.99, 1e-12});
  sum(mul(p, Tensor::from({3}, {4, -0.5, 1e-3}))).backward();
  opt.step();
  EXPECT_NEAR(p[0], 1 - 1e-2, 1e-6);
  EXPECT_NEAR(p[1], -2 + 1e-2, 1e-6);
  EXPECT_NEAR(p[2], 3 - 1e-2, 1e-5);
}

TEST(Adam, OddSymmetry) {
  Rng rng(9);
  std::vector<float> p(8), g(8);
  for (auto& v : p) v = static_cast<float>(rng.normal());
  std::vector<float> p_neg(8);
  AdamMoments m1{std::vector<float>(8, 0.0f), std::vector<float>(8, 0.0f)};
  AdamMoments m2 = m1;
  AdamConfig cfg{1e-3, 0.9, 0.99, 1e-6};
  for (int step = 1; step <= 5; ++step) {
    for (auto& v : g) v = static_cast<float>(rng.normal());
    std::vector<float> g_neg(8);
    for (std::size_t i = 0; i < 8; ++i) g_neg[i] = -g[i];
    if (step == 1) {
      for (std::size_t i = 0; i < 8; ++i) p_neg[i] = -p[i];
    }
    adam_update(p, g, m1, cfg, static_cast<std::uint64_t>(step));
    adam_update(p_neg, g_neg, m2, cfg, static_cast<std::uint64_t>(step));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(p_neg[i], -p[i]);
  }
}

TEST(Adam, DeterministicAcrossRuns) {
  const auto run = [] {
    auto p = random_tensor({16}, 3, 1.0, true);
    Adam opt({{"p", p}}, AdamConfig{});
    for (int i = 0; i < 10; ++i) {
      opt.zero_grad();
      sum(square(sub(p, random_tensor({16}, 50 + i)))).backward();
      opt.step();
    }
    return to_doubles(p);
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, MomentsStayNonNegative) {
  auto p = random_tensor({16}, 3, 1.0, true);
  Adam opt({{"p", p}}, AdamConfig{});
  for (int i = 0; i < 5; ++i) {
    opt.zero_grad();
    sum(mul(p, random_tensor({16}, 70 + i))).backward();
    opt.step();
  }
  EXPECT_EQ(opt.steps(), 5u);
  ASSERT_EQ(opt.moments()[0].v.size(), 16u);
  for (float v : opt.moments()[0].v) EXPECT_GE(v, 0.0f);
}
