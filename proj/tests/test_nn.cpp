#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "leasch/nn.hpp"
#include "oracles.hpp"

using namespace leasch;
using nn::Matrix;
using nn::Vector;

TEST(Init, ShapesFollowLayerSizes) {
  const auto p = nn::init_params({8, 128, 128, 4}, 7);
  ASSERT_EQ(p.layers(), 3u);
  EXPECT_EQ(p.weights[0].rows(), 128);
  EXPECT_EQ(p.weights[0].cols(), 8);
  EXPECT_EQ(p.weights[1].rows(), 128);
  EXPECT_EQ(p.weights[1].cols(), 128);
  EXPECT_EQ(p.weights[2].rows(), 4);
  EXPECT_EQ(p.weights[2].cols(), 128);
  EXPECT_EQ(p.biases[2].size(), 4);
}

TEST(Init, SameSeedGivesIdenticalParameters) {
  const auto a = nn::init_params({8, 128, 128, 4}, 7);
  const auto b = nn::init_params({8, 128, 128, 4}, 7);
  for (std::size_t k = 0; k < a.layers(); ++k) {
    EXPECT_EQ(a.weights[k], b.weights[k]);
    EXPECT_EQ(a.biases[k], b.biases[k]);
  }
  const auto c = nn::init_params({8, 128, 128, 4}, 8);
  EXPECT_NE(a.weights[0], c.weights[0]);
}

TEST(Init, ZeroWidthLayerIsRejected) {
  EXPECT_THROW(nn::init_params({8, 0, 4}, 1), ConfigError);
  EXPECT_THROW(nn::init_params({8}, 1), ConfigError);
}

TEST(Init, HeScaleOnWideLayer) {
  const auto p = nn::init_params({256, 512}, 3);
  const double var = p.weights[0].array().square().mean();
  EXPECT_NEAR(var, 2.0 / 256, 0.05 * 2.0 / 256);
  EXPECT_TRUE(p.biases[0].isZero());
}

TEST(Forward, ZeroNetworkGivesZeros) {
  const auto p = nn::zero_params({3, 5, 2});
  const std::vector<double> x{1.5, -2.0, 7.0};
  EXPECT_TRUE(nn::forward(p, x).isZero());
}

TEST(Forward, OutputLayerIsLinear) {
  auto p = nn::zero_params({2, 1});
  p.weights[0] << 1.0, -1.0;
  p.biases[0] << 0.5;
  const std::vector<double> x{2.0, 3.0};
  EXPECT_DOUBLE_EQ(nn::forward(p, x)(0), -0.5);
}

TEST(Forward, MatchesLoopOracleAndIsPure) {
  const auto p = nn::init_params({6, 9, 7, 3}, 11);
  Rng rng = make_rng(5, Stream::agent);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(6);
    for (auto& v : x) v = 2 * uniform01(rng) - 1;
    const auto q1 = nn::forward(p, x);
    const auto q2 = nn::forward(p, x);
    EXPECT_EQ(q1, q2);
    const auto ref = oracle::forward(p, x);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(q1(i), ref[static_cast<std::size_t>(i)], 1e-12);
  }
}

TEST(Forward, BatchColumnsMatchSingleForward) {
  const auto p = nn::init_params({4, 8, 2}, 2);
  Matrix x = Matrix::Random(4, 5);
  const Matrix q = nn::forward_batch(p, x);
  for (int j = 0; j < 5; ++j) {
    const std::vector<double> col(x.col(j).data(), x.col(j).data() + 4);
    EXPECT_TRUE(q.col(j).isApprox(nn::forward(p, col), 1e-12));
  }
}

TEST(Forward, WrongInputLengthThrows) {
  const auto p = nn::init_params({4, 2}, 1);
  const std::vector<double> x{1, 2, 3};
  EXPECT_THROW(nn::forward(p, x), DimensionError);
}

TEST(TdGradients, ZeroAtTarget) {
  const auto p = nn::init_params({3, 4, 2}, 9);
  const std::vector<double> s{0.2, -0.4, 0.9};
  const double q = nn::forward(p, s)(1);
  const auto r = nn::td_gradients(p, s, 1, q);
  EXPECT_DOUBLE_EQ(r.loss, 0.0);
  EXPECT_DOUBLE_EQ(r.grads.squared_norm(), 0.0);
}

TEST(TdGradients, ScalarHandDerivative) {
  auto p = nn::zero_params({1, 1});
  p.weights[0] << 2.0;
  const std::vector<double> s{1.0};
  const auto r = nn::td_gradients(p, s, 0, 1.0);
  EXPECT_DOUBLE_EQ(r.loss, 1.0);
  EXPECT_DOUBLE_EQ(r.grads.weights[0](0, 0), 2.0);
  EXPECT_DOUBLE_EQ(r.grads.biases[0](0), 2.0);
}

TEST(TdGradients, MatchCentralFiniteDifferences) {
  Rng rng = make_rng(2024, Stream::agent);
  for (int net = 0; net < 20; ++net) {
    std::vector<int> dims{uniform_int(rng, 1, 8)};
    const int hidden = uniform_int(rng, 0, 2);
    for (int h = 0; h < hidden; ++h) dims.push_back(uniform_int(rng, 1, 8));
    dims.push_back(uniform_int(rng, 1, 8));
    auto p = nn::init_params(dims, static_cast<std::uint64_t>(net) + 100);
    for (auto& b : p.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.3 * (2 * uniform01(rng) - 1);
    }
    std::vector<double> s(static_cast<std::size_t>(dims.front()));
    for (auto& v : s) v = 2 * uniform01(rng) - 1;
    const int a = uniform_int(rng, 0, dims.back() - 1);
    const double y = 2 * uniform01(rng) - 1;
    const auto analytic = nn::td_gradients(p, s, a, y).grads;
    const auto fd = oracle::finite_difference(p, s, a, y);
    for (std::size_t k = 0; k < p.layers(); ++k) {
      for (Eigen::Index i = 0; i < fd.weights[k].size(); ++i) {
        EXPECT_LT(oracle::rel_error(analytic.weights[k].data()[i], fd.weights[k].data()[i]), 1e-4);
      }
      for (Eigen::Index i = 0; i < fd.biases[k].size(); ++i) {
        EXPECT_LT(oracle::rel_error(analytic.biases[k](i), fd.biases[k](i)), 1e-4);
      }
    }
  }
}

TEST(TdGradients, BatchIsMeanOfSingles) {
  const auto p = nn::init_params({3, 6, 2}, 4);
  Matrix states = Matrix::Random(3, 4);
  const std::vector<int> actions{0, 1, 1, 0};
  const std::vector<double> targets{0.5, -0.2, 1.0, 0.0};
  const auto batch = nn::batch_td_gradients(p, states, actions, targets);
  double loss = 0;
  auto sum = nn::Gradients::zeros_like(p);
  for (int j = 0; j < 4; ++j) {
    const std::vector<double> s(states.col(j).data(), states.col(j).data() + 3);
    const auto one = nn::td_gradients(p, s, actions[static_cast<std::size_t>(j)], targets[static_cast<std::size_t>(j)]);
    loss += one.loss / 4;
    for (std::size_t k = 0; k < p.layers(); ++k) {
      sum.weights[k] += one.grads.weights[k] / 4;
      sum.biases[k] += one.grads.biases[k] / 4;
    }
  }
  EXPECT_NEAR(batch.loss, loss, 1e-12);
  for (std::size_t k = 0; k < p.layers(); ++k) {
    EXPECT_TRUE(batch.grads.weights[k].isApprox(sum.weights[k], 1e-10));
    EXPECT_TRUE(batch.grads.biases[k].isApprox(sum.biases[k], 1e-10));
  }
}

TEST(TdGradients, ActionOutOfRangeThrows) {
  const auto p = nn::init_params({2, 3}, 1);
  const std::vector<double> s{0, 0};
  EXPECT_THROW(nn::td_gradients(p, s, 3, 0.0), IndexError);
  EXPECT_THROW(nn::td_gradients(p, s, -1, 0.0), IndexError);
}

namespace {
nn::Gradients scalar_pair(double a, double b) {
  nn::Gradients g;
  g.weights.push_back(Matrix(1, 2));
  g.weights[0] << a, b;
  g.biases.push_back(Vector::Zero(1));
  return g;
}
}  // namespace

TEST(Clip, BelowThresholdUnchanged) {
  const auto g = nn::clip_gradients(scalar_pair(0.3, 0.4), 1.0);
  EXPECT_DOUBLE_EQ(g.weights[0](0, 0), 0.3);
  EXPECT_DOUBLE_EQ(g.weights[0](0, 1), 0.4);
}

TEST(Clip, RescalesToThreshold) {
  const auto g = nn::clip_gradients(scalar_pair(3.0, 4.0), 1.0);
  EXPECT_NEAR(g.weights[0](0, 0), 0.6, 1e-15);
  EXPECT_NEAR(g.weights[0](0, 1), 0.8, 1e-15);
}

TEST(Clip, ZerosStayZero) {
  const auto g = nn::clip_gradients(scalar_pair(0.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(g.squared_norm(), 0.0);
}

TEST(Clip, NormIsGlobalAcrossLayers) {
  auto g = scalar_pair(3.0, 0.0);
  g.biases[0] << 4.0;
  const auto c = nn::clip_gradients(g, 1.0);
  EXPECT_NEAR(std::sqrt(c.squared_norm()), 1.0, 1e-15);
  EXPECT_NEAR(c.biases[0](0), 0.8, 1e-15);
}

TEST(Adam, ZeroGradientKeepsParameters) {
  auto p = nn::init_params({3, 2}, 1);
  const auto before = p;
  auto opt = nn::AdamState::for_params(p);
  opt.m.weights[0].setConstant(1.0);
  nn::adam_step(p, nn::Gradients::zeros_like(p), opt, 1e-4);
  EXPECT_TRUE(opt.m.weights[0].isApprox(Matrix::Constant(2, 3, 0.9)));
  // m is non-zero here, so the parameters move; with fresh moments they must not.
  auto q = before;
  auto fresh = nn::AdamState::for_params(q);
  nn::adam_step(q, nn::Gradients::zeros_like(q), fresh, 1e-4);
  EXPECT_EQ(q.weights[0], before.weights[0]);
  EXPECT_EQ(fresh.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = nn::zero_params({1, 1});
  auto opt = nn::AdamState::for_params(p);
  auto g = nn::Gradients::zeros_like(p);
  g.weights[0](0, 0) = 1.0;
  nn::adam_step(p, g, opt, 1e-4);
  // m_hat = 1, v_hat = 1: step = lr / (1 + eps)
  EXPECT_NEAR(p.weights[0](0, 0), -1e-4 / (1.0 + 1e-8), 1e-18);
}

TEST(Adam, Deterministic) {
  auto p1 = nn::init_params({3, 4, 2}, 5), p2 = p1;
  auto o1 = nn::AdamState::for_params(p1), o2 = o1;
  const std::vector<double> s{0.1, 0.2, 0.3};
  const auto g = nn::td_gradients(p1, s, 0, 1.0).grads;
  nn::adam_step(p1, g, o1, 1e-3);
  nn::adam_step(p2, g, o2, 1e-3);
  EXPECT_EQ(p1.weights[0], p2.weights[0]);
  EXPECT_EQ(p1.biases[1], p2.biases[1]);
}

TEST(Adam, NanGradientRefusedWithoutSideEffects) {
  auto p = nn::init_params({2, 2}, 1);
  const auto before = p;
  auto opt = nn::AdamState::for_params(p);
  auto g = nn::Gradients::zeros_like(p);
  g.weights[0](0, 0) = std::nan("");
  EXPECT_THROW(nn::adam_step(p, g, opt, 1e-4), NumericError);
  EXPECT_EQ(p.weights[0], before.weights[0]);
  EXPECT_EQ(opt.step, 0u);
}

TEST(SoftUpdate, Cases) {
  auto online = nn::zero_params({1, 1});
  online.weights[0] << 1.0;
  const auto target = nn::zero_params({1, 1});
  EXPECT_DOUBLE_EQ(nn::soft_update(online, target, 1e-3).weights[0](0, 0), 1e-3);
  EXPECT_DOUBLE_EQ(nn::soft_update(online, target, 1.0).weights[0](0, 0), 1.0);
  EXPECT_DOUBLE_EQ(nn::soft_update(online, online, 0.3).weights[0](0, 0), 1.0);
  EXPECT_THROW(nn::soft_update(online, nn::zero_params({1, 2}), 0.5), DimensionError);
}

TEST(Argmax, LowestIndexOnTies) {
  Vector q(4);
  q << 0.1, 0.9, 0.9, 0.2;
  EXPECT_EQ(nn::argmax(q), 1);
}

TEST(Persistence, RoundTripIsExact) {
  const auto p = nn::init_params({8, 16, 4}, 77);
  const auto path = (std::filesystem::temp_directory_path() / "leasch_nn_roundtrip.json").string();
  nn::save_params(p, path);
  const auto q = nn::load_params(path);
  ASSERT_EQ(q.dims, p.dims);
  for (std::size_t k = 0; k < p.layers(); ++k) {
    EXPECT_EQ(q.weights[k], p.weights[k]);
    EXPECT_EQ(q.biases[k], p.biases[k]);
  }
  std::filesystem::remove(path);
}

TEST(Persistence, ShapeMismatchRejected) {
  auto j = nn::to_json(nn::init_params({2, 3}, 1));
  j["layer_dims"] = {2, 4};
  EXPECT_THROW(nn::params_from_json(j), ValidationError);
}
