#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "spdebridge/bridge.hpp"
#include "spdebridge/errors.hpp"

using namespace spdebridge;

namespace {
SpectralModel white(std::size_t J, double eps = 1.0) {
  return build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(eps), J, 1.0);
}

BridgeTarget some_target(std::size_t J) {
  BridgeTarget t = BridgeTarget::zero(J);
  for (std::size_t j = 0; j < J; ++j) {
    t.x[j] = std::cos(1.3 * j);
    t.y[j] = 0.1 * std::sin(0.4 * j + 1);
  }
  return t;
}
}  // namespace

TEST(Gain, ClosedFormOneMode) {
  const SpectralModel m = white(1, 0.5);
  const double lam = std::numbers::pi * std::numbers::pi;
  const double t = 0.25;
  const double q = [&](double s) { return (1 - std::exp(-2 * lam * s)) / (2 * lam); }(t);
  const double qT = (1 - std::exp(-2 * lam)) / (2 * lam);
  EXPECT_NEAR(gain(0, t, m), q * std::exp(-lam * 0.75) / (qT + 0.5), 1e-16);
  EXPECT_EQ(gain(0, 0.0, m), 0.0);
}

TEST(Gain, ExactObservationEndsAtOne) {
  const SpectralModel m = white(4).without_observation_noise();
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(gain(j, 1.0, m), 1.0, 1e-15);
}

TEST(Gain, IndependentOfEta) {
  const SpectralModel m = white(6);
  for (double eta : {0.0, -0.5001, -2.0, 3.0})
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(gain(j, 0.4, m), gain(j, 0.4, m.with_eta(eta)));
}

TEST(Gain, DeadModeThrows) {
  const SpectralModel m({1.0, 2.0}, {1.0, 0.0}, {0.0, 0.0}, 1.0, 0.0);
  EXPECT_NO_THROW(gain(0, 0.5, m));
  EXPECT_THROW(gain(1, 0.5, m), NumericalError);
}

TEST(Gain, UnobservedModeWithNoiseIsZero) {
  // mu = 0 but mu_tilde > 0: the observation carries no information about the mode.
  const SpectralModel m({1.0, 2.0}, {1.0, 0.0}, {1.0, 1.0}, 1.0, 0.0);
  EXPECT_EQ(gain(1, 0.5, m), 0.0);
}

TEST(BridgeCov, KernelIsPsdAndVanishesAtPinnedEnd) {
  const SpectralModel m = white(5).without_observation_noise();
  const TimeGrid g = TimeGrid::uniform(1.0, 11);
  for (std::size_t j = 0; j < 5; ++j) {
    Eigen::MatrixXd C(11, 11);
    for (int a = 0; a < 11; ++a)
      for (int b = 0; b < 11; ++b) C(a, b) = bridge_cov_mode(j, g[a], g[b], m);
    EXPECT_LT((C - C.transpose()).norm(), 1e-18);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    EXPECT_GT(es.eigenvalues().minCoeff(), -1e-16);
    EXPECT_NEAR(C(10, 10), 0.0, 1e-16);
  }
}

TEST(BridgeCov, NoisyObservationLeavesTerminalSpread) {
  const SpectralModel m = white(3, 0.1);
  for (std::size_t j = 0; j < 3; ++j) {
    const double v = bridge_cov_mode(j, 1.0, 1.0, m);
    const double q = q_mode(j, 1.0, m);
    EXPECT_NEAR(v, q * 0.1 / (q + 0.1), 1e-15);
  }
}

TEST(SampleBridge, TerminalPinning) {
  const SpectralModel m = white(16).without_observation_noise();
  const BridgeTarget t = some_target(16);
  const auto e = sample_bridge(m, t, TimeGrid::uniform(1.0, 17), 200, 3);
  for (std::size_t s = 0; s < 200; ++s) {
    EXPECT_EQ(e.at(s, 0, 0), t.x[0]);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(e.at(s, 16, j), t.y[j], 1e-13);
  }
}

TEST(SampleBridge, EtaInvariance) {
  const SpectralModel m = white(8);
  const BridgeTarget t = some_target(8);
  const TimeGrid g = TimeGrid::uniform(1.0, 9);
  const auto a = sample_bridge(m, t, g, 30, 1);
  const auto b = sample_bridge(m.with_eta(-2.0), t, g, 30, 1);
  EXPECT_EQ(to_csv(a), to_csv(b));
}

TEST(SampleBridge, TruncationCoupling) {
  const SpectralModel m = white(32);
  const BridgeTarget t = some_target(32);
  const TimeGrid g = TimeGrid::uniform(1.0, 9);
  const auto full = sample_bridge(m, t, g, 10, 7);
  const auto part = sample_bridge(truncate_bridge(m, 8), t.truncated(8), g, 10, 7);
  ASSERT_EQ(part.width, 8u);
  for (std::size_t s = 0; s < 10; ++s)
    for (std::size_t i = 0; i < 9; ++i)
      for (std::size_t j = 0; j < 8; ++j) EXPECT_EQ(part.at(s, i, j), full.at(s, i, j));
}

TEST(SampleBridge, ObservationFunctionalReturned) {
  const SpectralModel m = white(4, 0.3);
  const BridgeTarget t = BridgeTarget::zero(4);
  const TimeGrid g = TimeGrid::uniform(1.0, 5);
  const auto d = sample_bridge_with_observation(m, t, g, 5, 2);
  const auto p = sample_bridge(m, t, g, 5, 2);
  EXPECT_EQ(d.paths.values, p.values);
  EXPECT_EQ(d.observation.rows(), 5);
  EXPECT_TRUE(d.observation.allFinite());
}

TEST(SampleBridge, MomentsMatchKernel) {
  const SpectralModel m = build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(0.05), 3, 1.0);
  const BridgeTarget t = some_target(3);
  const TimeGrid g({0.0, 0.3, 0.8, 1.0});
  const std::size_t n = 40000;
  const auto e = sample_bridge(m, t, g, n, 21);
  const Eigen::MatrixXd mean = bridge_mean(m, t, g);
  for (std::size_t i = 1; i < g.size(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double s1 = 0, s2 = 0;
      for (std::size_t s = 0; s < n; ++s) {
        const double d = e.at(s, i, j) - mean(i, j);
        s1 += d;
        s2 += d * d;
      }
      const double v = bridge_cov_mode(j, g[i], g[i], m);
      EXPECT_NEAR(s1 / n, 0.0, 5 * std::sqrt(v / n));
      EXPECT_NEAR(s2 / n, v, 5 * v * std::sqrt(2.0 / n));
    }
  }
}

TEST(SampleBridge, SequentialSamplerAgreesInLaw) {
  const SpectralModel m = white(2, 0.2);
  const BridgeTarget t = some_target(2);
  const TimeGrid g = TimeGrid::uniform(1.0, 5);
  const std::size_t n = 30000;
  const auto a = sample_bridge(m, t, g, n, 5);
  const auto b = sample_bridge_sequential(m, t, g, n, 5);
  EXPECT_NE(a.values, b.values);
  for (std::size_t i = 1; i < g.size(); ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double ma = 0, mb = 0, va = 0, vb = 0, ca = 0, cb = 0;
      for (std::size_t s = 0; s < n; ++s) {
        ma += a.at(s, i, j);
        mb += b.at(s, i, j);
      }
      ma /= n;
      mb /= n;
      const double m1 = bridge_mean(m, t, g)(1, j);
      for (std::size_t s = 0; s < n; ++s) {
        va += std::pow(a.at(s, i, j) - ma, 2);
        vb += std::pow(b.at(s, i, j) - mb, 2);
        ca += (a.at(s, i, j) - ma) * (a.at(s, 1, j) - m1);
        cb += (b.at(s, i, j) - mb) * (b.at(s, 1, j) - m1);
      }
      const double v = bridge_cov_mode(j, g[i], g[i], m);
      const double v1 = bridge_cov_mode(j, g[1], g[1], m);
      EXPECT_NEAR(ma, mb, 6 * std::sqrt(2 * v / n));
      EXPECT_NEAR(va / n, vb / n, 6 * v * std::sqrt(4.0 / n));
      EXPECT_NEAR(ca / n, cb / n, 6 * std::sqrt(4 * v * v1 / n));
      EXPECT_NEAR(cb / n, bridge_cov_mode(j, g[i], g[1], m), 6 * std::sqrt(2 * v * v1 / n));
    }
  }
}

TEST(ConditionalMean, MatchesBridgeMeanAtZeroStart) {
  const SpectralModel m = white(5, 0.7);
  BridgeTarget t = some_target(5);
  std::fill(t.x.begin(), t.x.end(), 0.0);
  const TimeGrid g = TimeGrid::uniform(1.0, 6);
  const Eigen::MatrixXd a = conditional_mean(m, t.y, g);
  const Eigen::MatrixXd b = bridge_mean(m, t, g);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(BridgeTargetTest, Validation) {
  BridgeTarget t = BridgeTarget::zero(3);
  EXPECT_NO_THROW(t.validate(3));
  EXPECT_THROW(t.validate(4), std::invalid_argument);
  t.y[1] = std::nan("");
  EXPECT_THROW(t.validate(3), std::invalid_argument);
}
