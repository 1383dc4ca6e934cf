#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "spdebridge/model.hpp"

using namespace spdebridge;

namespace {
constexpr double kPi2 = std::numbers::pi * std::numbers::pi;
}

TEST(BuildModel, SingleWhiteMode) {
  const SpectralModel m = build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(1.0), 1, 1.0);
  ASSERT_EQ(m.modes(), 1u);
  EXPECT_DOUBLE_EQ(m.lambda(0), kPi2);
  EXPECT_EQ(m.mu(0), 1.0);
  EXPECT_EQ(m.mu_tilde(0), 1.0);
}

TEST(BuildModel, PowerSpectrum) {
  const SpectralModel m = build_model(CovarianceSpec::power(1.0), ObservationSpec::scaled_identity(1.0), 2, 1.0);
  EXPECT_DOUBLE_EQ(m.mu(0), 1.0 / kPi2);
  EXPECT_DOUBLE_EQ(m.mu(1), 1.0 / (4 * kPi2));
}

TEST(BuildModel, DirichletEigenvaluesExact) {
  const SpectralModel m = build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(1.0), 3, 1.0);
  for (std::size_t j = 0; j < 3; ++j) {
    const double k = std::numbers::pi * static_cast<double>(j + 1);
    EXPECT_EQ(m.lambda(j), k * k);
  }
}

TEST(BuildModel, ObservationPower) {
  const SpectralModel m = build_model(CovarianceSpec::white(), ObservationSpec::power(2.0, 1.0), 2, 1.0);
  EXPECT_DOUBLE_EQ(m.mu_tilde(1), 2.0 / (4 * kPi2));
}

TEST(BuildModel, RejectsBadInput) {
  const auto w = CovarianceSpec::white();
  const auto o = ObservationSpec::scaled_identity(1.0);
  EXPECT_THROW(build_model(w, o, 0, 1.0), std::invalid_argument);
  EXPECT_THROW(build_model(w, o, 3, 0.0), std::invalid_argument);
  EXPECT_THROW(build_model(w, o, 3, -1.0), std::invalid_argument);
  EXPECT_THROW(build_model(CovarianceSpec::power(-1.0), o, 3, 1.0), std::invalid_argument);
  EXPECT_THROW(build_model(CovarianceSpec::power(1.0, 0.0), o, 3, 1.0), std::invalid_argument);
  EXPECT_THROW(build_model(w, ObservationSpec::scaled_identity(0.0), 3, 1.0), std::invalid_argument);
  EXPECT_THROW(build_model(w, ObservationSpec::power(1.0, -0.5), 3, 1.0), std::invalid_argument);
}

TEST(SpectralModel, RejectsDecreasingLambdaAndNegativeSpectra) {
  EXPECT_THROW(SpectralModel({2.0, 1.0}, {1, 1}, {1, 1}, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(SpectralModel({1.0, 2.0}, {-1, 1}, {1, 1}, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(SpectralModel({1.0, 2.0}, {1, 1}, {1, -1}, 1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(SpectralModel({0.0, 2.0}, {1, 1}, {1, 1}, 1.0, 0.0), std::invalid_argument);
}

TEST(SpectralModel, TruncationKeepsFamilies) {
  const SpectralModel m = build_model(CovarianceSpec::power(0.5), ObservationSpec::scaled_identity(2.0), 10, 1.0);
  const SpectralModel t = m.truncated(4);
  EXPECT_EQ(t.modes(), 4u);
  EXPECT_TRUE(t.covariance().has_value());
  EXPECT_EQ(t.mu(3), m.mu(3));
  EXPECT_THROW(m.truncated(0), std::invalid_argument);
  EXPECT_THROW(m.truncated(11), std::invalid_argument);
}

TEST(CheckAssumptions, WhiteScaledIdentity) {
  const auto b = check_assumptions(build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(1.0), 16, 1.0), 2.0);
  EXPECT_EQ(b.beta_sup, 0.5);
  EXPECT_EQ(b.rho_sup, 1.0);
  EXPECT_EQ(b.alpha, 0.0);
  EXPECT_EQ(b.rate_sup, 0.5);
  EXPECT_TRUE(b.diagnostics.empty());
  EXPECT_LE(b.beta_sup, b.rho_sup);
}

TEST(CheckAssumptions, PowerNoise) {
  const auto b = check_assumptions(build_model(CovarianceSpec::power(1.0), ObservationSpec::scaled_identity(1.0), 16, 1.0), 2.0);
  EXPECT_EQ(b.beta_sup, 1.5);
  EXPECT_EQ(b.rho_sup, 2.0);
}

TEST(CheckAssumptions, PowerBetaMatchesSummability) {
  // sum_j lambda_j^{beta-1} mu_j with mu_j = lambda_j^{-1}: partial sums stabilize for
  // beta below 1.5 and keep growing above it.
  auto partial = [](double beta, std::size_t J) {
    double s = 0.0;
    for (std::size_t j = 1; j <= J; ++j) {
      const double lam = std::pow(std::numbers::pi * j, 2);
      s += std::pow(lam, beta - 1.0) / lam;
    }
    return s;
  };
  const double below = partial(1.4, 1000000) - partial(1.4, 100000);
  const double above = partial(1.6, 1000000) - partial(1.6, 100000);
  EXPECT_LT(below, 0.05 * partial(1.4, 100000));
  EXPECT_GT(above, 0.5 * partial(1.6, 100000));
}

TEST(CheckAssumptions, AlphaTooLargeIsDiagnostic) {
  const auto b = check_assumptions(build_model(CovarianceSpec::white(), ObservationSpec::power(1.0, 2.0), 16, 1.0), 2.0);
  EXPECT_LT(b.rate_sup, 0.0);
  EXPECT_FALSE(b.diagnostics.empty());
}

TEST(CheckAssumptions, BoundaryAlphaWarns) {
  const auto b = check_assumptions(build_model(CovarianceSpec::white(), ObservationSpec::power(1.0, 1.0), 16, 1.0), 2.0);
  ASSERT_FALSE(b.diagnostics.empty());
  EXPECT_NE(b.diagnostics.front().find("warning"), std::string::npos);
}

TEST(CheckAssumptions, MonotoneInS) {
  double beta = -1, rho = -1;
  for (double s : {0.0, 0.25, 0.5, 1.0, 2.0}) {
    const auto b = check_assumptions(build_model(CovarianceSpec::power(s), ObservationSpec::scaled_identity(1.0), 16, 1.0), 1.0);
    EXPECT_GE(b.beta_sup, beta);
    EXPECT_GE(b.rho_sup, rho);
    beta = b.beta_sup;
    rho = b.rho_sup;
  }
}

TEST(CheckAssumptions, NumericalProbeForUserSpectra) {
  std::vector<double> lam = dirichlet_eigenvalues(256), mu(256), mt(256, 1.0);
  for (std::size_t j = 0; j < 256; ++j) mu[j] = 1.0 / lam[j];
  const auto b = check_assumptions(SpectralModel(lam, mu, mt, 1.0, -0.5), 2.0);
  EXPECT_FALSE(b.analytic);
  EXPECT_NEAR(b.beta_sup, 1.5, 1e-6);
  EXPECT_NEAR(b.rho_sup, 2.0, 1e-6);
}

TEST(HdotNorm, UnitVector) {
  const std::vector<double> c{1, 0, 0}, lam{kPi2, 4 * kPi2, 9 * kPi2};
  EXPECT_DOUBLE_EQ(hdot_norm(c, lam, 1.5), std::pow(kPi2, 0.75));
}

TEST(HdotNorm, ZeroOrderIsEuclidean) {
  const std::vector<double> c{3, 4}, lam{kPi2, 4 * kPi2};
  EXPECT_DOUBLE_EQ(hdot_norm(c, lam, 0.0), 5.0);
}

TEST(HdotNorm, NegativeOrder) {
  const std::vector<double> c{1, 1}, lam{kPi2, 4 * kPi2};
  const double want = std::sqrt(std::pow(std::numbers::pi, -4) + std::pow(2 * std::numbers::pi, -4));
  EXPECT_NEAR(hdot_norm(c, lam, -2.0), want, 1e-15 * want);
}

TEST(HdotNorm, EmptyAndLengthMismatch) {
  EXPECT_EQ(hdot_norm({}, {}, 1.0), 0.0);
  const std::vector<double> c{1}, lam{1, 2};
  EXPECT_THROW(hdot_norm(c, lam, 1.0), std::invalid_argument);
}

TEST(HdotNorm, IsometryAndEmbedding) {
  const std::vector<double> lam = dirichlet_eigenvalues(20);
  std::vector<double> c(20), scaled(20);
  for (std::size_t j = 0; j < 20; ++j) c[j] = std::sin(0.7 * j + 0.2);
  for (double r : {-1.0, 0.5, 2.0}) {
    for (std::size_t j = 0; j < 20; ++j) scaled[j] = std::pow(lam[j], r / 2) * c[j];
    EXPECT_NEAR(hdot_norm(c, lam, r), hdot_norm(scaled, lam, 0.0), 1e-12 * hdot_norm(c, lam, r));
    const double s = r - 1.0;
    EXPECT_LE(hdot_norm(c, lam, s), std::pow(lam[0], (s - r) / 2) * hdot_norm(c, lam, r) * (1 + 1e-14));
  }
}
