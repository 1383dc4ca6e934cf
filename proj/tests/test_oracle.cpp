#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "spdebridge/bridge.hpp"
#include "spdebridge/errors.hpp"
#include "spdebridge/forward.hpp"
#include "spdebridge/oracle.hpp"

using namespace spdebridge;

namespace {

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(gen);
  return m;
}

SpectralModel white(std::size_t J, double eps = 1.0) {
  return build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(eps), J, 1.0);
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

}  // namespace

TEST(AssembleJoint, OneModeTwoPointGrid) {
  const SpectralModel m = white(1, 0.3);
  const TimeGrid grid({0.0, 1.0});
  const auto joint = oracle::assemble_joint(m, grid, iota(1));
  const double q = q_mode(0, 1.0, m);
  Eigen::Matrix3d want;
  want << 0, 0, 0, 0, q, q, 0, q, q + 0.3;
  EXPECT_EQ(joint.cov, Eigen::MatrixXd(want));
  EXPECT_EQ(joint.labels[2].kind, oracle::CoordinateLabel::Kind::Observation);
}

TEST(AssembleJoint, PsdAndBlockDiagonal) {
  const SpectralModel m = white(6);
  const TimeGrid grid = TimeGrid::uniform(1.0, 9);
  const auto joint = oracle::assemble_joint(m, grid, iota(6));
  EXPECT_NO_THROW(joint.validate());
  const Eigen::Index b = 10;
  for (Eigen::Index i = 0; i < joint.size(); ++i) {
    for (Eigen::Index k = 0; k < joint.size(); ++k) {
      if (i / b != k / b) {
        EXPECT_EQ(joint.cov(i, k), 0.0);
      }
    }
  }
}

TEST(AssembleJoint, MatchesEmpiricalCovariance) {
  // 1e6 samples of one mode at (0.5, 1) plus the observation.
  const SpectralModel m = white(2);
  const TimeGrid grid({0.0, 0.5, 1.0});
  const auto joint = oracle::assemble_joint(m, grid, {std::vector<std::size_t>{0}});
  const std::size_t n = 1000000;
  const PathEnsemble ens = sample_forward(m, std::vector<double>(2, 0.0), grid, n, 5);
  const Eigen::MatrixXd z = sample_observation(m, n, 5);
  Eigen::MatrixXd data(n, 3);
  for (std::size_t s = 0; s < n; ++s) {
    data(s, 0) = ens.at(s, 1, 0);
    data(s, 1) = ens.at(s, 2, 0);
    data(s, 2) = ens.at(s, 2, 0) + z(s, 0);
  }
  const Eigen::MatrixXd centred = data.rowwise() - data.colwise().mean();
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const Eigen::ArrayXd prod = centred.col(a).array() * centred.col(b).array();
      const double emp = prod.mean();
      const double se = std::sqrt((prod - emp).square().sum() / (n - 1) / n);
      EXPECT_NEAR(emp, joint.cov(a + 1, b + 1), 4 * se) << a << "," << b;
    }
  }
}

TEST(Condition, ObserveNothingIsIdentity) {
  const auto joint = oracle::assemble_joint(white(2), TimeGrid::uniform(1.0, 3), iota(2));
  const auto out = oracle::condition(joint, {}, {});
  EXPECT_EQ(out.mean, joint.mean);
  EXPECT_EQ(out.cov, joint.cov);
}

TEST(Condition, ObservedCoordinateHasZeroVariance) {
  const auto joint = oracle::assemble_joint(white(2), TimeGrid::uniform(1.0, 3), iota(2));
  const std::vector<Eigen::Index> obs{3};
  const std::vector<double> val{0.7};
  const auto out = oracle::condition(joint, obs, val);
  EXPECT_EQ(out.cov(3, 3), 0.0);
  EXPECT_EQ(out.mean(3), 0.7);
}

TEST(Condition, SingularObservedBlockNamesEigenvalue) {
  const auto joint = oracle::assemble_joint(white(1), TimeGrid::uniform(1.0, 3), iota(1));
  const std::vector<Eigen::Index> obs{0};  // t = 0: deterministic
  const std::vector<double> val{0.0};
  try {
    oracle::condition(joint, obs, val);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("smallest eigenvalue"), std::string::npos);
  }
}

TEST(Condition, TowerProperty) {
  std::mt19937_64 gen(3);
  const Eigen::MatrixXd f = random_matrix(6, 6, gen);
  oracle::JointGaussian j{Eigen::VectorXd::Zero(6), f * f.transpose() + Eigen::MatrixXd::Identity(6, 6), {}};
  const std::vector<Eigen::Index> o1{1, 4}, o2{2}, both{1, 4, 2};
  const std::vector<double> v1{0.3, -1.0}, v2{2.0}, vb{0.3, -1.0, 2.0};
  const auto seq = oracle::condition(oracle::condition(j, o1, v1), o2, v2);
  const auto once = oracle::condition(j, both, vb);
  EXPECT_LT((seq.mean - once.mean).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((seq.cov - once.cov).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Condition, MatchesBridgeFormulas) {
  const SpectralModel m = white(4, 0.1);
  const TimeGrid grid = TimeGrid::uniform(1.0, 9);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> normal;
  std::vector<double> obs(4);
  for (auto& o : obs) o = normal(gen);
  const auto joint = oracle::assemble_joint(m, grid, iota(4));
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = 0; j < 4; ++j) idx.push_back(j * 10 + 9);
  const auto cond = oracle::condition(joint, idx, obs);
  const Eigen::MatrixXd mean = conditional_mean(m, obs, grid);
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t a = 0; a < 9; ++a) {
      EXPECT_NEAR(mean(a, j), cond.mean(j * 10 + a), 1e-10 * std::abs(cond.mean(j * 10 + a)) + 1e-300);
      for (std::size_t b = 0; b < 9; ++b) {
        const double want = cond.cov(j * 10 + a, j * 10 + b);
        EXPECT_NEAR(bridge_cov_mode(j, grid[a], grid[b], m), want, 1e-10 * std::abs(want));
      }
    }
  }
}

TEST(Pseudoinverse, Identity) {
  EXPECT_TRUE(oracle::pseudoinverse(Eigen::MatrixXd::Identity(5, 5)).isApprox(Eigen::MatrixXd::Identity(5, 5), 1e-14));
}

TEST(Pseudoinverse, RankOne) {
  Eigen::VectorXd u(3), v(2);
  u << 1, 2, -1;
  v << 0.5, 3;
  const Eigen::MatrixXd p = oracle::pseudoinverse(u * v.transpose());
  const Eigen::MatrixXd want = v * u.transpose() / (u.squaredNorm() * v.squaredNorm());
  EXPECT_LT((p - want).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Pseudoinverse, ProjectorOntoRowSpace) {
  std::mt19937_64 gen(6);
  const Eigen::MatrixXd a = random_matrix(6, 4, gen);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::MatrixXd v = svd.matrixV();
  const Eigen::MatrixXd proj = v * v.transpose();
  EXPECT_LE((oracle::pseudoinverse(a) * a - proj).norm(), 1e-10);
}

TEST(Pseudoinverse, PenroseIdentities) {
  std::mt19937_64 gen(7);
  for (Eigen::Index n = 1; n <= 32; n += 3) {
    const Eigen::Index m = 33 - n;
    const Eigen::Index r = std::max<Eigen::Index>(1, std::min(m, n) - 2);
    const Eigen::MatrixXd a = random_matrix(m, r, gen) * random_matrix(r, n, gen);
    const Eigen::MatrixXd p = oracle::pseudoinverse(a);
    EXPECT_LE((a * p * a - a).norm(), 1e-10 * a.norm());
    EXPECT_LE((p * a * p - p).norm(), 1e-10 * p.norm());
    EXPECT_LE(((a * p).transpose() - a * p).norm(), 1e-10 * (a * p).norm());
    EXPECT_LE(((p * a).transpose() - p * a).norm(), 1e-10 * (p * a).norm());
  }
}

TEST(RangeDomination, EqualOperators) {
  std::mt19937_64 gen(8);
  const Eigen::MatrixXd a = random_matrix(5, 3, gen);
  const auto r = oracle::check_range_domination(a, a);
  EXPECT_TRUE(r.included);
  EXPECT_NEAR(r.C_est, 1.0, 1e-10);
  EXPECT_TRUE(r.inverse_bound_holds);
}

TEST(RangeDomination, Scaled) {
  std::mt19937_64 gen(9);
  const Eigen::MatrixXd a = random_matrix(5, 3, gen);
  const auto r = oracle::check_range_domination(2.0 * a, a);
  EXPECT_TRUE(r.included);
  EXPECT_NEAR(r.C_est, 2.0, 1e-10);
  EXPECT_TRUE(r.inverse_bound_holds);
}

TEST(RangeDomination, ExcludedDirectionWitnessed) {
  std::mt19937_64 gen(10);
  const Eigen::MatrixXd a2 = random_matrix(6, 2, gen);
  const Eigen::MatrixXd proj = a2 * oracle::pseudoinverse(a2);
  Eigen::MatrixXd a1(6, 2);
  a1 << a2.col(0), (Eigen::MatrixXd::Identity(6, 6) - proj) * random_matrix(6, 1, gen);
  const auto r = oracle::check_range_domination(a1, a2);
  EXPECT_FALSE(r.included);
  EXPECT_TRUE(r.unbounded_ratio);
}

TEST(RangeDomination, CodomainMismatchRejected) {
  EXPECT_THROW(oracle::check_range_domination(Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(4, 2)),
               std::invalid_argument);
}

TEST(QuadCovariance, MatchesClosedForm) {
  for (const auto& q : {CovarianceSpec::white(), CovarianceSpec::power(1.0), CovarianceSpec::power(0.5, 3.0)}) {
    const SpectralModel m = build_model(q, ObservationSpec::scaled_identity(1.0), 100, 1.0);
    for (std::size_t j : {1u, 10u, 100u}) {
      for (double t : {0.01, 0.5, 1.0}) {
        const double want = oracle::quad_covariance(j - 1, t, m);
        EXPECT_NEAR(q_mode(j - 1, t, m), want, 1e-10 * want) << j << " " << t;
      }
    }
  }
}

TEST(QuadCovariance, FirstModeAtOne) {
  // int_0^1 e^{-2 pi^2 s} ds
  const double v = oracle::quad_covariance(0, 1.0, white(1));
  EXPECT_NEAR(v, 0.05066059168563722, 1e-12 * v);
}

TEST(QuadCovariance, DegenerateCases) {
  EXPECT_EQ(oracle::quad_covariance(0, 0.0, white(3)), 0.0);
  const SpectralModel dead({1.0, 4.0}, {0.0, 1.0}, {1.0, 1.0}, 1.0, -0.5);
  EXPECT_EQ(oracle::quad_covariance(0, 0.5, dead), 0.0);
}

TEST(QuadCovariance, StiffModesConverge) {
  const SpectralModel m = white(2048);
  const double want = q_mode(2047, 1.0, m);
  EXPECT_NEAR(oracle::quad_covariance(2047, 1.0, m), want, 1e-12 * want);
}
