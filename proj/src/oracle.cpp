#include "spdebridge/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "spdebridge/errors.hpp"
#include "spdebridge/forward.hpp"

namespace spdebridge::oracle {

void JointGaussian::validate() const {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) throw NumericalError("joint covariance has wrong shape");
  const double scale = std::max(cov.cwiseAbs().maxCoeff(), 1e-300);
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw NumericalError("joint covariance not symmetric");
  if (mean.size() == 0) return;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  const double trace = cov.trace();
  if (eig.eigenvalues().minCoeff() < -1e-10 * std::abs(trace)) {
    throw NumericalError(fmt::format("joint covariance not PSD: smallest eigenvalue {}", eig.eigenvalues().minCoeff()));
  }
}

JointGaussian assemble_joint(const SpectralModel& model, const TimeGrid& grid, std::span<const std::size_t> modes,
                             const BridgeTarget* target) {
  const auto G = static_cast<Eigen::Index>(grid.size());
  const Eigen::Index block = G + 1;
  const auto n = block * static_cast<Eigen::Index>(modes.size());
  const double T = model.T();
  JointGaussian joint{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, n), {}};
  joint.labels.reserve(static_cast<std::size_t>(n));
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const std::size_t j = modes[m];
    const Eigen::Index off = static_cast<Eigen::Index>(m) * block;
    const double x = target ? target->x.at(j) : 0.0;
    for (Eigen::Index a = 0; a < G; ++a) {
      joint.labels.push_back({CoordinateLabel::Kind::State, grid[a], j});
      joint.mean(off + a) = std::exp(-model.lambda(j) * grid[a]) * x;
      for (Eigen::Index b = 0; b < G; ++b) joint.cov(off + a, off + b) = cov_mode(j, grid[a], grid[b], model);
      // Z is independent of the path, so Cov(X(t), X(T) + Z) = Cov(X(t), X(T)).
      const double c = cov_mode(j, grid[a], T, model);
      joint.cov(off + a, off + G) = c;
      joint.cov(off + G, off + a) = c;
    }
    joint.labels.push_back({CoordinateLabel::Kind::Observation, T, j});
    joint.mean(off + G) = std::exp(-model.lambda(j) * T) * x;
    joint.cov(off + G, off + G) = q_mode(j, T, model) + model.mu_tilde(j);
  }
  return joint;
}

JointGaussian condition(const JointGaussian& joint, std::span<const Eigen::Index> observed,
                        std::span<const double> values) {
  if (observed.size() != values.size()) throw std::invalid_argument("observed indices and values differ in length");
  if (observed.empty()) return joint;
  const Eigen::Index n = joint.size();
  std::vector<char> is_obs(static_cast<std::size_t>(n), 0);
  for (Eigen::Index o : observed) {
    if (o < 0 || o >= n) throw std::invalid_argument(fmt::format("observed index {} out of range", o));
    if (is_obs[static_cast<std::size_t>(o)]) throw std::invalid_argument(fmt::format("index {} observed twice", o));
    is_obs[static_cast<std::size_t>(o)] = 1;
  }
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!is_obs[static_cast<std::size_t>(i)]) free.push_back(i);
  }
  const auto no = static_cast<Eigen::Index>(observed.size());
  const auto nf = static_cast<Eigen::Index>(free.size());

  Eigen::MatrixXd soo(no, no), sfo(nf, no), sff(nf, nf);
  Eigen::VectorXd resid(no);
  for (Eigen::Index a = 0; a < no; ++a) {
    resid(a) = values[static_cast<std::size_t>(a)] - joint.mean(observed[static_cast<std::size_t>(a)]);
    for (Eigen::Index b = 0; b < no; ++b) soo(a, b) = joint.cov(observed[static_cast<std::size_t>(a)], observed[static_cast<std::size_t>(b)]);
  }
  for (Eigen::Index a = 0; a < nf; ++a) {
    for (Eigen::Index b = 0; b < no; ++b) sfo(a, b) = joint.cov(free[static_cast<std::size_t>(a)], observed[static_cast<std::size_t>(b)]);
    for (Eigen::Index b = 0; b < nf; ++b) sff(a, b) = joint.cov(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
  }

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(soo, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  if (!(smallest > 1e-12 * std::abs(soo.trace()))) {
    throw NumericalError(fmt::format("observed block is singular: smallest eigenvalue {} (trace {})", smallest, soo.trace()));
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(soo);
  const Eigen::VectorXd shift = sfo * llt.solve(resid);
  const Eigen::MatrixXd reduce = sfo * llt.solve(sfo.transpose());

  JointGaussian out{joint.mean, Eigen::MatrixXd::Zero(n, n), joint.labels};
  for (Eigen::Index a = 0; a < no; ++a) out.mean(observed[static_cast<std::size_t>(a)]) = values[static_cast<std::size_t>(a)];
  for (Eigen::Index a = 0; a < nf; ++a) {
    const Eigen::Index fa = free[static_cast<std::size_t>(a)];
    out.mean(fa) += shift(a);
    for (Eigen::Index b = 0; b < nf; ++b) out.cov(fa, free[static_cast<std::size_t>(b)]) = sff(a, b) - reduce(a, b);
  }
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& a) {
  if (a.size() == 0) return Eigen::MatrixXd::Zero(a.cols(), a.rows());
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = 1e-12 * sigma(0);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cutoff) inv(i) = 1.0 / sigma(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

RangeReport check_range_domination(const Eigen::MatrixXd& a1, const Eigen::MatrixXd& a2, int trials,
                                   std::uint64_t seed) {
  if (a1.rows() != a2.rows()) {
    throw std::invalid_argument(fmt::format("codomain dimensions differ: {} vs {}", a1.rows(), a2.rows()));
  }
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  auto random_vector = [&](Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(gen);
    return v;
  };

  RangeReport report;
  report.probes = trials;
  const Eigen::MatrixXd a1_pinv = pseudoinverse(a1);
  const Eigen::MatrixXd a2_pinv = pseudoinverse(a2);
  const double a2_norm = a2.size() ? Eigen::JacobiSVD<Eigen::MatrixXd>(a2).singularValues()(0) : 0.0;

  // Range inclusion: least-squares residual of A2 w = A1 v.
  report.included = true;
  Eigen::VectorXd outside;  // component of range(A1) orthogonal to range(A2)
  for (int t = 0; t < trials; ++t) {
    const Eigen::VectorXd target = a1 * random_vector(a1.cols());
    const double scale = target.norm();
    if (scale == 0.0) continue;
    const Eigen::VectorXd residual = a2 * (a2_pinv * target) - target;
    const double rel = residual.norm() / scale;
    report.max_residual = std::max(report.max_residual, rel);
    if (rel > 1e-8) {
      report.included = false;
      if (outside.size() == 0) outside = -residual;
    }
  }

  // Ratio probes: random u plus the maximizing direction (A2^+)^T v_top.
  auto ratio = [&](const Eigen::VectorXd& u) -> double {
    const double den = (a2.transpose() * u).norm();
    if (den <= 1e-12 * a2_norm * u.norm()) return -1.0;
    return (a1.transpose() * u).norm() / den;
  };
  for (int t = 0; t < trials; ++t) report.C_est = std::max(report.C_est, ratio(random_vector(a1.rows())));
  const Eigen::MatrixXd composite = a2_pinv * a1;
  if (composite.size() > 0) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(composite, Eigen::ComputeThinU);
    const Eigen::VectorXd top = svd.matrixU().col(0);
    report.C_est = std::max(report.C_est, ratio(a2_pinv.transpose() * top));
  }
  if (!report.included && outside.size() > 0) {
    const double num = (a1.transpose() * outside).norm();
    const double den = (a2.transpose() * outside).norm();
    report.unbounded_ratio = num > 0.0 && den <= 1e-10 * num * std::max(1.0, a2_norm);
  }

  if (report.included) {
    report.inverse_bound_holds = true;
    for (int t = 0; t < trials; ++t) {
      const Eigen::VectorXd u = a1 * random_vector(a1.cols());
      const double den = (a1_pinv * u).norm();
      if (den == 0.0) continue;
      const double r = (a2_pinv * u).norm() / den;
      report.max_inverse_ratio = std::max(report.max_inverse_ratio, r);
      if (r > report.C_est * (1.0 + 1e-10)) report.inverse_bound_holds = false;
    }
  }
  return report;
}

double quad_covariance(std::size_t j, double t, const SpectralModel& model) {
  if (j >= model.modes()) throw std::invalid_argument(fmt::format("mode index {} out of range", j));
  if (!(t >= 0.0) || t > model.T() * (1.0 + 1e-12)) throw std::invalid_argument(fmt::format("t = {} outside [0, T]", t));
  const double mu = model.mu(j);
  const double lam = model.lambda(j);
  if (t == 0.0 || mu == 0.0) return 0.0;
  auto f = [&](double s) { return mu * std::exp(-2.0 * lam * s); };
  // Past 36/lambda the integrand is below e^{-72} of its peak; cutting there keeps
  // the rule from sampling only underflowed values when lambda t is huge.
  const double upper = std::min(t, 36.0 / lam);
  const auto pieces = static_cast<int>(std::max(1.0, std::ceil(upper * lam)));
  // Gauss-Kronrod on panels of width <= 1/lambda, compared against the same rule
  // on halved panels; boost's own estimate is dominated by rounding here.
  auto composite = [&](int n) {
    std::vector<double> parts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const double a = upper * i / n;
      const double b = i + 1 == n ? upper : upper * (i + 1) / n;
      parts[static_cast<std::size_t>(i)] = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0);
    }
    double sum = 0.0;
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) sum += *it;  // smallest first
    return sum;
  };
  const double coarse = composite(pieces);
  const double value = composite(2 * pieces);
  if (!(std::abs(value - coarse) <= 1e-12 * std::abs(value))) {
    throw NumericalError(fmt::format("quadrature for mode {} at t = {} did not converge (panel refinement changed it by {})",
                                     j + 1, t, std::abs(value - coarse)));
  }
  return value;
}

JointGaussian assemble_joint_fem(const FemSystem& sys, const SpectralModel& model, double eps, const TimeGrid& grid,
                                 const BridgeTarget& target) {
  target.validate(model.modes());
  const auto n = static_cast<Eigen::Index>(sys.n_dof());
  const auto G = static_cast<Eigen::Index>(grid.size());
  const Eigen::MatrixXd minv = sys.M.inverse();
  const Eigen::MatrixXd drift = minv * sys.K;
  const Eigen::MatrixXd B = sine_load_matrix(sys, model.modes());
  const Eigen::Map<const Eigen::VectorXd> mu(model.mu().data(), static_cast<Eigen::Index>(model.modes()));
  const Eigen::MatrixXd intensity = minv * (B * mu.asDiagonal() * B.transpose()) * minv;

  // Q(t) on the grid by exact propagation over substeps short enough that the
  // Van Loan block exponential stays well conditioned.
  const double rate = drift.eigenvalues().real().maxCoeff();
  std::vector<Eigen::MatrixXd> q(static_cast<std::size_t>(G), Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index i = 1; i < G; ++i) {
    const double dt = grid[i] - grid[i - 1];
    const int sub = std::max(1, static_cast<int>(std::ceil(dt * rate / 0.5)));
    const double tau = dt / sub;
    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    block.topLeftCorner(n, n) = drift * tau;
    block.topRightCorner(n, n) = intensity * tau;
    block.bottomRightCorner(n, n) = -drift.transpose() * tau;
    const Eigen::MatrixXd e = block.exp();
    const Eigen::MatrixXd phi = e.bottomRightCorner(n, n).transpose();  // exp(-drift tau)
    const Eigen::MatrixXd q_tau = phi * e.topRightCorner(n, n);
    Eigen::MatrixXd acc = q[static_cast<std::size_t>(i - 1)];
    for (int s = 0; s < sub; ++s) acc = phi * acc * phi.transpose() + q_tau;
    q[static_cast<std::size_t>(i)] = 0.5 * (acc + acc.transpose());
  }

  const Eigen::Map<const Eigen::VectorXd> x(target.x.data(), static_cast<Eigen::Index>(model.modes()));
  const Eigen::VectorXd x_nodal = sys.mass_factor.solve(B * x);

  const Eigen::Index dim = (G + 1) * n;
  JointGaussian joint{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Zero(dim, dim), {}};
  for (Eigen::Index a = 0; a < G; ++a) {
    joint.mean.segment(a * n, n) = (-grid[a] * drift).exp() * x_nodal;
    for (Eigen::Index k = 0; k < n; ++k) joint.labels.push_back({CoordinateLabel::Kind::State, grid[a], static_cast<std::size_t>(k)});
    for (Eigen::Index b = a; b < G; ++b) {
      // Cov(c(s), c(t)) = Q(s) exp(-drift (t - s))^T for s <= t.
      const Eigen::MatrixXd c = q[static_cast<std::size_t>(a)] * (-(grid[b] - grid[a]) * drift).exp().transpose();
      joint.cov.block(a * n, b * n, n, n) = c;
      joint.cov.block(b * n, a * n, n, n) = c.transpose();
    }
  }
  const Eigen::Index obs = G * n;
  joint.mean.segment(obs, n) = joint.mean.segment((G - 1) * n, n);
  for (Eigen::Index a = 0; a < G; ++a) {
    const Eigen::MatrixXd c = joint.cov.block(a * n, (G - 1) * n, n, n);
    joint.cov.block(a * n, obs, n, n) = c;
    joint.cov.block(obs, a * n, n, n) = c.transpose();
  }
  joint.cov.block(obs, obs, n, n) = q[static_cast<std::size_t>(G - 1)] + eps * minv;
  for (Eigen::Index k = 0; k < n; ++k) joint.labels.push_back({CoordinateLabel::Kind::Observation, grid.T(), static_cast<std::size_t>(k)});
  return joint;
}

}  // namespace spdebridge::oracle
