#include "spdebridge/bridge.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "spdebridge/errors.hpp"

namespace spdebridge {

namespace {

double denominator(std::size_t j, const SpectralModel& model) {
  const double d = ou_variance(model.lambda(j), model.mu(j), model.T()) + model.mu_tilde(j);
  if (!(d > 0.0)) {
    throw NumericalError(fmt::format(
        "mode {} has mu = mu_tilde = 0: covariance of X(T) + Z is not injective there", j + 1));
  }
  return d;
}

void check_length(std::span<const double> v, std::size_t J, const char* what) {
  if (v.size() != J) throw std::invalid_argument(fmt::format("{} has {} coefficients, model has {} modes", what, v.size(), J));
}

}  // namespace

BridgeTarget BridgeTarget::truncated(std::size_t N) const {
  if (N > x.size() || N > y.size()) throw std::invalid_argument(fmt::format("cannot truncate target to {} modes", N));
  return {{x.begin(), x.begin() + N}, {y.begin(), y.begin() + N}, chi};
}

void BridgeTarget::validate(std::size_t J) const {
  check_length(x, J, "initial value x");
  check_length(y, J, "conditioning value y");
  for (std::size_t j = 0; j < J; ++j) {
    if (!std::isfinite(x[j]) || !std::isfinite(y[j])) throw std::invalid_argument("bridge target must be finite");
  }
}

double gain(std::size_t j, double t, const SpectralModel& model) {
  const double q = q_mode(j, t, model);
  const double d = denominator(j, model);
  return q * std::exp(-model.lambda(j) * (model.T() - t)) / d;
}

BridgeCoefficients::BridgeCoefficients(const SpectralModel& model, const TimeGrid& grid)
    : k(grid.size(), model.modes()), denom(model.modes()) {
  const auto J = static_cast<Eigen::Index>(model.modes());
  for (Eigen::Index j = 0; j < J; ++j) {
    denom(j) = denominator(static_cast<std::size_t>(j), model);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double t = grid[i];
      const double lam = model.lambda(j);
      k(static_cast<Eigen::Index>(i), j) =
          ou_variance(lam, model.mu(j), t) * std::exp(-lam * (model.T() - t)) / denom(j);
    }
  }
}

Eigen::MatrixXd conditional_mean(const SpectralModel& model, std::span<const double> obs_coeffs, const TimeGrid& grid) {
  check_length(obs_coeffs, model.modes(), "observation");
  const BridgeCoefficients coeffs(model, grid);
  Eigen::MatrixXd mean = coeffs.k;
  for (Eigen::Index j = 0; j < mean.cols(); ++j) mean.col(j) *= obs_coeffs[j];
  return mean;
}

Eigen::MatrixXd bridge_mean(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid) {
  target.validate(model.modes());
  const BridgeCoefficients coeffs(model, grid);
  Eigen::MatrixXd mean(grid.size(), model.modes());
  for (Eigen::Index j = 0; j < mean.cols(); ++j) {
    const double lam = model.lambda(j);
    const double miss = target.y[j] - std::exp(-lam * model.T()) * target.x[j];
    for (Eigen::Index i = 0; i < mean.rows(); ++i) {
      mean(i, j) = std::exp(-lam * grid[i]) * target.x[j] + coeffs.k(i, j) * miss;
    }
  }
  return mean;
}

double bridge_cov_mode(std::size_t j, double s, double t, const SpectralModel& model) {
  const double d = denominator(j, model);
  const double T = model.T();
  const double rst = cov_mode(j, s, t, model);
  const double rsT = cov_mode(j, s, T, model);
  const double rtT = cov_mode(j, t, T, model);
  return rst - rsT * rtT / d;
}

void bridge_path(const TransitionTable& table, const BridgeCoefficients& coeffs, const SpectralModel& model,
                 const BridgeTarget& target, std::uint64_t seed, std::uint64_t sample, std::span<double> out,
                 std::span<double> observation) {
  forward_path(table, target.x, seed, sample, out);
  const std::size_t J = model.modes();
  const std::size_t last = table.steps();
  for (std::size_t j = 0; j < J; ++j) {
    const double obs = out[last * J + j] + observation_coordinate(model.mu_tilde(j), seed, sample, j);
    if (!observation.empty()) observation[j] = obs;
    const double residual = obs - target.y[j];
    for (std::size_t i = 0; i <= last; ++i) {
      out[i * J + j] -= coeffs.k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * residual;
    }
  }
}

BridgeDraws sample_bridge_with_observation(const SpectralModel& model, const BridgeTarget& target,
                                           const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed) {
  target.validate(model.modes());
  const TransitionTable table(model, grid);
  const BridgeCoefficients coeffs(model, grid);
  BridgeDraws draws{PathEnsemble(grid, n_samples, model.modes(), PathEnsemble::Frame::Spectral, seed),
                    Eigen::MatrixXd(model.modes(), n_samples)};
  const auto n = static_cast<std::int64_t>(n_samples);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto su = static_cast<std::size_t>(s);
    bridge_path(table, coeffs, model, target, seed, su, draws.paths.sample(su),
                {draws.observation.col(s).data(), model.modes()});
  }
  draws.observation.transposeInPlace();
  return draws;
}

PathEnsemble sample_bridge(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid,
                           std::size_t n_samples, std::uint64_t seed) {
  target.validate(model.modes());
  const TransitionTable table(model, grid);
  const BridgeCoefficients coeffs(model, grid);
  PathEnsemble ens(grid, n_samples, model.modes(), PathEnsemble::Frame::Spectral, seed);
  const auto n = static_cast<std::int64_t>(n_samples);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto su = static_cast<std::size_t>(s);
    bridge_path(table, coeffs, model, target, seed, su, ens.sample(su));
  }
  return ens;
}

PathEnsemble sample_bridge_sequential(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid,
                                      std::size_t n_samples, std::uint64_t seed) {
  const Eigen::MatrixXd mean = bridge_mean(model, target, grid);
  const auto G = static_cast<Eigen::Index>(grid.size());
  const std::size_t J = model.modes();
  std::vector<Eigen::MatrixXd> factors(J);
  for (std::size_t j = 0; j < J; ++j) {
    Eigen::MatrixXd c(G, G);
    for (Eigen::Index a = 0; a < G; ++a) {
      for (Eigen::Index b = 0; b < G; ++b) c(a, b) = bridge_cov_mode(j, grid[a], grid[b], model);
    }
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    factors[j] = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  PathEnsemble ens(grid, n_samples, J, PathEnsemble::Frame::Spectral, seed);
  const auto n = static_cast<std::int64_t>(n_samples);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    Eigen::VectorXd xi(G);
    for (std::size_t j = 0; j < J; ++j) {
      rng::NormalSequence noise({seed, rng::Stream::Noise, static_cast<std::uint64_t>(s), static_cast<std::uint32_t>(j)});
      for (Eigen::Index i = 0; i < G; ++i) xi(i) = noise.next();
      const Eigen::VectorXd path = mean.col(static_cast<Eigen::Index>(j)) + factors[j] * xi;
      for (Eigen::Index i = 0; i < G; ++i) ens.at(static_cast<std::size_t>(s), static_cast<std::size_t>(i), j) = path(i);
    }
  }
  return ens;
}

SpectralModel truncate_bridge(const SpectralModel& model, std::size_t N) { return model.truncated(N); }

}  // namespace spdebridge
