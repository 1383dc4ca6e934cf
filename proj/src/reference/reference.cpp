#include "spdebridge/reference.hpp"

#include <cmath>
#include <stdexcept>

#include "spdebridge/forward.hpp"
#include "spdebridge/rng.hpp"

namespace spdebridge::reference {

PathEnsemble sample_forward(const SpectralModel& model, std::span<const double> x, const TimeGrid& grid,
                            std::size_t n_samples, std::uint64_t seed) {
  if (x.size() != model.modes()) throw std::invalid_argument("initial value length does not match the model");
  if (std::abs(grid.T() - model.T()) > 1e-12 * model.T()) throw std::invalid_argument("grid does not end at T");
  PathEnsemble ens(grid, n_samples, model.modes(), PathEnsemble::Frame::Spectral, seed);
  for (std::size_t j = 0; j < model.modes(); ++j) {
    const double lam = model.lambda(j);
    for (std::size_t s = 0; s < n_samples; ++s) {
      const rng::StreamKey key{seed, rng::Stream::Noise, s, static_cast<std::uint32_t>(j)};
      ens.at(s, 0, j) = x[j];
      for (std::size_t i = 1; i < grid.size(); ++i) {
        const double dt = grid[i] - grid[i - 1];
        const double sd = std::sqrt(ou_variance(lam, model.mu(j), dt));
        ens.at(s, i, j) = std::exp(-lam * dt) * ens.at(s, i - 1, j) + sd * rng::normal(key, i - 1);
      }
    }
  }
  return ens;
}

PathEnsemble sample_bridge(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid,
                           std::size_t n_samples, std::uint64_t seed) {
  target.validate(model.modes());
  PathEnsemble ens = reference::sample_forward(model, target.x, grid, n_samples, seed);
  const std::size_t last = grid.size() - 1;
  for (std::size_t j = 0; j < model.modes(); ++j) {
    for (std::size_t s = 0; s < n_samples; ++s) {
      const double z = observation_coordinate(model.mu_tilde(j), seed, s, j);
      const double residual = ens.at(s, last, j) + z - target.y[j];
      for (std::size_t i = 0; i <= last; ++i) ens.at(s, i, j) -= gain(j, grid[i], model) * residual;
    }
  }
  return ens;
}

PathEnsemble sample_bridge_fem(const FemSystem& sys, const SpectralModel& model, const BridgeTarget& target,
                               double eps, const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed) {
  const CoupledFemSampler sampler(model, {&sys}, grid, target, eps);
  const CoupledBatch batch = sampler.run(0, n_samples, seed);
  PathEnsemble ens(grid, n_samples, sys.n_dof(), PathEnsemble::Frame::Nodal, seed);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t s = 0; s < n_samples; ++s) {
      const Eigen::VectorXd nodal = sys.eigvecs_h * batch.levels[0][i].col(static_cast<Eigen::Index>(s));
      for (std::size_t k = 0; k < sys.n_dof(); ++k) ens.at(s, i, k) = nodal(static_cast<Eigen::Index>(k));
    }
  }
  return ens;
}

}  // namespace spdebridge::reference
