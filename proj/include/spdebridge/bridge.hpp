#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spdebridge/forward.hpp"
#include "spdebridge/model.hpp"
#include "spdebridge/paths.hpp"

namespace spdebridge {

/// Initial value x and conditioning value y as eigen-coefficients. Any finite
/// coefficient vector is admissible.
struct BridgeTarget {
  std::vector<double> x;
  std::vector<double> y;
  double chi = 1.0;  // declared smoothness of x, bookkeeping only

  static BridgeTarget zero(std::size_t J) { return {std::vector<double>(J, 0.0), std::vector<double>(J, 0.0), 1.0}; }
  BridgeTarget truncated(std::size_t N) const;
  void validate(std::size_t J) const;
};

/// Bridge gain in H-coordinates,
///   k_j(t) = q_j(t) e^{-lambda_j (T - t)} / (q_j(T) + mu_tilde_j).
/// The lambda_j^eta weights of the observation space cancel, so eta does not
/// enter. Throws NumericalError when q_j(T) + mu_tilde_j = 0.
double gain(std::size_t j, double t, const SpectralModel& model);

/// Gains on a grid plus the per-mode denominators q_j(T) + mu_tilde_j.
struct BridgeCoefficients {
  BridgeCoefficients(const SpectralModel& model, const TimeGrid& grid);

  Eigen::MatrixXd k;      // grid points x modes
  Eigen::VectorXd denom;  // modes
};

/// E[X^0(t_i) | X^0(T) + Z = obs] in eigen-coefficients (grid points x modes).
Eigen::MatrixXd conditional_mean(const SpectralModel& model, std::span<const double> obs_coeffs, const TimeGrid& grid);

/// Mean of the bridge: e^{-lambda t} x + k(t) (y - e^{-lambda T} x), grid points x modes.
Eigen::MatrixXd bridge_mean(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid);

/// Cov(b_j(s), b_j(t)) = r_j(s,t) - r_j(s,T) r_j(t,T) / (q_j(T) + mu_tilde_j).
double bridge_cov_mode(std::size_t j, double s, double t, const SpectralModel& model);

/// Bridge path of one sample: forward path minus the gain times the
/// observation residual X(T) + Z - y. `observation`, when non-empty, receives
/// the per-mode X_j(T) + z_j.
void bridge_path(const TransitionTable& table, const BridgeCoefficients& coeffs, const SpectralModel& model,
                 const BridgeTarget& target, std::uint64_t seed, std::uint64_t sample, std::span<double> out,
                 std::span<double> observation = {});

/// Exact samples of the SPDE bridge with observation noise.
PathEnsemble sample_bridge(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid,
                           std::size_t n_samples, std::uint64_t seed);

struct BridgeDraws {
  PathEnsemble paths;
  Eigen::MatrixXd observation;  // samples x modes, X_j(T) + z_j
};

/// As sample_bridge, also returning the observation functional of each sample.
BridgeDraws sample_bridge_with_observation(const SpectralModel& model, const BridgeTarget& target,
                                           const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed);

/// Cross-check sampler: draws each mode directly from the bridge mean and the
/// bridge_cov_mode kernel on the grid. Same law as sample_bridge, different paths.
PathEnsemble sample_bridge_sequential(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid,
                                      std::size_t n_samples, std::uint64_t seed);

/// Spectral Galerkin truncation onto the first N modes. Sampling the truncated
/// model with the same seed reproduces the first N coordinates of the full run.
SpectralModel truncate_bridge(const SpectralModel& model, std::size_t N);

}  // namespace spdebridge
