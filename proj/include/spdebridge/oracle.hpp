#pragma once

// Brute-force verifiers. Nothing in here shares a code path with the closed-form
// bridge formulas beyond the two-time covariance of the free process.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spdebridge/bridge.hpp"
#include "spdebridge/fem.hpp"
#include "spdebridge/model.hpp"
#include "spdebridge/paths.hpp"

namespace spdebridge::oracle {

struct CoordinateLabel {
  enum class Kind { State, Observation };
  Kind kind = Kind::State;
  double time = 0.0;
  std::size_t index = 0;  // eigenmode or node
};

/// Finite-dimensional Gaussian with labelled coordinates.
struct JointGaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::vector<CoordinateLabel> labels;

  Eigen::Index size() const { return mean.size(); }
  /// Throws NumericalError unless cov is symmetric (1e-12) and PSD (eigenvalues >= -1e-10 trace).
  void validate() const;
};

/// Joint law of (<X(t_i), e_j>)_i and the observation <X(T) + Z, e_j> for each
/// requested mode; per mode the grid states come first, then the observation.
/// Block diagonal across modes. Means use target.x when given, else zero.
JointGaussian assemble_joint(const SpectralModel& model, const TimeGrid& grid, std::span<const std::size_t> modes,
                             const BridgeTarget* target = nullptr);

/// Gaussian conditioning by Schur complement. The result keeps every coordinate;
/// observed ones are pinned to `values` with zero variance.
JointGaussian condition(const JointGaussian& joint, std::span<const Eigen::Index> observed,
                        std::span<const double> values);

/// Moore-Penrose pseudoinverse by SVD, singular values below 1e-12 sigma_max dropped.
Eigen::MatrixXd pseudoinverse(const Eigen::MatrixXd& a);

struct RangeReport {
  bool included = false;           // range(A1) inside range(A2)
  double C_est = 0.0;              // max ||A1^T u|| / ||A2^T u|| over the probes
  bool unbounded_ratio = false;    // witnessed u with A2^T u = 0 and A1^T u != 0
  double max_residual = 0.0;       // worst relative residual of A2 w = A1 v
  bool inverse_bound_holds = false;  // ||A2^+ u|| <= C_est ||A1^+ u|| on range(A1) probes
  double max_inverse_ratio = 0.0;
  int probes = 0;
};

/// Probes the norm domination ||A1^T u|| <= C ||A2^T u|| and the equivalent range
/// inclusion; with inclusion also checks ||A2^+ u|| <= C ||A1^+ u|| for u in range(A1).
RangeReport check_range_domination(const Eigen::MatrixXd& a1, const Eigen::MatrixXd& a2, int trials = 64,
                                   std::uint64_t seed = 0);

/// int_0^t mu_j e^{-2 lambda_j s} ds by adaptive Gauss-Kronrod (15 points),
/// relative tolerance 1e-12. Throws NumericalError if the error estimate misses it.
double quad_covariance(std::size_t j, double t, const SpectralModel& model);

/// Joint law of the FEM solution in nodal coordinates at the grid times and the
/// nodal observation X_h(T) + P_h Z with Cov(P_h Z) = eps M^{-1}. The covariance
/// comes from matrix exponentials of -M^{-1}K (Van Loan), independent of the
/// eigen-decomposition used by the samplers. Layout: n nodes per grid time, then n observation nodes.
JointGaussian assemble_joint_fem(const FemSystem& sys, const SpectralModel& model, double eps, const TimeGrid& grid,
                                 const BridgeTarget& target);

}  // namespace spdebridge::oracle
