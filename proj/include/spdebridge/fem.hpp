#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spdebridge/bridge.hpp"
#include "spdebridge/model.hpp"
#include "spdebridge/paths.hpp"

namespace spdebridge {

/// Uniform mesh of (0, 1) with homogeneous Dirichlet conditions; only the
/// interior nodes carry degrees of freedom.
struct FemMesh {
  double h = 0.0;
  std::vector<double> nodes;
  std::size_t n_dof = 0;
};

/// Piecewise-linear Galerkin system: mass M, stiffness K and the
/// M-orthonormal generalized eigenpairs K psi = lambda_h M psi.
struct FemSystem {
  FemMesh mesh;
  Eigen::MatrixXd M;
  Eigen::MatrixXd K;
  Eigen::VectorXd eigvals_h;   // ascending
  Eigen::MatrixXd eigvecs_h;   // columns psi_k with psi^T M psi = I
  Eigen::LLT<Eigen::MatrixXd> mass_factor;

  std::size_t n_dof() const { return mesh.n_dof; }
};

/// Number of elements 1/h; rejects h whose reciprocal is not an integer >= 2.
std::size_t elements_for(double h);

FemSystem assemble(double h);

/// B_ij = <phi_i, e_j> with e_j = sqrt(2) sin(j pi x), from the closed-form
/// hat-function integral. n_dof x J.
Eigen::MatrixXd sine_load_matrix(const FemSystem& sys, std::size_t J);

/// L2 projection of an eigen-expansion onto V_h, returned as nodal values.
Eigen::VectorXd project_L2(std::span<const double> eigencoeffs, const FemSystem& sys);

/// L2 projection of a function, load vector by two-point Gauss quadrature per element.
Eigen::VectorXd project_L2(const std::function<double(double)>& f, const FemSystem& sys);

/// S_h(t) c = Psi e^{-Lambda_h t} Psi^T M c.
Eigen::VectorXd semigroup_h(double t, const Eigen::VectorXd& c, const FemSystem& sys);

/// ||sum_i c_i phi_i - sum_j u_j e_j||^2 computed exactly from M and B.
double l2_distance_squared(const FemSystem& sys, const Eigen::MatrixXd& B, const Eigen::VectorXd& nodal,
                           std::span<const double> eigencoeffs);

/// Discrete noise of P_h W and the discrete covariances Q_h(t), all in the
/// coordinates a = Psi^T M c of the M-orthonormal eigenframe.
class FemNoise {
 public:
  /// Requires J >= 4 n_dof so the sine representation of W resolves the mesh.
  FemNoise(const FemSystem& sys, const SpectralModel& model);

  const Eigen::MatrixXd& coupling() const { return coupling_; }  // Psi^T B, n x J
  const Eigen::MatrixXd& G() const { return G_; }                // coupling diag(mu) coupling^T
  const Eigen::VectorXd& eigvals() const { return eigvals_; }

  /// [Q_h(t)]_{kl} = G_kl (1 - e^{-(lambda_k + lambda_l) t}) / (lambda_k + lambda_l).
  Eigen::MatrixXd q_h(double t) const;

  /// Bridge gain Q_h(t) e^{-Lambda_h (T - t)} (Q_h(T) + eps I)^{-1}.
  Eigen::MatrixXd gain(double t, double T, double eps) const;

 private:
  Eigen::MatrixXd coupling_;
  Eigen::MatrixXd G_;
  Eigen::VectorXd eigvals_;
};

/// Exact joint transition over a step of length dt of the spectral modes and the
/// discrete modes driven by the same W. Given the spectral innovations d, the
/// discrete innovation is regression * d + residual_factor * eta with eta ~ N(0, I).
struct CoupledStep {
  Eigen::VectorXd decay_h;
  Eigen::MatrixXd regression;       // n x J
  Eigen::MatrixXd residual_factor;  // n x n
};

CoupledStep coupled_step(const FemNoise& noise, const SpectralModel& model, double dt);

/// Paths of one batch of samples from the coupled sampler.
struct CoupledBatch {
  std::size_t first = 0;
  std::size_t count = 0;
  std::vector<Eigen::MatrixXd> reference;            // per grid point: J x count (eigen-coefficients)
  std::vector<std::vector<Eigen::MatrixXd>> levels;  // per level, per grid point: n x count (eigenframe a)
};

/// Spectral reference solution and any number of finite element levels driven
/// by the same noise: the per-mode W innovations are the Stream::Noise variates
/// of the spectral samplers, <Z, e_j> are the Stream::Observation variates.
/// With an observation level eps the processes are bridges under Q~ = eps I.
class CoupledFemSampler {
 public:
  CoupledFemSampler(const SpectralModel& model, std::vector<const FemSystem*> levels, const TimeGrid& grid,
                    const BridgeTarget& target, std::optional<double> eps);

  CoupledBatch run(std::uint64_t first, std::size_t count, std::uint64_t seed) const;

  std::size_t level_count() const { return levels_.size(); }
  const FemSystem& system(std::size_t level) const { return *levels_[level].sys; }
  const FemNoise& noise(std::size_t level) const { return levels_[level].noise; }
  const SpectralModel& reference_model() const { return model_; }
  const TimeGrid& grid() const { return grid_; }

 private:
  struct Level {
    const FemSystem* sys;
    FemNoise noise;
    std::vector<CoupledStep> steps;        // distinct step lengths
    std::vector<std::size_t> step_of;      // grid step -> entry of steps
    std::vector<Eigen::MatrixXd> gains;    // per grid point, conditioned only
    Eigen::MatrixXd obs_residual_factor;   // (I - coupling coupling^T)^{1/2}
    Eigen::VectorXd x_a;
    Eigen::VectorXd y_a;
  };

  SpectralModel model_;
  TimeGrid grid_;
  BridgeTarget target_;
  std::optional<double> eps_;
  std::vector<Level> levels_;
  std::vector<double> decay_;   // steps x J
  std::vector<double> stddev_;  // steps x J
  Eigen::MatrixXd reference_gain_;  // grid x J
};

/// Exact samples of the semidiscrete FEM solution; nodal values.
PathEnsemble sample_forward_fem(const FemSystem& sys, const SpectralModel& model, std::span<const double> x,
                                const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed);

/// Exact samples of the FEM bridge under white observation noise eps I; nodal values.
PathEnsemble sample_bridge_fem(const FemSystem& sys, const SpectralModel& model, const BridgeTarget& target,
                               double eps, const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed);

/// Mean of the FEM bridge at the grid times, nodal values (grid x n_dof).
Eigen::MatrixXd fem_bridge_mean(const FemSystem& sys, const SpectralModel& model, const BridgeTarget& target,
                                double eps, const TimeGrid& grid);

/// Samples per batch handed to CoupledFemSampler::run by the ensemble helpers.
inline constexpr std::size_t kCoupledBatch = 32;

}  // namespace spdebridge
