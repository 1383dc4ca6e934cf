#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdebridge/bridge.hpp"
#include "spdebridge/fem.hpp"
#include "spdebridge/model.hpp"
#include "spdebridge/paths.hpp"

namespace spdebridge {

struct LevelResult {
  double level = 0.0;  // N or h
  double error = 0.0;
  double stderr_ = 0.0;  // 0 for exact curves
  std::size_t n_samples = 0;
};

struct ConvergenceReport {
  std::vector<LevelResult> levels;
  double slope = 0.0;
  double slope_se = 0.0;
  nlohmann::ordered_json metadata = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const;
  /// `level,error,stderr,n_samples`, one row per level.
  std::string to_csv() const;
};

/// OLS of log(error) against log(level). Requires >= 4 levels, positive errors
/// and strictly monotone levels; throws std::invalid_argument otherwise.
ConvergenceReport fit_rate(std::vector<LevelResult> levels);

/// Deterministic pairwise summation.
double pairwise_sum(std::span<const double> v);

/// Mean and jackknife standard error of g(mean(v)) for a smooth scalar g.
struct Estimate {
  double value = 0.0;
  double stderr_ = 0.0;
};
Estimate jackknife_power_mean(std::span<const double> v, double power);

struct ExactError {
  double error = 0.0;
  std::size_t argmax = 0;        // grid index of the maximum
  double tail_bound = 0.0;       // bound on the omitted variance sum_{j > J} mu_j / (2 lambda_j)
  double tail_ratio = 0.0;       // (sqrt(error^2 + tail_bound) - error) / error
};

/// Per-mode variance of the difference between the full and the N-mode bridge
/// for a mode j >= N at x = y = 0; with conditioned = false the forward variance q_j(t).
double truncation_variance(std::size_t j, double t, const SpectralModel& model, bool conditioned);

/// max over the grid of (sum_{j=N+1}^{J} v_j(t))^{1/2}. Throws std::invalid_argument
/// unless N <= J and target (if given) is zero.
ExactError exact_spectral_error(const SpectralModel& model, std::size_t N, const TimeGrid& grid,
                                bool conditioned = true, const BridgeTarget* target = nullptr);

/// (E[sup_i ||A(t_i) - B(t_i)||^p])^{1/p} with jackknife standard error. Spectral
/// ensembles of different width are compared with the missing modes taken as zero.
Estimate mc_sup_error(const PathEnsemble& a, const PathEnsemble& b, double p);

/// (E ||A(t_i) - B(t_i)||^p)^{1/p} at one grid time.
Estimate mc_pointwise_error(const PathEnsemble& a, const PathEnsemble& b, double p, std::size_t time_index);

/// sup-in-time L2 distance between a nodal FEM ensemble and a spectral ensemble,
/// evaluated exactly through the mass matrix and the sine load matrix.
Estimate mc_sup_error(const PathEnsemble& fem, const FemSystem& sys, const PathEnsemble& spectral, double p);

struct SpectralStudyConfig {
  CovarianceSpec covariance = CovarianceSpec::white();
  ObservationSpec observation = ObservationSpec::scaled_identity(1.0);
  std::size_t J = 2048;
  double T = 1.0;
  std::vector<std::size_t> ladder{4, 8, 16, 32, 64, 128, 256};
  std::size_t grid_points = 65;
  enum class Method { Exact, MonteCarlo } method = Method::Exact;
  bool conditioned = true;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  double p = 2.0;
  std::vector<double> x;  // empty = 0
  std::vector<double> y;
  double chi = 1.0;
};

/// Error of the N-mode spectral bridge against the J-mode one along the ladder.
/// Monte Carlo runs couple both through shared per-mode streams and report
/// (E sup_t ||.||^p)^{1/p}.
ConvergenceReport run_spectral_study(const SpectralStudyConfig& config);

/// Per-level comparison of the exact curve with the coupled Monte Carlo
/// estimate at the time where the exact curve peaks (x = y = 0).
struct SpectralAgreement {
  std::size_t N = 0;
  double exact = 0.0;
  double time = 0.0;
  Estimate mc_at_peak;
  Estimate mc_sup;
};
std::vector<SpectralAgreement> compare_spectral_mc_exact(const SpectralStudyConfig& config);

struct FemStudyConfig {
  CovarianceSpec covariance = CovarianceSpec::white();
  std::size_t J = 2048;
  double T = 1.0;
  std::vector<double> h{1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128};
  std::size_t grid_points = 65;
  std::optional<double> eps;  // set: bridge under eps I; unset: forward only
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
  double p = 2.0;
  std::vector<double> x;  // eigen-coefficients, empty = 0
  std::vector<double> y;
  double chi = 1.0;
};

/// Coupled Monte Carlo error of the FEM solution (or bridge) against the J-mode
/// spectral reference, (E sup_t ||X_h - X||^p)^{1/p}, for every h.
ConvergenceReport run_fem_study(const FemStudyConfig& config);

}  // namespace spdebridge
