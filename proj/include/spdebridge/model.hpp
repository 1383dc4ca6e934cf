#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spdebridge {

/// Hilbert-Schmidt embedding exponent used for the default observation space.
/// Only bookkeeping depends on it; sample values never do.
inline constexpr double kZeta = 0.5 + 1e-3;

/// Covariance family of the driving noise, diagonal in the sine eigenbasis.
struct CovarianceSpec {
  enum class Kind { White, Power };

  Kind kind = Kind::White;
  double s = 0.0;      // Power: mu_j = scale * lambda_j^{-s}
  double scale = 1.0;

  static CovarianceSpec white() { return {}; }
  static CovarianceSpec power(double s, double scale = 1.0) { return {Kind::Power, s, scale}; }

  void validate() const;
  double eigenvalue(double lambda) const;
};

/// Covariance family of the observation noise Z and the observation-space exponent eta.
struct ObservationSpec {
  enum class Kind { ScaledIdentity, Power };

  Kind kind = Kind::ScaledIdentity;
  double eps = 1.0;
  double a = 0.0;  // Power: mu_tilde_j = eps * lambda_j^{-a}
  double eta = -kZeta;

  static ObservationSpec scaled_identity(double eps, double eta = -kZeta) {
    return {Kind::ScaledIdentity, eps, 0.0, eta};
  }
  static ObservationSpec power(double eps, double a, double eta = -kZeta) {
    return {Kind::Power, eps, a, eta};
  }

  void validate() const;
  double eigenvalue(double lambda) const;
  /// Smallest alpha with inf_j lambda_j^alpha mu_tilde_j > 0.
  double alpha() const { return kind == Kind::Power ? a : 0.0; }
};

/// Spectral data of the linear SPDE dX = -AX dt + dW observed through X(T) + Z.
///
/// Mode j (0-based) has eigenvalue lambda[j] of A, eigenvalue mu[j] of Q and
/// eigenvalue mu_tilde[j] of the observation covariance. Immutable.
class SpectralModel {
 public:
  SpectralModel(std::vector<double> lambda, std::vector<double> mu, std::vector<double> mu_tilde,
                double T, double eta);

  std::size_t modes() const { return lambda_.size(); }
  double T() const { return T_; }
  double eta() const { return eta_; }
  std::span<const double> lambda() const { return lambda_; }
  std::span<const double> mu() const { return mu_; }
  std::span<const double> mu_tilde() const { return mu_tilde_; }
  double lambda(std::size_t j) const { return lambda_[j]; }
  double mu(std::size_t j) const { return mu_[j]; }
  double mu_tilde(std::size_t j) const { return mu_tilde_[j]; }

  /// Families the spectra were built from; empty for user-supplied spectra.
  const std::optional<CovarianceSpec>& covariance() const { return covariance_; }
  const std::optional<ObservationSpec>& observation() const { return observation_; }

  /// First N modes; the families (if any) carry over.
  SpectralModel truncated(std::size_t N) const;
  SpectralModel with_eta(double eta) const;
  /// Same operator and noise with the observation covariance replaced.
  SpectralModel with_observation(const ObservationSpec& observation) const;
  /// Same operator and noise, exact observation (mu_tilde = 0).
  SpectralModel without_observation_noise() const;

  friend SpectralModel build_model(const CovarianceSpec&, const ObservationSpec&, std::size_t, double);

 private:
  std::vector<double> lambda_;
  std::vector<double> mu_;
  std::vector<double> mu_tilde_;
  double T_;
  double eta_;
  std::optional<CovarianceSpec> covariance_;
  std::optional<ObservationSpec> observation_;
};

/// Eigenvalues (pi (j+1))^2 of the Dirichlet Laplacian on (0, 1).
std::vector<double> dirichlet_eigenvalues(std::size_t J);

/// Model with the Dirichlet Laplacian on (0, 1) truncated at J modes.
SpectralModel build_model(const CovarianceSpec& covariance, const ObservationSpec& observation,
                          std::size_t J, double T);

/// Suprema of the admissible regularity exponents and the resulting rate bound.
struct RegularityBudget {
  double beta_sup = 0.0;  // Hilbert-Schmidt regularity of the noise
  double rho_sup = 0.0;   // smoothing regularity of the stochastic convolution at T
  double alpha = 0.0;     // observation-noise lower bound exponent
  double zeta = kZeta;
  double chi = 0.0;       // declared smoothness of the initial value
  double rate_sup = 0.0;  // min(rho_sup - alpha, beta_sup, chi)
  bool analytic = true;   // false when obtained from the numerical probe
  std::vector<std::string> diagnostics;
};

RegularityBudget check_assumptions(const SpectralModel& model, double chi);

/// (sum_j lambda_j^r c_j^2)^{1/2}, the norm of the fractional-power space of order r.
double hdot_norm(std::span<const double> coeffs, std::span<const double> lambda, double r);

}  // namespace spdebridge
