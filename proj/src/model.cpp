#include "spdebridge/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace spdebridge {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Least-squares slope of log(y) against log(x) over the upper half of the
// spectrum; used to read off power-law decay of user-supplied spectra.
std::optional<double> tail_loglog_slope(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 8) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t j = n / 2; j < n; ++j) {
    if (!(x[j] > 0) || !(y[j] > 0)) return std::nullopt;
    const double lx = std::log(x[j]);
    const double ly = std::log(y[j]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  const double den = m * sxx - sx * sx;
  if (!(std::abs(den) > 0)) return std::nullopt;
  return (m * sxy - sx * sy) / den;
}

}  // namespace

void CovarianceSpec::validate() const {
  if (kind == Kind::Power && !(s >= 0.0 && scale > 0.0 && std::isfinite(s) && std::isfinite(scale))) {
    throw std::invalid_argument(fmt::format("power covariance needs s >= 0 and scale > 0 (got s={}, scale={})", s, scale));
  }
}

double CovarianceSpec::eigenvalue(double lambda) const {
  return kind == Kind::White ? 1.0 : scale * std::pow(lambda, -s);
}

void ObservationSpec::validate() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw std::invalid_argument(fmt::format("observation noise needs eps > 0 (got {})", eps));
  }
  if (kind == Kind::Power && !(a >= 0.0 && std::isfinite(a))) {
    throw std::invalid_argument(fmt::format("power observation noise needs a >= 0 (got {})", a));
  }
  if (!std::isfinite(eta)) throw std::invalid_argument("eta must be finite");
}

double ObservationSpec::eigenvalue(double lambda) const {
  return kind == Kind::ScaledIdentity ? eps : eps * std::pow(lambda, -a);
}

SpectralModel::SpectralModel(std::vector<double> lambda, std::vector<double> mu,
                             std::vector<double> mu_tilde, double T, double eta)
    : lambda_(std::move(lambda)), mu_(std::move(mu)), mu_tilde_(std::move(mu_tilde)), T_(T), eta_(eta) {
  if (lambda_.empty()) throw std::invalid_argument("model needs at least one mode");
  if (mu_.size() != lambda_.size() || mu_tilde_.size() != lambda_.size()) {
    throw std::invalid_argument(fmt::format("spectra lengths differ: lambda {}, mu {}, mu_tilde {}",
                                            lambda_.size(), mu_.size(), mu_tilde_.size()));
  }
  if (!(T_ > 0.0) || !std::isfinite(T_)) throw std::invalid_argument(fmt::format("T must be positive (got {})", T_));
  if (!std::isfinite(eta_)) throw std::invalid_argument("eta must be finite");
  for (std::size_t j = 0; j < lambda_.size(); ++j) {
    if (!(lambda_[j] > 0.0) || !std::isfinite(lambda_[j])) {
      throw std::invalid_argument(fmt::format("lambda[{}] = {} is not positive", j, lambda_[j]));
    }
    if (j > 0 && lambda_[j] < lambda_[j - 1]) {
      throw std::invalid_argument(fmt::format("lambda decreases at mode {}", j));
    }
    if (!(mu_[j] >= 0.0) || !std::isfinite(mu_[j])) {
      throw std::invalid_argument(fmt::format("mu[{}] = {} is negative", j, mu_[j]));
    }
    if (!(mu_tilde_[j] >= 0.0) || !std::isfinite(mu_tilde_[j])) {
      throw std::invalid_argument(fmt::format("mu_tilde[{}] = {} is negative", j, mu_tilde_[j]));
    }
  }
}

SpectralModel SpectralModel::truncated(std::size_t N) const {
  if (N < 1 || N > modes()) {
    throw std::invalid_argument(fmt::format("truncation level {} outside [1, {}]", N, modes()));
  }
  SpectralModel out({lambda_.begin(), lambda_.begin() + N}, {mu_.begin(), mu_.begin() + N},
                    {mu_tilde_.begin(), mu_tilde_.begin() + N}, T_, eta_);
  out.covariance_ = covariance_;
  out.observation_ = observation_;
  return out;
}

SpectralModel SpectralModel::with_eta(double eta) const {
  SpectralModel out = *this;
  if (!std::isfinite(eta)) throw std::invalid_argument("eta must be finite");
  out.eta_ = eta;
  if (out.observation_) out.observation_->eta = eta;
  return out;
}

SpectralModel SpectralModel::with_observation(const ObservationSpec& observation) const {
  observation.validate();
  std::vector<double> mt(modes());
  for (std::size_t j = 0; j < modes(); ++j) mt[j] = observation.eigenvalue(lambda_[j]);
  SpectralModel out(lambda_, mu_, std::move(mt), T_, observation.eta);
  out.covariance_ = covariance_;
  out.observation_ = observation;
  return out;
}

SpectralModel SpectralModel::without_observation_noise() const {
  SpectralModel out(lambda_, mu_, std::vector<double>(modes(), 0.0), T_, eta_);
  out.covariance_ = covariance_;
  return out;
}

std::vector<double> dirichlet_eigenvalues(std::size_t J) {
  std::vector<double> lambda(J);
  for (std::size_t j = 0; j < J; ++j) {
    const double k = std::numbers::pi * static_cast<double>(j + 1);
    lambda[j] = k * k;
  }
  return lambda;
}

SpectralModel build_model(const CovarianceSpec& covariance, const ObservationSpec& observation,
                          std::size_t J, double T) {
  if (J == 0) throw std::invalid_argument("J must be at least 1");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument(fmt::format("T must be positive (got {})", T));
  covariance.validate();
  observation.validate();
  auto lambda = dirichlet_eigenvalues(J);
  std::vector<double> mu(J), mu_tilde(J);
  for (std::size_t j = 0; j < J; ++j) {
    mu[j] = covariance.eigenvalue(lambda[j]);
    mu_tilde[j] = observation.eigenvalue(lambda[j]);
  }
  SpectralModel model(std::move(lambda), std::move(mu), std::move(mu_tilde), T, observation.eta);
  model.covariance_ = covariance;
  model.observation_ = observation;
  return model;
}

RegularityBudget check_assumptions(const SpectralModel& model, double chi) {
  RegularityBudget budget;
  budget.chi = chi;

  if (model.covariance()) {
    const auto& q = *model.covariance();
    const double s = q.kind == CovarianceSpec::Kind::White ? 0.0 : q.s;
    // sum_j lambda_j^{beta-1} mu_j < inf  <=>  2(beta - 1 - s) < -1 for lambda_j ~ j^2.
    budget.beta_sup = 0.5 + s;
    // sup_j lambda_j^{rho-1} mu_j < inf  <=>  rho <= 1 + s.
    budget.rho_sup = 1.0 + s;
  } else {
    // Numerical probe: fit mu ~ lambda^{-s} and lambda ~ j^d over the upper half
    // of the retained modes. Only the retained truncation is inspected.
    budget.analytic = false;
    std::vector<double> index(model.modes());
    for (std::size_t j = 0; j < index.size(); ++j) index[j] = static_cast<double>(j + 1);
    const auto growth = tail_loglog_slope(index, model.lambda());
    const bool all_zero = std::all_of(model.mu().begin() + model.modes() / 2, model.mu().end(),
                                      [](double m) { return m == 0.0; });
    const auto decay = tail_loglog_slope(model.lambda(), model.mu());
    if (all_zero) {
      budget.beta_sup = kInf;
      budget.rho_sup = kInf;
    } else if (growth && decay && *growth > 0) {
      const double s = -*decay;
      budget.beta_sup = 1.0 + s - 1.0 / *growth;
      budget.rho_sup = 1.0 + s;
    } else {
      budget.beta_sup = 0.0;
      budget.rho_sup = 0.0;
      budget.diagnostics.emplace_back("summability probe inconclusive (need >= 8 modes with positive spectra)");
    }
  }

  if (model.observation()) {
    budget.alpha = model.observation()->alpha();
  } else {
    const bool any_zero = std::any_of(model.mu_tilde().begin(), model.mu_tilde().end(),
                                      [](double m) { return m == 0.0; });
    const auto decay = tail_loglog_slope(model.lambda(), model.mu_tilde());
    if (any_zero) {
      budget.alpha = kInf;
      budget.diagnostics.emplace_back("observation covariance has zero eigenvalues; no finite alpha");
    } else {
      budget.alpha = decay ? std::max(0.0, -*decay) : 0.0;
    }
  }

  budget.rate_sup = std::min({budget.rho_sup - budget.alpha, budget.beta_sup, chi});
  if (budget.beta_sup > budget.rho_sup) {
    budget.diagnostics.emplace_back("beta_sup exceeds rho_sup; spectra inconsistent with the smoothing bound");
  }
  if (budget.alpha > budget.rho_sup) {
    budget.diagnostics.emplace_back(fmt::format(
        "alpha = {} exceeds rho_sup = {}: the rate theorem's hypothesis alpha < rho fails", budget.alpha, budget.rho_sup));
  } else if (budget.alpha == budget.rho_sup) {
    budget.diagnostics.emplace_back(fmt::format(
        "warning: alpha = rho_sup = {}; boundary case, the rate theorem needs alpha < rho strictly", budget.alpha));
  }
  if (!(budget.rate_sup > 0.0)) {
    budget.diagnostics.emplace_back(fmt::format("rate_sup = {} is not positive", budget.rate_sup));
  }
  return budget;
}

double hdot_norm(std::span<const double> coeffs, std::span<const double> lambda, double r) {
  if (coeffs.size() != lambda.size()) {
    throw std::invalid_argument(fmt::format("coeffs ({}) and lambda ({}) differ in length", coeffs.size(), lambda.size()));
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < coeffs.size(); ++j) {
    sum += std::pow(lambda[j], r) * coeffs[j] * coeffs[j];
  }
  return std::sqrt(sum);
}

}  // namespace spdebridge
