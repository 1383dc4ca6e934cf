#include "spdebridge/forward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace spdebridge {

namespace {

void check_time(double t, double T, const char* what) {
  if (!(t >= 0.0) || t > T * (1.0 + 1e-12)) {
    throw std::invalid_argument(fmt::format("{} = {} outside [0, T = {}]", what, t, T));
  }
}

void check_mode(std::size_t j, const SpectralModel& model) {
  if (j >= model.modes()) {
    throw std::invalid_argument(fmt::format("mode index {} out of range (J = {})", j, model.modes()));
  }
}

}  // namespace

double ou_variance(double lambda, double mu, double t) {
  if (mu == 0.0 || t == 0.0) return 0.0;
  return mu * (-std::expm1(-2.0 * lambda * t)) / (2.0 * lambda);
}

double q_mode(std::size_t j, double t, const SpectralModel& model) {
  check_mode(j, model);
  check_time(t, model.T(), "t");
  return ou_variance(model.lambda(j), model.mu(j), t);
}

double cov_mode(std::size_t j, double s, double t, const SpectralModel& model) {
  check_mode(j, model);
  check_time(s, model.T(), "s");
  check_time(t, model.T(), "t");
  const double lo = std::min(s, t);
  return ou_variance(model.lambda(j), model.mu(j), lo) * std::exp(-model.lambda(j) * std::abs(t - s));
}

TransitionTable::TransitionTable(const SpectralModel& model, const TimeGrid& grid)
    : steps_(grid.size() - 1), modes_(model.modes()), decay_(steps_ * modes_), stddev_(steps_ * modes_) {
  if (std::abs(grid.T() - model.T()) > 1e-12 * model.T()) {
    throw std::invalid_argument(fmt::format("time grid ends at {}, model horizon is T = {}", grid.T(), model.T()));
  }
  for (std::size_t i = 0; i < steps_; ++i) {
    const double dt = grid[i + 1] - grid[i];
    for (std::size_t j = 0; j < modes_; ++j) {
      decay_[i * modes_ + j] = std::exp(-model.lambda(j) * dt);
      stddev_[i * modes_ + j] = std::sqrt(ou_variance(model.lambda(j), model.mu(j), dt));
    }
  }
}

void forward_path(const TransitionTable& table, std::span<const double> x, std::uint64_t seed,
                  std::uint64_t sample, std::span<double> out) {
  const std::size_t J = table.modes();
  for (std::size_t j = 0; j < J; ++j) {
    rng::NormalSequence noise({seed, rng::Stream::Noise, sample, static_cast<std::uint32_t>(j)});
    double c = x[j];
    out[j] = c;
    for (std::size_t i = 0; i < table.steps(); ++i) {
      c = table.decay(i, j) * c + table.stddev(i, j) * noise.next();
      out[(i + 1) * J + j] = c;
    }
  }
}

PathEnsemble sample_forward(const SpectralModel& model, std::span<const double> x, const TimeGrid& grid,
                            std::size_t n_samples, std::uint64_t seed) {
  if (x.size() != model.modes()) {
    throw std::invalid_argument(fmt::format("initial value has {} coefficients, model has {} modes", x.size(), model.modes()));
  }
  const TransitionTable table(model, grid);
  PathEnsemble ens(grid, n_samples, model.modes(), PathEnsemble::Frame::Spectral, seed);
  const auto n = static_cast<std::int64_t>(n_samples);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    forward_path(table, x, seed, static_cast<std::uint64_t>(s), ens.sample(static_cast<std::size_t>(s)));
  }
  return ens;
}

Eigen::MatrixXd sample_observation(const SpectralModel& model, std::size_t n_samples, std::uint64_t seed) {
  Eigen::MatrixXd z(n_samples, model.modes());
  const auto n = static_cast<std::int64_t>(n_samples);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < model.modes(); ++j) {
      z(s, static_cast<Eigen::Index>(j)) = observation_coordinate(model.mu_tilde(j), seed, static_cast<std::uint64_t>(s), j);
    }
  }
  return z;
}

}  // namespace spdebridge
