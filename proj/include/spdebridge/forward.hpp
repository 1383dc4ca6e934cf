#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spdebridge/model.hpp"
#include "spdebridge/paths.hpp"
#include "spdebridge/rng.hpp"

namespace spdebridge {

/// mu (1 - e^{-2 lambda t}) / (2 lambda), evaluated without cancellation for
/// small lambda t.
double ou_variance(double lambda, double mu, double t);

/// Variance q_j(t) of <X^0(t), e_j>; j is 0-based.
double q_mode(std::size_t j, double t, const SpectralModel& model);

/// Cov(<X^0(s), e_j>, <X^0(t), e_j>) = q_j(min(s,t)) e^{-lambda_j |t - s|}.
double cov_mode(std::size_t j, double s, double t, const SpectralModel& model);

/// Exact per-mode OU transition over each grid step: decay e^{-lambda_j dt}
/// and innovation standard deviation sqrt(q_j(dt)). Step-major storage.
class TransitionTable {
 public:
  TransitionTable(const SpectralModel& model, const TimeGrid& grid);

  std::size_t steps() const { return steps_; }
  std::size_t modes() const { return modes_; }
  double decay(std::size_t step, std::size_t j) const { return decay_[step * modes_ + j]; }
  double stddev(std::size_t step, std::size_t j) const { return stddev_[step * modes_ + j]; }

 private:
  std::size_t steps_;
  std::size_t modes_;
  std::vector<double> decay_;
  std::vector<double> stddev_;
};

/// Writes one forward path (grid x modes, row-major) for sample `sample`.
/// The innovation of mode j at step i is normal number i of
/// (seed, Stream::Noise, sample, j).
void forward_path(const TransitionTable& table, std::span<const double> x, std::uint64_t seed,
                  std::uint64_t sample, std::span<double> out);

/// Exact samples of the mild solution started at x (eigen-coefficients).
/// OpenMP-parallel over samples; output is independent of the thread count.
PathEnsemble sample_forward(const SpectralModel& model, std::span<const double> x, const TimeGrid& grid,
                            std::size_t n_samples, std::uint64_t seed);

/// <Z, e_j> ~ N(0, mu_tilde_j) for each sample (rows) and mode (columns), from
/// Stream::Observation, independent of the noise streams.
Eigen::MatrixXd sample_observation(const SpectralModel& model, std::size_t n_samples, std::uint64_t seed);

/// Single observation coordinate, shared by every sampler that needs z_j.
inline double observation_coordinate(double mu_tilde, std::uint64_t seed, std::uint64_t sample, std::size_t j) {
  if (mu_tilde == 0.0) return 0.0;
  return std::sqrt(mu_tilde) *
         rng::normal({seed, rng::Stream::Observation, sample, static_cast<std::uint32_t>(j)}, 0);
}

}  // namespace spdebridge
