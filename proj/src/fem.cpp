#include "spdebridge/fem.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "spdebridge/errors.hpp"

namespace spdebridge {

namespace {

// (1 - e^{-a t}) / a, the integral of e^{-a s} over [0, t].
double decay_integral(double a, double t) {
  if (t == 0.0) return 0.0;
  return -std::expm1(-a * t) / a;
}

}  // namespace

std::size_t elements_for(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw std::invalid_argument(fmt::format("mesh width h = {} must be positive", h));
  const double r = 1.0 / h;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-9 * r || n < 2.0) {
    throw std::invalid_argument(fmt::format("1/h = {} must be an integer >= 2", r));
  }
  return static_cast<std::size_t>(n);
}

FemSystem assemble(double h) {
  const std::size_t n_el = elements_for(h);
  const std::size_t n = n_el - 1;
  const double hh = 1.0 / static_cast<double>(n_el);

  FemSystem sys;
  sys.mesh.h = hh;
  sys.mesh.n_dof = n;
  sys.mesh.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) sys.mesh.nodes[i] = static_cast<double>(i + 1) / static_cast<double>(n_el);

  const auto N = static_cast<Eigen::Index>(n);
  sys.M = Eigen::MatrixXd::Zero(N, N);
  sys.K = Eigen::MatrixXd::Zero(N, N);
  for (Eigen::Index i = 0; i < N; ++i) {
    sys.M(i, i) = 2.0 * hh / 3.0;
    sys.K(i, i) = 2.0 / hh;
    if (i + 1 < N) {
      sys.M(i, i + 1) = sys.M(i + 1, i) = hh / 6.0;
      sys.K(i, i + 1) = sys.K(i + 1, i) = -1.0 / hh;
    }
  }
  sys.mass_factor.compute(sys.M);
  if (sys.mass_factor.info() != Eigen::Success) throw NumericalError("mass matrix Cholesky failed");

  const Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sys.K, sys.M);
  if (ges.info() != Eigen::Success) throw NumericalError("generalized eigensolver failed");
  sys.eigvals_h = ges.eigenvalues();
  sys.eigvecs_h = ges.eigenvectors();
  // Fix signs so psi_k matches sin(k pi x) near the left boundary.
  for (Eigen::Index k = 0; k < N; ++k) {
    if (sys.eigvecs_h(0, k) < 0.0) sys.eigvecs_h.col(k) *= -1.0;
  }
  return sys;
}

Eigen::MatrixXd sine_load_matrix(const FemSystem& sys, std::size_t J) {
  const std::size_t n = sys.n_dof();
  const std::size_t n_el = n + 1;
  const double h = sys.mesh.h;
  Eigen::MatrixXd B(n, J);
  for (std::size_t j = 0; j < J; ++j) {
    const double omega = std::numbers::pi * static_cast<double>(j + 1);
    const double half = std::sin(0.5 * omega * h);
    // int phi_i(x) sin(omega x) dx = sin(omega x_i) 2 (1 - cos(omega h)) / (omega^2 h)
    const double weight = std::numbers::sqrt2 * 4.0 * half * half / (omega * omega * h);
    for (std::size_t i = 0; i < n; ++i) {
      // sin(j pi x_i) with the argument reduced exactly: x_i = (i+1)/n_el.
      const std::size_t phase = ((j + 1) * (i + 1)) % (2 * n_el);
      const double s = std::sin(std::numbers::pi * static_cast<double>(phase) / static_cast<double>(n_el));
      B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = weight * s;
    }
  }
  return B;
}

Eigen::VectorXd project_L2(std::span<const double> eigencoeffs, const FemSystem& sys) {
  const Eigen::MatrixXd B = sine_load_matrix(sys, eigencoeffs.size());
  const Eigen::Map<const Eigen::VectorXd> u(eigencoeffs.data(), static_cast<Eigen::Index>(eigencoeffs.size()));
  return sys.mass_factor.solve(B * u);
}

Eigen::VectorXd project_L2(const std::function<double(double)>& f, const FemSystem& sys) {
  const std::size_t n = sys.n_dof();
  const double h = sys.mesh.h;
  const double offset = h / (2.0 * std::numbers::sqrt3);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t e = 0; e <= n; ++e) {
    const double left = static_cast<double>(e) * h;
    const double mid = left + 0.5 * h;
    for (const double xi : {mid - offset, mid + offset}) {
      const double v = f(xi);
      if (std::isnan(v)) throw std::invalid_argument(fmt::format("function returned NaN at x = {}", xi));
      const double w = 0.5 * h * v;
      const double local = (xi - left) / h;  // rising hat of node e, falling hat of node e-1
      if (e < n) b(static_cast<Eigen::Index>(e)) += w * local;
      if (e > 0) b(static_cast<Eigen::Index>(e - 1)) += w * (1.0 - local);
    }
  }
  return sys.mass_factor.solve(b);
}

Eigen::VectorXd semigroup_h(double t, const Eigen::VectorXd& c, const FemSystem& sys) {
  if (!(t >= 0.0)) throw std::invalid_argument("semigroup time must be nonnegative");
  const Eigen::VectorXd a = sys.eigvecs_h.transpose() * (sys.M * c);
  return sys.eigvecs_h * (a.array() * (-t * sys.eigvals_h.array()).exp()).matrix();
}

double l2_distance_squared(const FemSystem& sys, const Eigen::MatrixXd& B, const Eigen::VectorXd& nodal,
                           std::span<const double> eigencoeffs) {
  const Eigen::Map<const Eigen::VectorXd> u(eigencoeffs.data(), static_cast<Eigen::Index>(eigencoeffs.size()));
  return nodal.dot(sys.M * nodal) - 2.0 * nodal.dot(B * u) + u.squaredNorm();
}

FemNoise::FemNoise(const FemSystem& sys, const SpectralModel& model) : eigvals_(sys.eigvals_h) {
  const std::size_t n = sys.n_dof();
  if (model.modes() < 4 * n) {
    throw std::invalid_argument(fmt::format(
        "J = {} modes under-resolve the noise on a mesh with {} nodes (need J >= {})", model.modes(), n, 4 * n));
  }
  coupling_ = sys.eigvecs_h.transpose() * sine_load_matrix(sys, model.modes());
  const Eigen::Map<const Eigen::VectorXd> mu(model.mu().data(), static_cast<Eigen::Index>(model.modes()));
  G_ = coupling_ * mu.asDiagonal() * coupling_.transpose();
}

Eigen::MatrixXd FemNoise::q_h(double t) const {
  const auto n = G_.rows();
  Eigen::MatrixXd q(n, n);
  for (Eigen::Index l = 0; l < n; ++l) {
    for (Eigen::Index k = 0; k < n; ++k) q(k, l) = G_(k, l) * decay_integral(eigvals_(k) + eigvals_(l), t);
  }
  return q;
}

Eigen::MatrixXd FemNoise::gain(double t, double T, double eps) const {
  Eigen::MatrixXd S = q_h(T);
  S.diagonal().array() += eps;
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  if (llt.info() != Eigen::Success) throw NumericalError("Q_h(T) + eps I is not positive definite");
  const Eigen::VectorXd e = (-(T - t) * eigvals_.array()).exp();
  const Eigen::MatrixXd rhs = e.asDiagonal() * q_h(t);
  return llt.solve(rhs).transpose();
}

CoupledStep coupled_step(const FemNoise& noise, const SpectralModel& model, double dt) {
  const auto n = noise.G().rows();
  const auto J = static_cast<Eigen::Index>(model.modes());
  const Eigen::VectorXd& lam_h = noise.eigvals();
  CoupledStep step;
  step.decay_h = (-dt * lam_h.array()).exp();
  step.regression.resize(n, J);
  Eigen::MatrixXd scaled(n, J);  // C D^{-1/2}
  for (Eigen::Index j = 0; j < J; ++j) {
    const double d = ou_variance(model.lambda(j), model.mu(j), dt);
    if (d == 0.0) {
      step.regression.col(j).setZero();
      scaled.col(j).setZero();
      continue;
    }
    for (Eigen::Index k = 0; k < n; ++k) {
      const double c = model.mu(j) * noise.coupling()(k, j) * decay_integral(model.lambda(j) + lam_h(k), dt);
      step.regression(k, j) = c / d;
      scaled(k, j) = c / std::sqrt(d);
    }
  }
  Eigen::MatrixXd residual = noise.q_h(dt) - scaled * scaled.transpose();
  residual = 0.5 * (residual + residual.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(residual);
  step.residual_factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  return step;
}

CoupledFemSampler::CoupledFemSampler(const SpectralModel& model, std::vector<const FemSystem*> levels,
                                     const TimeGrid& grid, const BridgeTarget& target, std::optional<double> eps)
    : model_(eps ? model.with_observation(ObservationSpec::scaled_identity(*eps, model.eta())) : model),
      grid_(grid),
      target_(target),
      eps_(eps) {
  if (eps && !(*eps > 0.0)) throw std::invalid_argument(fmt::format("observation level eps = {} must be positive", *eps));
  target_.validate(model_.modes());
  const std::size_t J = model_.modes();
  const std::size_t steps = grid_.size() - 1;
  const TransitionTable table(model_, grid_);
  decay_.resize(steps * J);
  stddev_.resize(steps * J);
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < J; ++j) {
      decay_[i * J + j] = table.decay(i, j);
      stddev_[i * J + j] = table.stddev(i, j);
    }
  }
  if (eps_) reference_gain_ = BridgeCoefficients(model_, grid_).k;

  const Eigen::Map<const Eigen::VectorXd> x(target_.x.data(), static_cast<Eigen::Index>(J));
  const Eigen::Map<const Eigen::VectorXd> y(target_.y.data(), static_cast<Eigen::Index>(J));
  for (const FemSystem* sys : levels) {
    Level level{sys, FemNoise(*sys, model_), {}, {}, {}, {}, {}, {}};
    // Uniform grids produce step lengths equal up to rounding; share those.
    std::vector<double> distinct;
    level.step_of.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
      const double dt = grid_[i + 1] - grid_[i];
      std::size_t u = 0;
      while (u < distinct.size() && std::abs(distinct[u] - dt) > 1e-12 * dt) ++u;
      if (u == distinct.size()) {
        distinct.push_back(dt);
        level.steps.push_back(coupled_step(level.noise, model_, dt));
      }
      level.step_of[i] = u;
    }
    if (eps_) {
      for (std::size_t i = 0; i < grid_.size(); ++i) level.gains.push_back(level.noise.gain(grid_[i], model_.T(), *eps_));
      const auto n = static_cast<Eigen::Index>(sys->n_dof());
      Eigen::MatrixXd rest = Eigen::MatrixXd::Identity(n, n) - level.noise.coupling() * level.noise.coupling().transpose();
      rest = 0.5 * (rest + rest.transpose()).eval();
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(rest);
      level.obs_residual_factor = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
      level.y_a = level.noise.coupling() * y;
    }
    level.x_a = level.noise.coupling() * x;
    levels_.push_back(std::move(level));
  }
}

CoupledBatch CoupledFemSampler::run(std::uint64_t first, std::size_t count, std::uint64_t seed) const {
  const std::size_t J = model_.modes();
  const std::size_t G = grid_.size();
  const std::size_t steps = G - 1;
  const auto Jx = static_cast<Eigen::Index>(J);
  const auto S = static_cast<Eigen::Index>(count);

  CoupledBatch batch;
  batch.first = first;
  batch.count = count;

  // Spectral innovations d = sqrt(q_j(dt)) xi, xi from Stream::Noise.
  std::vector<Eigen::MatrixXd> innov(steps, Eigen::MatrixXd(Jx, S));
  for (Eigen::Index s = 0; s < S; ++s) {
    for (std::size_t j = 0; j < J; ++j) {
      rng::NormalSequence noise({seed, rng::Stream::Noise, first + static_cast<std::uint64_t>(s), static_cast<std::uint32_t>(j)});
      for (std::size_t i = 0; i < steps; ++i) {
        innov[i](static_cast<Eigen::Index>(j), s) = stddev_[i * J + j] * noise.next();
      }
    }
  }

  batch.reference.assign(G, Eigen::MatrixXd(Jx, S));
  for (Eigen::Index s = 0; s < S; ++s) {
    for (std::size_t j = 0; j < J; ++j) batch.reference[0](static_cast<Eigen::Index>(j), s) = target_.x[j];
  }
  for (std::size_t i = 0; i < steps; ++i) {
    auto& next = batch.reference[i + 1];
    const auto& prev = batch.reference[i];
    for (Eigen::Index s = 0; s < S; ++s) {
      for (std::size_t j = 0; j < J; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        next(jj, s) = decay_[i * J + j] * prev(jj, s) + innov[i](jj, s);
      }
    }
  }

  Eigen::MatrixXd z;
  if (eps_) {
    z.resize(Jx, S);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (std::size_t j = 0; j < J; ++j) {
        z(static_cast<Eigen::Index>(j), s) = observation_coordinate(*eps_, seed, first + static_cast<std::uint64_t>(s), j);
      }
    }
    Eigen::MatrixXd residual(Jx, S);
    for (Eigen::Index s = 0; s < S; ++s) {
      for (Eigen::Index j = 0; j < Jx; ++j) {
        residual(j, s) = batch.reference[G - 1](j, s) + z(j, s) - target_.y[static_cast<std::size_t>(j)];
      }
    }
    for (std::size_t i = 0; i < G; ++i) {
      for (Eigen::Index s = 0; s < S; ++s) {
        for (Eigen::Index j = 0; j < Jx; ++j) {
          batch.reference[i](j, s) -= reference_gain_(static_cast<Eigen::Index>(i), j) * residual(j, s);
        }
      }
    }
  }

  batch.levels.resize(levels_.size());
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const Level& level = levels_[l];
    const std::size_t n = level.sys->n_dof();
    const auto nx = static_cast<Eigen::Index>(n);
    const auto tag = static_cast<std::uint32_t>(n) << 16;

    std::vector<Eigen::MatrixXd> eta(steps, Eigen::MatrixXd(nx, S));
    for (Eigen::Index s = 0; s < S; ++s) {
      for (std::size_t k = 0; k < n; ++k) {
        rng::NormalSequence noise({seed, rng::Stream::FemResidual, first + static_cast<std::uint64_t>(s),
                                   tag | static_cast<std::uint32_t>(k)});
        for (std::size_t i = 0; i < steps; ++i) eta[i](static_cast<Eigen::Index>(k), s) = noise.next();
      }
    }

    auto& paths = batch.levels[l];
    paths.assign(G, Eigen::MatrixXd(nx, S));
    paths[0] = level.x_a.replicate(1, S);
    for (std::size_t i = 0; i < steps; ++i) {
      const CoupledStep& st = level.steps[level.step_of[i]];
      paths[i + 1].noalias() = st.decay_h.asDiagonal() * paths[i];
      paths[i + 1].noalias() += st.regression * innov[i];
      paths[i + 1].noalias() += st.residual_factor * eta[i];
    }

    if (eps_) {
      Eigen::MatrixXd obs_eta(nx, S);
      for (Eigen::Index s = 0; s < S; ++s) {
        for (std::size_t k = 0; k < n; ++k) {
          obs_eta(static_cast<Eigen::Index>(k), s) = rng::normal(
              {seed, rng::Stream::ObservationResidual, first + static_cast<std::uint64_t>(s), tag | static_cast<std::uint32_t>(k)}, 0);
        }
      }
      Eigen::MatrixXd residual = paths[G - 1] + level.noise.coupling() * z;
      residual.noalias() += std::sqrt(*eps_) * (level.obs_residual_factor * obs_eta);
      residual.colwise() -= level.y_a;
      for (std::size_t i = 0; i < G; ++i) paths[i].noalias() -= level.gains[i] * residual;
    }
  }
  return batch;
}

namespace {

PathEnsemble nodal_ensemble(const CoupledFemSampler& sampler, std::size_t n_samples, std::uint64_t seed) {
  const FemSystem& sys = sampler.system(0);
  const TimeGrid& grid = sampler.grid();
  PathEnsemble ens(grid, n_samples, sys.n_dof(), PathEnsemble::Frame::Nodal, seed);
  const std::size_t batches = (n_samples + kCoupledBatch - 1) / kCoupledBatch;
  const auto nb = static_cast<std::int64_t>(batches);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::size_t first = static_cast<std::size_t>(b) * kCoupledBatch;
    const std::size_t count = std::min(kCoupledBatch, n_samples - first);
    const CoupledBatch batch = sampler.run(first, count, seed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const Eigen::MatrixXd nodal = sys.eigvecs_h * batch.levels[0][i];
      for (std::size_t s = 0; s < count; ++s) {
        for (std::size_t k = 0; k < sys.n_dof(); ++k) {
          ens.at(first + s, i, k) = nodal(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s));
        }
      }
    }
  }
  return ens;
}

}  // namespace

PathEnsemble sample_forward_fem(const FemSystem& sys, const SpectralModel& model, std::span<const double> x,
                                const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed) {
  BridgeTarget target{{x.begin(), x.end()}, std::vector<double>(x.size(), 0.0), 1.0};
  const CoupledFemSampler sampler(model, {&sys}, grid, target, std::nullopt);
  return nodal_ensemble(sampler, n_samples, seed);
}

PathEnsemble sample_bridge_fem(const FemSystem& sys, const SpectralModel& model, const BridgeTarget& target,
                               double eps, const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed) {
  if (!(eps > 0.0)) throw std::invalid_argument(fmt::format("observation level eps = {} must be positive", eps));
  const CoupledFemSampler sampler(model, {&sys}, grid, target, eps);
  return nodal_ensemble(sampler, n_samples, seed);
}

Eigen::MatrixXd fem_bridge_mean(const FemSystem& sys, const SpectralModel& model, const BridgeTarget& target,
                                double eps, const TimeGrid& grid) {
  if (!(eps > 0.0)) throw std::invalid_argument(fmt::format("observation level eps = {} must be positive", eps));
  target.validate(model.modes());
  const FemNoise noise(sys, model);
  const Eigen::Map<const Eigen::VectorXd> x(target.x.data(), static_cast<Eigen::Index>(model.modes()));
  const Eigen::Map<const Eigen::VectorXd> y(target.y.data(), static_cast<Eigen::Index>(model.modes()));
  const Eigen::VectorXd x_a = noise.coupling() * x;
  const Eigen::VectorXd y_a = noise.coupling() * y;
  const double T = model.T();
  const Eigen::VectorXd miss = y_a - ((-T * sys.eigvals_h.array()).exp() * x_a.array()).matrix();
  Eigen::MatrixXd mean(grid.size(), sys.n_dof());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Eigen::VectorXd free = ((-grid[i] * sys.eigvals_h.array()).exp() * x_a.array()).matrix();
    const Eigen::VectorXd a = free + noise.gain(grid[i], T, eps) * miss;
    mean.row(static_cast<Eigen::Index>(i)) = (sys.eigvecs_h * a).transpose();
  }
  return mean;
}

}  // namespace spdebridge
