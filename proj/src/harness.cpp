#include "spdebridge/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "spdebridge/errors.hpp"
#include "spdebridge/forward.hpp"

namespace spdebridge {

namespace {

double sum_range(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return sum_range(v, half) + sum_range(v + half, n - half);
}

nlohmann::ordered_json covariance_json(const CovarianceSpec& c) {
  if (c.kind == CovarianceSpec::Kind::White) return {{"kind", "white"}};
  return {{"kind", "power"}, {"s", c.s}, {"scale", c.scale}};
}

nlohmann::ordered_json observation_json(const ObservationSpec& o) {
  if (o.kind == ObservationSpec::Kind::ScaledIdentity) return {{"kind", "scaled_identity"}, {"eps", o.eps}, {"eta", o.eta}};
  return {{"kind", "power"}, {"eps", o.eps}, {"a", o.a}, {"eta", o.eta}};
}

std::vector<double> padded(const std::vector<double>& v, std::size_t J, const char* what) {
  if (v.empty()) return std::vector<double>(J, 0.0);
  if (v.size() > J) throw ConfigError(fmt::format("{} has {} coefficients, more than J = {}", what, v.size(), J));
  std::vector<double> out(v);
  out.resize(J, 0.0);
  return out;
}

bool all_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double c) { return c == 0.0; });
}

// Omitted variance beyond the retained modes; exact comparison sums for the
// supported families, infinity when the spectrum has no known tail.
double tail_variance(const SpectralModel& model) {
  const auto& cov = model.covariance();
  if (!cov) return std::numeric_limits<double>::infinity();
  const double J = static_cast<double>(model.modes());
  const double pi2 = std::numbers::pi * std::numbers::pi;
  if (cov->kind == CovarianceSpec::Kind::White) return 1.0 / (2.0 * pi2 * J);
  // sum_{j>J} scale (pi j)^{-2-2s} / 2 <= scale / (2 pi^{2+2s}) J^{-1-2s} / (1 + 2s)
  const double e = 2.0 + 2.0 * cov->s;
  return cov->scale / (2.0 * std::pow(std::numbers::pi, e)) * std::pow(J, 1.0 - e) / (e - 1.0);
}

void check_ladder_monotone(const std::vector<LevelResult>& levels) {
  bool inc = true, dec = true;
  for (std::size_t i = 1; i < levels.size(); ++i) {
    inc = inc && levels[i].level > levels[i - 1].level;
    dec = dec && levels[i].level < levels[i - 1].level;
  }
  if (!inc && !dec) throw std::invalid_argument("levels must be strictly monotone");
}

}  // namespace

double pairwise_sum(std::span<const double> v) { return sum_range(v.data(), v.size()); }

Estimate jackknife_power_mean(std::span<const double> v, double power) {
  const std::size_t n = v.size();
  if (n == 0) throw std::invalid_argument("jackknife of an empty sample");
  const double total = pairwise_sum(v);
  Estimate est{std::pow(total / static_cast<double>(n), power), 0.0};
  if (n < 2) return est;
  std::vector<double> loo(n);
  for (std::size_t i = 0; i < n; ++i) loo[i] = std::pow(std::max(total - v[i], 0.0) / static_cast<double>(n - 1), power);
  const double mean = pairwise_sum(loo) / static_cast<double>(n);
  for (auto& t : loo) t = (t - mean) * (t - mean);
  est.stderr_ = std::sqrt(static_cast<double>(n - 1) / static_cast<double>(n) * pairwise_sum(loo));
  return est;
}

nlohmann::ordered_json ConvergenceReport::to_json() const {
  nlohmann::ordered_json out;
  out["levels"] = nlohmann::ordered_json::array();
  for (const auto& l : levels) {
    out["levels"].push_back({{"level", l.level}, {"error", l.error}, {"stderr", l.stderr_}, {"n_samples", l.n_samples}});
  }
  out["slope"] = slope;
  out["slope_se"] = slope_se;
  out["metadata"] = metadata;
  return out;
}

std::string ConvergenceReport::to_csv() const {
  std::string out = "level,error,stderr,n_samples\n";
  for (const auto& l : levels) {
    out += fmt::format("{},{},{},{}\n", format_double(l.level), format_double(l.error), format_double(l.stderr_), l.n_samples);
  }
  return out;
}

ConvergenceReport fit_rate(std::vector<LevelResult> levels) {
  if (levels.size() < 4) throw std::invalid_argument(fmt::format("rate fit needs at least 4 levels, got {}", levels.size()));
  for (const auto& l : levels) {
    if (!(l.error > 0.0) || !std::isfinite(l.error)) {
      throw std::invalid_argument(fmt::format("error {} at level {} is not positive", l.error, l.level));
    }
    if (!(l.level > 0.0)) throw std::invalid_argument(fmt::format("level {} is not positive", l.level));
  }
  check_ladder_monotone(levels);
  const std::size_t n = levels.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::log(levels[i].level);
    y[i] = std::log(levels[i].error);
  }
  const double mx = pairwise_sum(x) / static_cast<double>(n);
  const double my = pairwise_sum(y) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  ConvergenceReport report;
  report.levels = std::move(levels);
  report.slope = sxy / sxx;
  const double intercept = my - report.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - intercept - report.slope * x[i];
    ssr += r * r;
  }
  report.slope_se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  if (!std::isfinite(report.slope)) throw NumericalError("fitted slope is not finite");
  return report;
}

double truncation_variance(std::size_t j, double t, const SpectralModel& model, bool conditioned) {
  const double q = q_mode(j, t, model);
  if (!conditioned || q == 0.0) return q;
  const double lam = model.lambda(j);
  const double T = model.T();
  // e^{-2 lam (T-t)} - e^{-2 lam T} and 1 - e^{-2 lam T} without cancellation
  const double num = std::exp(-2.0 * lam * (T - t)) * -std::expm1(-2.0 * lam * t);
  const double den = -std::expm1(-2.0 * lam * T) + 2.0 * model.mu_tilde(j) * lam / model.mu(j);
  return q * (1.0 - num / den);
}

ExactError exact_spectral_error(const SpectralModel& model, std::size_t N, const TimeGrid& grid, bool conditioned,
                                const BridgeTarget* target) {
  if (N > model.modes()) throw std::invalid_argument(fmt::format("N = {} exceeds J = {}", N, model.modes()));
  if (target && (!all_zero(target->x) || !all_zero(target->y))) {
    throw std::invalid_argument("the exact error formula holds only for x = y = 0");
  }
  ExactError out;
  std::vector<double> terms(model.modes() - N);
  double best = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = N; j < model.modes(); ++j) terms[j - N] = truncation_variance(j, grid[i], model, conditioned);
    const double v = pairwise_sum(terms);
    if (v > best) {
      best = v;
      out.argmax = i;
    }
  }
  out.error = std::sqrt(std::max(best, 0.0));
  out.tail_bound = tail_variance(model);
  out.tail_ratio = out.error > 0.0 ? (std::sqrt(best + out.tail_bound) - out.error) / out.error
                                   : std::numeric_limits<double>::infinity();
  return out;
}

namespace {

void check_pair(const PathEnsemble& a, const PathEnsemble& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("ensembles live on different grids");
  if (a.samples != b.samples) {
    throw std::invalid_argument(fmt::format("ensembles have {} and {} samples", a.samples, b.samples));
  }
  if (a.samples == 0) throw std::invalid_argument("empty ensembles");
  if (a.frame != b.frame) throw std::invalid_argument("ensembles use different coordinate frames");
  if (a.frame == PathEnsemble::Frame::Nodal && a.width != b.width) throw std::invalid_argument("nodal ensembles differ in width");
}

double squared_distance(const PathEnsemble& a, const PathEnsemble& b, std::size_t s, std::size_t i) {
  const std::size_t w = std::max(a.width, b.width);
  double d = 0.0;
  for (std::size_t k = 0; k < w; ++k) {
    const double u = k < a.width ? a.at(s, i, k) : 0.0;
    const double v = k < b.width ? b.at(s, i, k) : 0.0;
    d += (u - v) * (u - v);
  }
  return d;
}

}  // namespace

Estimate mc_sup_error(const PathEnsemble& a, const PathEnsemble& b, double p) {
  check_pair(a, b);
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  std::vector<double> v(a.samples);
  for (std::size_t s = 0; s < a.samples; ++s) {
    double sup = 0.0;
    for (std::size_t i = 0; i < a.grid.size(); ++i) sup = std::max(sup, squared_distance(a, b, s, i));
    v[s] = std::pow(sup, p / 2.0);
  }
  return jackknife_power_mean(v, 1.0 / p);
}

Estimate mc_pointwise_error(const PathEnsemble& a, const PathEnsemble& b, double p, std::size_t time_index) {
  check_pair(a, b);
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  if (time_index >= a.grid.size()) throw std::invalid_argument("time index out of range");
  std::vector<double> v(a.samples);
  for (std::size_t s = 0; s < a.samples; ++s) v[s] = std::pow(squared_distance(a, b, s, time_index), p / 2.0);
  return jackknife_power_mean(v, 1.0 / p);
}

Estimate mc_sup_error(const PathEnsemble& fem, const FemSystem& sys, const PathEnsemble& spectral, double p) {
  if (!(fem.grid == spectral.grid)) throw std::invalid_argument("ensembles live on different grids");
  if (fem.samples != spectral.samples || fem.samples == 0) throw std::invalid_argument("sample counts differ or are zero");
  if (fem.frame != PathEnsemble::Frame::Nodal || spectral.frame != PathEnsemble::Frame::Spectral) {
    throw std::invalid_argument("expected a nodal and a spectral ensemble");
  }
  if (fem.width != sys.n_dof()) throw std::invalid_argument("nodal ensemble does not match the mesh");
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  const Eigen::MatrixXd B = sine_load_matrix(sys, spectral.width);
  std::vector<double> v(fem.samples);
  const auto n = static_cast<Eigen::Index>(fem.width);
  const auto J = static_cast<Eigen::Index>(spectral.width);
  for (std::size_t s = 0; s < fem.samples; ++s) {
    double sup = 0.0;
    for (std::size_t i = 0; i < fem.grid.size(); ++i) {
      const Eigen::Map<const Eigen::VectorXd> c(&fem.values[(s * fem.grid.size() + i) * fem.width], n);
      const Eigen::Map<const Eigen::VectorXd> u(&spectral.values[(s * spectral.grid.size() + i) * spectral.width], J);
      const double d = c.dot(sys.M * c) - 2.0 * c.dot(B * u) + u.squaredNorm();
      sup = std::max(sup, d);
    }
    v[s] = std::pow(std::max(sup, 0.0), p / 2.0);
  }
  return jackknife_power_mean(v, 1.0 / p);
}

namespace {

struct SpectralSetup {
  SpectralModel model;
  TimeGrid grid;
  BridgeTarget target;
};

SpectralSetup spectral_setup(const SpectralStudyConfig& c) {
  if (c.ladder.empty()) throw ConfigError("empty N ladder");
  const std::size_t nmax = *std::max_element(c.ladder.begin(), c.ladder.end());
  for (std::size_t N : c.ladder) {
    if (N < 1 || N >= c.J) throw ConfigError(fmt::format("ladder entry N = {} outside [1, J)", N));
  }
  if (c.J < 4 * nmax) throw ConfigError(fmt::format("J = {} is below 4 max(N) = {}", c.J, 4 * nmax));
  if (c.grid_points < 2) throw ConfigError("the time grid needs at least 2 points");
  if (!(c.p >= 1.0)) throw ConfigError("p must be >= 1");
  SpectralModel model = build_model(c.covariance, c.observation, c.J, c.T);
  BridgeTarget target{padded(c.x, c.J, "x"), padded(c.y, c.J, "y"), c.chi};
  return {std::move(model), TimeGrid::uniform(c.T, c.grid_points), std::move(target)};
}

nlohmann::ordered_json spectral_metadata(const SpectralStudyConfig& c) {
  nlohmann::ordered_json m;
  m["study"] = "spectral";
  m["method"] = c.method == SpectralStudyConfig::Method::Exact ? "exact" : "mc";
  m["conditioned"] = c.conditioned;
  m["q"] = covariance_json(c.covariance);
  m["qtilde"] = observation_json(c.observation);
  m["J"] = c.J;
  m["T"] = c.T;
  m["grid_points"] = c.grid_points;
  m["ladder"] = c.ladder;
  m["p"] = c.p;
  m["seed"] = c.seed;
  if (c.method == SpectralStudyConfig::Method::MonteCarlo) m["samples"] = c.samples;
  return m;
}

// Squared distance between the J-mode path and its N-mode coupling at every
// grid time, per sample and ladder entry: sq[(s * L + l) * G + i].
std::vector<double> coupled_spectral_distances(const SpectralStudyConfig& c, const SpectralSetup& setup) {
  const std::size_t G = setup.grid.size();
  const std::size_t J = c.J;
  const std::size_t L = c.ladder.size();
  struct Level {
    SpectralModel model;
    TransitionTable table;
    std::optional<BridgeCoefficients> coeffs;
    BridgeTarget target;
  };
  std::vector<Level> levels;
  levels.reserve(L + 1);
  auto make = [&](std::size_t N) {
    SpectralModel m = truncate_bridge(setup.model, N);
    TransitionTable table(m, setup.grid);
    std::optional<BridgeCoefficients> coeffs;
    if (c.conditioned) coeffs.emplace(m, setup.grid);
    levels.push_back({std::move(m), std::move(table), std::move(coeffs), setup.target.truncated(N)});
  };
  for (std::size_t N : c.ladder) make(N);
  make(J);
  const Level& full = levels.back();

  std::vector<double> sq(c.samples * L * G);
  const auto n = static_cast<std::int64_t>(c.samples);
#pragma omp parallel
  {
    std::vector<double> ref(G * J), trunc(G * J);
#pragma omp for schedule(static)
    for (std::int64_t si = 0; si < n; ++si) {
      const auto s = static_cast<std::uint64_t>(si);
      auto draw = [&](const Level& lv, std::span<double> out) {
        if (c.conditioned) {
          bridge_path(lv.table, *lv.coeffs, lv.model, lv.target, c.seed, s, out);
        } else {
          forward_path(lv.table, lv.target.x, c.seed, s, out);
        }
      };
      draw(full, ref);
      for (std::size_t l = 0; l < L; ++l) {
        const std::size_t N = c.ladder[l];
        draw(levels[l], {trunc.data(), G * N});
        for (std::size_t i = 0; i < G; ++i) {
          double d = 0.0;
          for (std::size_t j = 0; j < N; ++j) {
            const double e = ref[i * J + j] - trunc[i * N + j];
            d += e * e;
          }
          for (std::size_t j = N; j < J; ++j) d += ref[i * J + j] * ref[i * J + j];
          sq[(s * L + l) * G + i] = d;
        }
      }
    }
  }
  return sq;
}

}  // namespace

ConvergenceReport run_spectral_study(const SpectralStudyConfig& c) {
  const SpectralSetup setup = spectral_setup(c);
  std::vector<LevelResult> levels;
  nlohmann::ordered_json diag = nlohmann::ordered_json::array();
  if (c.method == SpectralStudyConfig::Method::Exact) {
    if (!all_zero(setup.target.x) || !all_zero(setup.target.y)) {
      throw ConfigError("the exact spectral error requires x = y = 0; use the Monte Carlo method");
    }
    for (std::size_t N : c.ladder) {
      const ExactError e = exact_spectral_error(setup.model, N, setup.grid, c.conditioned);
      levels.push_back({static_cast<double>(N), e.error, 0.0, 0});
      diag.push_back({{"N", N}, {"argmax_t", setup.grid[e.argmax]}, {"tail_bound", e.tail_bound}, {"tail_ratio", e.tail_ratio}});
    }
  } else {
    if (c.samples < 2) throw ConfigError("Monte Carlo studies need at least 2 samples");
    const std::vector<double> sq = coupled_spectral_distances(c, setup);
    const std::size_t G = setup.grid.size();
    const std::size_t L = c.ladder.size();
    std::vector<double> v(c.samples);
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t s = 0; s < c.samples; ++s) {
        const double* row = &sq[(s * L + l) * G];
        v[s] = std::pow(*std::max_element(row, row + G), c.p / 2.0);
      }
      const Estimate e = jackknife_power_mean(v, 1.0 / c.p);
      levels.push_back({static_cast<double>(c.ladder[l]), e.value, e.stderr_, c.samples});
    }
  }
  ConvergenceReport report = fit_rate(std::move(levels));
  report.metadata = spectral_metadata(c);
  if (!diag.empty()) report.metadata["tail"] = diag;
  const RegularityBudget budget = check_assumptions(setup.model, c.chi);
  report.metadata["rate_sup"] = budget.rate_sup;
  report.metadata["diagnostics"] = budget.diagnostics;
  return report;
}

std::vector<SpectralAgreement> compare_spectral_mc_exact(const SpectralStudyConfig& config) {
  SpectralStudyConfig c = config;
  c.method = SpectralStudyConfig::Method::MonteCarlo;
  const SpectralSetup setup = spectral_setup(c);
  if (!all_zero(setup.target.x) || !all_zero(setup.target.y)) throw ConfigError("comparison requires x = y = 0");
  if (c.samples < 2) throw ConfigError("Monte Carlo studies need at least 2 samples");
  const std::vector<double> sq = coupled_spectral_distances(c, setup);
  const std::size_t G = setup.grid.size();
  const std::size_t L = c.ladder.size();
  std::vector<SpectralAgreement> out;
  std::vector<double> peak(c.samples), sup(c.samples);
  for (std::size_t l = 0; l < L; ++l) {
    const ExactError e = exact_spectral_error(setup.model, c.ladder[l], setup.grid, c.conditioned);
    for (std::size_t s = 0; s < c.samples; ++s) {
      const double* row = &sq[(s * L + l) * G];
      peak[s] = std::pow(row[e.argmax], c.p / 2.0);
      sup[s] = std::pow(*std::max_element(row, row + G), c.p / 2.0);
    }
    out.push_back({c.ladder[l], e.error, setup.grid[e.argmax], jackknife_power_mean(peak, 1.0 / c.p),
                   jackknife_power_mean(sup, 1.0 / c.p)});
  }
  return out;
}

ConvergenceReport run_fem_study(const FemStudyConfig& c) {
  if (c.h.empty()) throw ConfigError("empty h ladder");
  if (c.grid_points < 2) throw ConfigError("the time grid needs at least 2 points");
  if (c.samples < 2) throw ConfigError("Monte Carlo studies need at least 2 samples");
  if (!(c.p >= 1.0)) throw ConfigError("p must be >= 1");
  if (c.eps && !(*c.eps > 0.0)) throw ConfigError("eps must be positive");
  std::vector<FemSystem> systems;
  systems.reserve(c.h.size());
  for (double h : c.h) {
    try {
      systems.push_back(assemble(h));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& sys : systems) {
    if (c.J < 4 * sys.n_dof()) throw ConfigError(fmt::format("J = {} is below 4 n_dof = {}", c.J, 4 * sys.n_dof()));
  }
  const SpectralModel model = build_model(c.covariance, ObservationSpec::scaled_identity(c.eps.value_or(1.0)), c.J, c.T);
  const TimeGrid grid = TimeGrid::uniform(c.T, c.grid_points);
  const BridgeTarget target{padded(c.x, c.J, "x"), padded(c.y, c.J, "y"), c.chi};
  std::vector<const FemSystem*> ptrs;
  for (const auto& s : systems) ptrs.push_back(&s);
  const CoupledFemSampler sampler(model, ptrs, grid, target, c.eps);

  const std::size_t L = systems.size();
  const std::size_t G = grid.size();
  std::vector<double> sup(L * c.samples, 0.0);  // level-major
  const std::size_t batches = (c.samples + kCoupledBatch - 1) / kCoupledBatch;
  const auto nb = static_cast<std::int64_t>(batches);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::size_t first = static_cast<std::size_t>(b) * kCoupledBatch;
    const std::size_t count = std::min(kCoupledBatch, c.samples - first);
    const CoupledBatch batch = sampler.run(first, count, c.seed);
    for (std::size_t i = 0; i < G; ++i) {
      const Eigen::MatrixXd& u = batch.reference[i];
      const Eigen::RowVectorXd uu = u.colwise().squaredNorm();
      for (std::size_t l = 0; l < L; ++l) {
        const Eigen::MatrixXd& a = batch.levels[l][i];
        const Eigen::MatrixXd bu = sampler.noise(l).coupling() * u;
        const Eigen::RowVectorXd cross = a.cwiseProduct(bu).colwise().sum();
        const Eigen::RowVectorXd aa = a.colwise().squaredNorm();
        for (std::size_t s = 0; s < count; ++s) {
          const auto si = static_cast<Eigen::Index>(s);
          const double d = aa(si) - 2.0 * cross(si) + uu(si);
          double& slot = sup[l * c.samples + first + s];
          slot = std::max(slot, d);
        }
      }
    }
  }

  std::vector<LevelResult> levels;
  std::vector<double> v(c.samples);
  for (std::size_t l = 0; l < L; ++l) {
    for (std::size_t s = 0; s < c.samples; ++s) v[s] = std::pow(sup[l * c.samples + s], c.p / 2.0);
    const Estimate e = jackknife_power_mean(v, 1.0 / c.p);
    levels.push_back({c.h[l], e.value, e.stderr_, c.samples});
  }
  ConvergenceReport report = fit_rate(std::move(levels));
  nlohmann::ordered_json m;
  m["study"] = "fem";
  m["conditioned"] = c.eps.has_value();
  if (c.eps) m["eps"] = *c.eps;
  m["q"] = covariance_json(c.covariance);
  m["J"] = c.J;
  m["T"] = c.T;
  m["h"] = c.h;
  m["grid_points"] = c.grid_points;
  m["samples"] = c.samples;
  m["p"] = c.p;
  m["seed"] = c.seed;
  report.metadata = std::move(m);
  return report;
}

}  // namespace spdebridge
