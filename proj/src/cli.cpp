#include "spdebridge/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <omp.h>

#include "spdebridge/bridge.hpp"
#include "spdebridge/config.hpp"
#include "spdebridge/errors.hpp"
#include "spdebridge/fem.hpp"
#include "spdebridge/forward.hpp"
#include "spdebridge/harness.hpp"
#include "spdebridge/oracle.hpp"

namespace spdebridge {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kReportSchema = R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "ConvergenceReport",
  "type": "object",
  "required": ["levels", "slope", "slope_se", "metadata"],
  "properties": {
    "levels": {
      "type": "array",
      "items": {
        "type": "object",
        "required": ["level", "error", "stderr", "n_samples"],
        "properties": {
          "level": {"type": "number", "exclusiveMinimum": 0},
          "error": {"type": "number", "exclusiveMinimum": 0},
          "stderr": {"type": "number", "minimum": 0},
          "n_samples": {"type": "integer", "minimum": 0}
        }
      }
    },
    "slope": {"type": "number"},
    "slope_se": {"type": "number", "minimum": 0},
    "metadata": {"type": "object"}
  }
})";

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int threads = 0;
  bool dry_run = false;
};

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError(fmt::format("cannot write '{}'", path));
  f << text;
  if (!f) throw ConfigError(fmt::format("failed writing '{}'", path));
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json ensemble_json(const PathEnsemble& ens) {
  json j;
  j["frame"] = ens.frame == PathEnsemble::Frame::Spectral ? "spectral" : "nodal";
  j["seed"] = ens.seed;
  j["t"] = std::vector<double>(ens.grid.points().begin(), ens.grid.points().end());
  j["paths"] = json::array();
  for (std::size_t s = 0; s < ens.samples; ++s) {
    json rows = json::array();
    for (std::size_t i = 0; i < ens.grid.size(); ++i) {
      const auto row = ens.sample(s).subspan(i * ens.width, ens.width);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["paths"].push_back(std::move(rows));
  }
  return j;
}

void emit_ensemble(const PathEnsemble& ens, const RunConfig& c, const std::string& path, std::ostream& out) {
  write_text(path, c.output_format == "json" ? dump(ensemble_json(ens)) : to_csv(ens), out);
}

std::string sidecar_path(const std::string& path, const char* suffix) {
  return path.empty() || path == "-" ? std::string() : path + suffix;
}

// Largest entrywise deviation, relative to the largest entry of the reference.
double relative_deviation(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  const double scale = want.cwiseAbs().maxCoeff();
  const double diff = (got - want).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

json oracle_report(const RunConfig& c) {
  json checks = json::array();
  auto record = [&](const std::string& name, double dev, json extra = json::object()) {
    json e{{"name", name}, {"max_deviation", dev}, {"pass", dev <= c.oracle_tolerance}};
    for (auto& [k, v] : extra.items()) e[k] = v;
    checks.push_back(std::move(e));
  };

  // Bridge formulas against Schur-complement conditioning of the joint law.
  {
    const std::size_t modes = std::min<std::size_t>(c.J, 8);
    const std::size_t points = std::min<std::size_t>(c.grid_points, 9);
    const SpectralModel model = c.model().truncated(modes);
    const TimeGrid grid = TimeGrid::uniform(c.T, points);
    const BridgeTarget target = c.target().truncated(modes);
    std::vector<std::size_t> idx(modes);
    for (std::size_t j = 0; j < modes; ++j) idx[j] = j;
    const oracle::JointGaussian joint = oracle::assemble_joint(model, grid, idx, &target);
    joint.validate();
    const auto G = static_cast<Eigen::Index>(points);
    std::vector<Eigen::Index> observed;
    std::vector<double> values;
    for (std::size_t j = 0; j < modes; ++j) {
      observed.push_back(static_cast<Eigen::Index>(j) * (G + 1) + G);
      values.push_back(target.y[j]);
    }
    const oracle::JointGaussian cond = oracle::condition(joint, observed, values);
    const Eigen::MatrixXd mean = bridge_mean(model, target, grid);
    Eigen::MatrixXd oracle_mean(G, static_cast<Eigen::Index>(modes));
    Eigen::MatrixXd cov(G * static_cast<Eigen::Index>(modes), G), oracle_cov(G * static_cast<Eigen::Index>(modes), G);
    for (std::size_t j = 0; j < modes; ++j) {
      const Eigen::Index off = static_cast<Eigen::Index>(j) * (G + 1);
      const auto jj = static_cast<Eigen::Index>(j);
      for (Eigen::Index a = 0; a < G; ++a) {
        oracle_mean(a, jj) = cond.mean(off + a);
        for (Eigen::Index b = 0; b < G; ++b) {
          cov(jj * G + a, b) = bridge_cov_mode(j, grid[a], grid[b], model);
          oracle_cov(jj * G + a, b) = cond.cov(off + a, off + b);
        }
      }
    }
    record("bridge_mean", relative_deviation(mean, oracle_mean), {{"modes", modes}, {"grid_points", points}});
    record("bridge_covariance", relative_deviation(cov, oracle_cov), {{"modes", modes}, {"grid_points", points}});
  }

  // Closed-form q_j(t) against adaptive quadrature.
  {
    const SpectralModel model = c.model();
    double dev = 0.0;
    for (std::size_t j : {1u, 10u, 100u}) {
      if (j > c.J) continue;
      for (double f : {0.01, 0.5, 1.0}) {
        const double t = std::min(f, 1.0) * c.T;
        const double want = oracle::quad_covariance(j - 1, t, model);
        const double got = q_mode(j - 1, t, model);
        dev = std::max(dev, want > 0.0 ? std::abs(got - want) / want : std::abs(got));
      }
    }
    record("q_mode_quadrature", dev);
  }

  // Penrose identities on seeded random matrices.
  {
    std::mt19937_64 gen(c.seed);
    std::normal_distribution<double> normal;
    double dev = 0.0;
    for (int trial = 0; trial < 8; ++trial) {
      const Eigen::Index m = 3 + trial, n = 2 + 2 * trial % 7;
      Eigen::MatrixXd a(m, n);
      for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = normal(gen);
      const Eigen::MatrixXd p = oracle::pseudoinverse(a);
      dev = std::max({dev, relative_deviation(a * p * a, a), relative_deviation(p * a * p, p),
                      relative_deviation((a * p).transpose(), a * p), relative_deviation((p * a).transpose(), p * a)});
    }
    record("pseudoinverse_penrose", dev);
  }

  // FEM bridge mean against the Van Loan joint law, on coarse meshes only.
  {
    const FemSystem sys = assemble(c.h);
    if (sys.n_dof() <= 15 && c.J >= 4 * sys.n_dof() && !c.exact_observation) {
      const SpectralModel model = c.model().with_observation(ObservationSpec::scaled_identity(c.fem_eps));
      const TimeGrid grid = TimeGrid::uniform(c.T, std::min<std::size_t>(c.grid_points, 5));
      const BridgeTarget target = c.target();
      const oracle::JointGaussian joint = oracle::assemble_joint_fem(sys, model, c.fem_eps, grid, target);
      const auto n = static_cast<Eigen::Index>(sys.n_dof());
      const auto G = static_cast<Eigen::Index>(grid.size());
      const Eigen::Map<const Eigen::VectorXd> y(target.y.data(), static_cast<Eigen::Index>(c.J));
      const Eigen::VectorXd y_nodal = sys.mass_factor.solve(sine_load_matrix(sys, c.J) * y);
      std::vector<Eigen::Index> observed;
      std::vector<double> values;
      for (Eigen::Index k = 0; k < n; ++k) {
        observed.push_back(G * n + k);
        values.push_back(y_nodal(k));
      }
      const oracle::JointGaussian cond = oracle::condition(joint, observed, values);
      Eigen::MatrixXd want(G, n);
      for (Eigen::Index i = 0; i < G; ++i) want.row(i) = cond.mean.segment(i * n, n).transpose();
      const Eigen::MatrixXd got = fem_bridge_mean(sys, model, target, c.fem_eps, grid);
      record("fem_bridge_mean", relative_deviation(got, want), {{"h", c.h}, {"grid_points", grid.size()}});
    }
  }

  double worst = 0.0;
  bool pass = true;
  for (const auto& e : checks) {
    worst = std::max(worst, e["max_deviation"].get<double>());
    pass = pass && e["pass"].get<bool>();
  }
  return {{"checks", checks}, {"max_deviation", worst}, {"tolerance", c.oracle_tolerance}, {"pass", pass}, {"seed", c.seed}};
}

json budget_json(const RegularityBudget& b) {
  auto num = [](double v) -> json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  return {{"beta_sup", num(b.beta_sup)}, {"rho_sup", num(b.rho_sup)}, {"alpha", num(b.alpha)},
          {"zeta", b.zeta}, {"chi", b.chi}, {"rate_sup", num(b.rate_sup)},
          {"analytic", b.analytic}, {"diagnostics", b.diagnostics}};
}

int dispatch(const std::string& command, const Options& opt, std::ostream& out, std::ostream& err) {
  RunConfig c = opt.config.empty() ? RunConfig{} : load_config(opt.config);
  if (opt.seed) c.seed = *opt.seed;
  const std::string path = !opt.out.empty() ? opt.out : c.output_path;
  if (opt.threads > 0) omp_set_num_threads(opt.threads);

  // Everything that can be validated without sampling.
  const SpectralModel full = c.model();
  const SpectralModel model = c.N ? full.truncated(*c.N) : full;
  const BridgeTarget target = c.N ? c.target().truncated(*c.N) : c.target();
  const TimeGrid grid = c.grid();
  if (command == "sample-fem-bridge") {
    const FemSystem probe_sys = assemble(c.h);
    if (c.J < 4 * probe_sys.n_dof()) throw ConfigError(fmt::format("J = {} is below 4 n_dof = {}", c.J, 4 * probe_sys.n_dof()));
  }
  if (command == "converge-spectral") (void)c.spectral_study();
  if (opt.dry_run) {
    out << dump({{"command", command}, {"valid", true}, {"seed", c.seed}});
    return 0;
  }

  if (command == "check-assumptions") {
    write_text(path, dump(budget_json(check_assumptions(full, c.chi))), out);
  } else if (command == "sample-forward") {
    emit_ensemble(sample_forward(model, target.x, grid, c.samples, c.seed), c, path, out);
  } else if (command == "sample-bridge") {
    emit_ensemble(sample_bridge(model, target, grid, c.samples, c.seed), c, path, out);
    const bool pinned = std::all_of(model.mu_tilde().begin(), model.mu_tilde().end(), [](double m) { return m == 0.0; });
    const json side{{"pinned", pinned}, {"N", model.modes()}, {"target_y", target.y}, {"seed", c.seed}};
    const std::string sp = sidecar_path(path, ".json");
    if (sp.empty()) err << dump(side);
    else write_text(sp, dump(side), out);
  } else if (command == "sample-fem-bridge") {
    const FemSystem sys = assemble(c.h);
    const PathEnsemble ens = c.conditioned ? sample_bridge_fem(sys, full, c.target(), c.fem_eps, grid, c.samples, c.seed)
                                           : sample_forward_fem(sys, full, c.target().x, grid, c.samples, c.seed);
    emit_ensemble(ens, c, path, out);
    const json side{{"nodes", sys.mesh.nodes}, {"h", sys.mesh.h}};
    const std::string sp = sidecar_path(path, ".mesh.json");
    if (sp.empty()) err << dump(side);
    else write_text(sp, dump(side), out);
  } else if (command == "converge-spectral" || command == "converge-fem") {
    const ConvergenceReport report = command == "converge-spectral" ? run_spectral_study(c.spectral_study())
                                                                     : run_fem_study(c.fem_study());
    if (c.output_format == "json") {
      write_text(path, dump(report.to_json()), out);
      const std::string sp = sidecar_path(path, ".csv");
      if (!sp.empty()) write_text(sp, report.to_csv(), out);
    } else {
      write_text(path, report.to_csv(), out);
      const std::string sp = sidecar_path(path, ".json");
      if (!sp.empty()) write_text(sp, dump(report.to_json()), out);
    }
  } else if (command == "oracle-check") {
    const json report = oracle_report(c);
    write_text(path, dump(report), out);
    if (!report["pass"].get<bool>()) {
      err << fmt::format("oracle deviation {} exceeds tolerance {}\n", report["max_deviation"].get<double>(), c.oracle_tolerance);
      return 3;
    }
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sampling and convergence studies for linear SPDE bridges", "spdebridge"};
  app.require_subcommand(0, 1);
  bool schema = false;
  app.add_flag("--schema", schema, "Print the JSON schema of convergence reports");

  Options opt;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"sample-forward", "Exact samples of the unconditioned solution"},
      {"sample-bridge", "Exact samples of the spectral bridge"},
      {"sample-fem-bridge", "Samples of the finite element bridge (or forward solution)"},
      {"converge-spectral", "Spectral truncation study"},
      {"converge-fem", "Finite element study against the spectral reference"},
      {"oracle-check", "Compare closed forms against brute-force oracles"},
      {"check-assumptions", "Regularity budget of the configured model"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "Configuration file");
    sub->add_option("--seed", opt.seed, "Root seed (overrides the file)");
    sub->add_option("--out", opt.out, "Output path ('-' for stdout)");
    sub->add_option("--threads", opt.threads, "OpenMP threads; never changes results")->check(CLI::NonNegativeNumber);
    sub->add_flag("--dry-run", opt.dry_run, "Validate the configuration and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  if (schema) {
    out << kReportSchema << "\n";
    return 0;
  }
  const auto subs = app.get_subcommands();
  if (subs.empty()) {
    err << "error: a subcommand is required\n" << app.help();
    return 2;
  }
  try {
    return dispatch(subs.front()->get_name(), opt, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace spdebridge
