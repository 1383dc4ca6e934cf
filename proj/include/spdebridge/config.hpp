#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spdebridge/bridge.hpp"
#include "spdebridge/harness.hpp"
#include "spdebridge/model.hpp"

namespace spdebridge {

/// Everything a run can be configured with. Sections and keys:
///   [model]  J, T
///   [q]      kind = white | power, s, scale
///   [qtilde] kind = scaled_identity | power | zero, eps, a, eta
///   [run]    seed, samples, grid_points, N, chi, p
///   [target] x, y                     (lists of eigen-coefficients)
///   [fem]    h, eps
///   [study]  levels, method = exact | mc, conditioned
///   [output] path, format = csv | json
///   [oracle] tolerance
/// Comments start with '#' or ';' (inline ones after whitespace). Unknown sections or keys are errors.
struct RunConfig {
  std::size_t J = 64;
  double T = 1.0;
  CovarianceSpec q = CovarianceSpec::white();
  ObservationSpec qtilde = ObservationSpec::scaled_identity(1.0);
  bool exact_observation = false;  // qtilde kind = zero

  std::uint64_t seed = 0;
  std::size_t samples = 100;
  std::size_t grid_points = 65;
  std::optional<std::size_t> N;
  double chi = 1.0;
  double p = 2.0;

  std::vector<double> x;
  std::vector<double> y;

  double h = 1.0 / 8;
  double fem_eps = 1.0;

  std::vector<double> levels;
  std::string method = "exact";
  bool conditioned = true;

  std::string output_path;
  std::string output_format = "csv";

  double oracle_tolerance = 1e-8;

  SpectralModel model() const;
  BridgeTarget target() const;  // x, y padded with zeros to J
  TimeGrid grid() const;
  SpectralStudyConfig spectral_study() const;
  FemStudyConfig fem_study() const;
};

/// Throws ConfigError on syntax errors, unknown keys and invalid values.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::string& path);

}  // namespace spdebridge
