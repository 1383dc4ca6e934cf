#pragma once

#include <stdexcept>
#include <string>

namespace spdebridge {

/// Malformed or inconsistent run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical contract was violated at run time: a covariance that should be
/// injective is not, an oracle disagrees, a quadrature fails (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spdebridge
