#pragma once

// Serial, loop-by-loop versions of the parallel samplers. They exist to pin down
// the reproducibility contract in tests and as the baseline of the benchmark.

#include <cstddef>
#include <cstdint>
#include <span>

#include "spdebridge/bridge.hpp"
#include "spdebridge/fem.hpp"
#include "spdebridge/model.hpp"
#include "spdebridge/paths.hpp"

namespace spdebridge::reference {

/// Bit-identical to spdebridge::sample_forward.
PathEnsemble sample_forward(const SpectralModel& model, std::span<const double> x, const TimeGrid& grid,
                            std::size_t n_samples, std::uint64_t seed);

/// Bit-identical to spdebridge::sample_bridge.
PathEnsemble sample_bridge(const SpectralModel& model, const BridgeTarget& target, const TimeGrid& grid,
                           std::size_t n_samples, std::uint64_t seed);

/// Same draws as spdebridge::sample_bridge_fem in a single batch; agreement is
/// up to matrix-product rounding.
PathEnsemble sample_bridge_fem(const FemSystem& sys, const SpectralModel& model, const BridgeTarget& target,
                               double eps, const TimeGrid& grid, std::size_t n_samples, std::uint64_t seed);

}  // namespace spdebridge::reference
