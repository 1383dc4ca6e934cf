#include <gtest/gtest.h>

#include <omp.h>

#include <cmath>
#include <vector>

#include "spdebridge/reference.hpp"

using namespace spdebridge;

namespace {
BridgeTarget target(std::size_t J) {
  BridgeTarget t = BridgeTarget::zero(J);
  for (std::size_t j = 0; j < J; ++j) {
    t.x[j] = 1.0 / (j + 1);
    t.y[j] = std::sin(0.3 * j);
  }
  return t;
}
}  // namespace

TEST(Reference, ForwardBitIdentical) {
  const SpectralModel m = build_model(CovarianceSpec::power(0.5), ObservationSpec::scaled_identity(1.0), 24, 1.0);
  const TimeGrid g = TimeGrid::uniform(1.0, 17);
  const auto t = target(24);
  EXPECT_EQ(sample_forward(m, t.x, g, 37, 9).values, reference::sample_forward(m, t.x, g, 37, 9).values);
}

TEST(Reference, BridgeBitIdentical) {
  const SpectralModel m = build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(0.2), 24, 1.0);
  const TimeGrid g = TimeGrid::uniform(1.0, 17);
  EXPECT_EQ(sample_bridge(m, target(24), g, 37, 4).values, reference::sample_bridge(m, target(24), g, 37, 4).values);
  const SpectralModel pinned = m.without_observation_noise();
  EXPECT_EQ(sample_bridge(pinned, target(24), g, 5, 4).values,
            reference::sample_bridge(pinned, target(24), g, 5, 4).values);
}

TEST(Reference, FemBridgeAgrees) {
  const FemSystem sys = assemble(1.0 / 8);
  const SpectralModel m = build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(1.0), 64, 1.0);
  const TimeGrid g = TimeGrid::uniform(1.0, 9);
  const auto a = sample_bridge_fem(sys, m, target(64), 0.5, g, 70, 2);
  const auto b = reference::sample_bridge_fem(sys, m, target(64), 0.5, g, 70, 2);
  ASSERT_EQ(a.values.size(), b.values.size());
  double worst = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    worst = std::max(worst, std::abs(a.values[i] - b.values[i]) / (1 + std::abs(b.values[i])));
  EXPECT_LT(worst, 1e-12);
}

TEST(Reference, ThreadCountDoesNotChangeResults) {
  const SpectralModel m = build_model(CovarianceSpec::white(), ObservationSpec::scaled_identity(1.0), 16, 1.0);
  const TimeGrid g = TimeGrid::uniform(1.0, 9);
  const int before = omp_get_max_threads();
  omp_set_num_threads(1);
  const auto a = sample_bridge(m, target(16), g, 50, 3);
  omp_set_num_threads(4);
  const auto b = sample_bridge(m, target(16), g, 50, 3);
  omp_set_num_threads(before);
  EXPECT_EQ(a.values, b.values);
}
