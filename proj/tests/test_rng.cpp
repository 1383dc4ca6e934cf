#include <gtest/gtest.h>

#include <cmath>

#include "spdebridge/rng.hpp"

using namespace spdebridge::rng;

// Known-answer vectors of the Random123 reference implementation.
TEST(Philox, KnownAnswers) {
  using A4 = std::array<std::uint32_t, 4>;
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
  EXPECT_EQ(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
            (A4{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
  EXPECT_EQ(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
            (A4{0xd16cfe09u, 0x94fdcceBu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Normal, SequenceMatchesRandomAccess) {
  const StreamKey key{42, Stream::Noise, 7, 3};
  NormalSequence seq(key);
  for (std::uint64_t i = 0; i < 101; ++i) EXPECT_EQ(seq.next(), normal(key, i));
}

TEST(Normal, StreamsDiffer) {
  const double a = normal({1, Stream::Noise, 0, 0}, 0);
  EXPECT_NE(a, normal({1, Stream::Observation, 0, 0}, 0));
  EXPECT_NE(a, normal({2, Stream::Noise, 0, 0}, 0));
  EXPECT_NE(a, normal({1, Stream::Noise, 1, 0}, 0));
  EXPECT_NE(a, normal({1, Stream::Noise, 0, 1}, 0));
  EXPECT_NE(a, normal({1, Stream::Noise, std::uint64_t{1} << 32, 0}, 0));
}

TEST(Normal, MomentsRoughlyStandard) {
  NormalSequence seq({9, Stream::Noise, 0, 0});
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = seq.next();
    ASSERT_TRUE(std::isfinite(x));
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  EXPECT_NEAR(s1 / n, 0.0, 4 / std::sqrt(n));
  EXPECT_NEAR(s2 / n, 1.0, 4 * std::sqrt(2.0 / n));
  EXPECT_NEAR(s4 / n, 3.0, 4 * std::sqrt(96.0 / n));
}
