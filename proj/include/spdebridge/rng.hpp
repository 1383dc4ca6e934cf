#pragma once

// Counter-based normal variates. Every Gaussian used by the samplers is a pure
// function of (seed, stream, sample, mode, step), so sample count, truncation
// level and thread partitioning never change an individual path.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace spdebridge::rng {

/// Philox4x32-10 block cipher (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

/// Independent families of Gaussians. The numeric values are part of the
/// reproducibility contract and must not change.
enum class Stream : std::uint32_t {
  Noise = 1,                // per-mode increments of W
  Observation = 2,          // <Z, e_j>
  FemResidual = 3,          // part of the FEM increment not explained by the spectral modes
  ObservationResidual = 4,  // part of P_h Z not explained by the retained modes
};

/// Identifies one scalar Gaussian sequence indexed by step.
struct StreamKey {
  std::uint64_t seed = 0;
  Stream stream = Stream::Noise;
  std::uint64_t sample = 0;  // < 2^48
  std::uint32_t mode = 0;
};

/// Two standard normals from one Philox block via Box-Muller.
inline std::array<double, 2> normal_pair(const StreamKey& key, std::uint32_t block) {
  const auto sample_lo = static_cast<std::uint32_t>(key.sample);
  const auto sample_hi = static_cast<std::uint32_t>((key.sample >> 32) & 0xFFFFu);
  const auto tag = static_cast<std::uint32_t>(key.stream) << 16;
  const auto out = philox4x32({block, key.mode, sample_lo, sample_hi | tag},
                              {static_cast<std::uint32_t>(key.seed),
                               static_cast<std::uint32_t>(key.seed >> 32)});
  constexpr double kTwoPow53 = 0x1p-53;
  const std::uint64_t a = (std::uint64_t{out[0]} << 21) ^ (out[1] >> 11);
  const std::uint64_t b = (std::uint64_t{out[2]} << 21) ^ (out[3] >> 11);
  const double u1 = (static_cast<double>(a) + 1.0) * kTwoPow53;  // (0, 1]
  const double u2 = static_cast<double>(b) * kTwoPow53;          // [0, 1)
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

/// Standard normal number `step` of the sequence identified by `key`.
inline double normal(const StreamKey& key, std::uint64_t step) {
  return normal_pair(key, static_cast<std::uint32_t>(step >> 1))[step & 1u];
}

/// Sequential reader over one stream; reuses the second half of each block.
class NormalSequence {
 public:
  explicit NormalSequence(const StreamKey& key) : key_(key) {}

  double next() {
    if ((step_ & 1u) == 0) {
      pair_ = normal_pair(key_, static_cast<std::uint32_t>(step_ >> 1));
    }
    return pair_[step_++ & 1u];
  }

 private:
  StreamKey key_;
  std::uint64_t step_ = 0;
  std::array<double, 2> pair_{};
};

}  // namespace spdebridge::rng
