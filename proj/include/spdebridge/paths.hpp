#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spdebridge {

/// Output times 0 = t_0 < t_1 < ... < t_n = T. Purely for path output; all
/// transitions between grid points are sampled exactly.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> points);
  static TimeGrid uniform(double T, std::size_t points);

  std::size_t size() const { return points_.size(); }
  double operator[](std::size_t i) const { return points_[i]; }
  double T() const { return points_.back(); }
  std::span<const double> points() const { return points_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  std::vector<double> points_;
};

/// Sampled trajectories, stored sample-major: value(s, i, k) is coordinate k
/// (eigenmode or node) of sample s at grid time i.
struct PathEnsemble {
  enum class Frame { Spectral, Nodal };

  TimeGrid grid;
  std::size_t samples = 0;
  std::size_t width = 0;
  Frame frame = Frame::Spectral;
  std::uint64_t seed = 0;
  std::vector<double> values;

  PathEnsemble(TimeGrid g, std::size_t n_samples, std::size_t n_width, Frame f, std::uint64_t s)
      : grid(std::move(g)), samples(n_samples), width(n_width), frame(f), seed(s),
        values(n_samples * grid.size() * n_width, 0.0) {}

  double& at(std::size_t s, std::size_t i, std::size_t k) { return values[(s * grid.size() + i) * width + k]; }
  double at(std::size_t s, std::size_t i, std::size_t k) const { return values[(s * grid.size() + i) * width + k]; }
  std::span<double> sample(std::size_t s) { return {values.data() + s * grid.size() * width, grid.size() * width}; }
  std::span<const double> sample(std::size_t s) const {
    return {values.data() + s * grid.size() * width, grid.size() * width};
  }

  bool all_finite() const;
};

/// CSV with header `sample,t,coeff_1,...` (or `node_1,...` for nodal frames);
/// one row per (sample, grid point), 17 significant digits.
void write_csv(std::ostream& os, const PathEnsemble& ensemble);
std::string to_csv(const PathEnsemble& ensemble);

/// %.17g formatting used by every serialized artifact.
std::string format_double(double v);

}  // namespace spdebridge
