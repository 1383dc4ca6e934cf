#include "spdebridge/paths.hpp"

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace spdebridge {

TimeGrid::TimeGrid(std::vector<double> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw std::invalid_argument("time grid needs at least the points 0 and T");
  if (points_.front() != 0.0) throw std::invalid_argument("time grid must start at 0");
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!(points_[i] > points_[i - 1]) || !std::isfinite(points_[i])) {
      throw std::invalid_argument(fmt::format("time grid not strictly increasing at index {}", i));
    }
  }
}

TimeGrid TimeGrid::uniform(double T, std::size_t points) {
  if (points < 2) throw std::invalid_argument("uniform grid needs at least 2 points");
  if (!(T > 0.0)) throw std::invalid_argument("uniform grid needs T > 0");
  std::vector<double> p(points);
  const auto n = static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) p[i] = T * static_cast<double>(i) / n;
  p.back() = T;
  return TimeGrid(std::move(p));
}

bool PathEnsemble::all_finite() const {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

void write_csv(std::ostream& os, const PathEnsemble& ensemble) {
  const char* column = ensemble.frame == PathEnsemble::Frame::Spectral ? "coeff_" : "node_";
  fmt::memory_buffer buf;
  fmt::format_to(std::back_inserter(buf), "sample,t");
  for (std::size_t k = 0; k < ensemble.width; ++k) fmt::format_to(std::back_inserter(buf), ",{}{}", column, k + 1);
  buf.push_back('\n');
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  buf.clear();
  for (std::size_t s = 0; s < ensemble.samples; ++s) {
    for (std::size_t i = 0; i < ensemble.grid.size(); ++i) {
      fmt::format_to(std::back_inserter(buf), "{},{:.17g}", s, ensemble.grid[i]);
      for (std::size_t k = 0; k < ensemble.width; ++k) {
        fmt::format_to(std::back_inserter(buf), ",{:.17g}", ensemble.at(s, i, k));
      }
      buf.push_back('\n');
    }
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    buf.clear();
  }
}

std::string to_csv(const PathEnsemble& ensemble) {
  std::ostringstream os;
  write_csv(os, ensemble);
  return os.str();
}

}  // namespace spdebridge
