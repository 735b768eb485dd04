#pragma once

#include <cstddef>
#include <vector>

namespace descent {

/// Uniform grid of geodetic altitudes [h_i, h_i+dh, ..., h_f], ascending.
struct AltitudeGrid {
  double h_i = 0.0;
  double h_f = 0.0;
  double delta_h = 0.0;
  std::vector<double> levels;

  static AltitudeGrid make(double h_i, double h_f, double delta_h);

  std::size_t size() const { return levels.size(); }
  double bottom() const { return levels.front(); }
  double top() const { return levels.back(); }

  /// Index of the closest level to h (levels are uniform).
  std::size_t nearest_level(double h) const;

  void validate() const;  // throws std::domain_error

  bool operator==(const AltitudeGrid&) const = default;
};

}  // namespace descent
