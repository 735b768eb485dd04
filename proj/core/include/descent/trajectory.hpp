#pragma once

#include <string>
#include <vector>

namespace descent {

/// One Mode-S style observation. IAS is treated as CAS (noisy measurement);
/// inferred drag is derived on demand, never stored.
struct RadarBlip {
  double t;      // s
  double h;      // geodetic altitude, m
  double rocd;   // dh/dt, m/s (negative in descent)
  double v_ias;  // m/s
  double mach;   // dimensionless

  bool finite() const;
};

struct Trajectory {
  std::string id;
  std::string aircraft_type;
  std::vector<RadarBlip> blips;  // strictly increasing t

  double min_altitude() const;
  double max_altitude() const;
};

}  // namespace descent
