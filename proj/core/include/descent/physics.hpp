#pragma once

#include <array>
#include <string>
#include <vector>

#include "descent/atmosphere.hpp"
#include "descent/grid.hpp"
#include "descent/trajectory.hpp"

namespace descent {

struct CasScheduleNode {
  double h;    // m
  double cas;  // m/s
};

/// Per-type performance parameters. Idle thrust is a synthetic quadratic
/// T_HR(h) = c1 * (1 - h/c2 + c3*h^2); only its functional role matters to the
/// pipeline, the drag-inference algebra is thrust-model agnostic.
struct AircraftConfig {
  std::string type_code;
  double mass = 0.0;  // kg
  std::array<double, 3> idle_thrust_coeffs{0.0, 1.0, 0.0};
  double cas_ref = 0.0;   // m/s, nominal descent CAS
  double mach_ref = 0.0;  // nominal descent Mach
  int max_fl = 0;
  std::vector<CasScheduleNode> nominal_cas_schedule;  // ascending h
  std::vector<double> nominal_drag_poly;              // drag N, polynomial in h

  void validate() const;  // throws std::domain_error

  double nominal_cas_at(double h) const;   // piecewise-linear, clamped ends
  double nominal_drag_at(double h) const;  // polynomial evaluation
};

/// Which closed-form energy share factor applies.
enum class EsfRegime {
  ConstCasBelowTrop,
  ConstCasAboveTrop,
  ConstMachBelowTrop,
  ConstMachAboveTrop,
};

/// How the integrator picks the ESF: the BADA regime table (default) or the
/// exact share factor computed from the generated speed profile.
enum class EsfMode { BadaRegimes, ExactProfile };

/// Regime given altitude, the CAS/Mach crossover and the tropopause.
EsfRegime esf_regime(double h, double h_trans, double h_trop);

/// Closed-form energy share factor f(M) for the regime. M must be in (0,1).
double energy_share_factor(double mach, EsfRegime regime, const IsaConstants& c = {});

/// Idle thrust at altitude from the config quadratic, floored at zero.
double idle_thrust(double h, const AircraftConfig& cfg);

/// Core total-energy kernel: dh/dt = ((T_HR - D) * V_TAS / (m * g0)) * f.
double rocd_kernel(double thrust, double drag, double v_tas, double mass, double esf,
                   double g0);

/// ROCD at altitude h for a given drag and CAS; converts CAS->TAS->Mach and
/// selects the ESF regime from the config reference speeds.
double rocd(double h, double drag, double v_cas, const AircraftConfig& cfg,
            const IsaConstants& c = {});

/// Same, with the CAS/Mach crossover precomputed (hot loops).
double rocd(double h, double drag, double v_cas, double h_trans, const AircraftConfig& cfg,
            const IsaConstants& c);

/// Drag inferred from an observed blip by inverting the ROCD relation.
double infer_drag(const RadarBlip& blip, const AircraftConfig& cfg, const IsaConstants& c = {});
double infer_drag(const RadarBlip& blip, double h_trans, const AircraftConfig& cfg,
                  const IsaConstants& c);

/// Drag and CAS as functions of altitude on a grid; the object the latent
/// model ultimately generates and the integrator consumes.
struct DescentProfile {
  AltitudeGrid grid;
  std::vector<double> drag_values;  // N, per level
  std::vector<double> cas_values;   // m/s, per level

  void validate() const;
  double drag_at(double h) const;  // linear interp inside grid span
  double cas_at(double h) const;
};

struct TrajectorySample {
  double t;      // s
  double h;      // m
  double v_cas;  // m/s
  double v_tas;  // m/s
  double rocd;   // m/s
  double drag;   // N
};

struct SimulatedTrajectory {
  std::vector<TrajectorySample> samples;  // t increasing, h decreasing
  double time_to_bottom = 0.0;            // s
};

/// Marches altitude from h_start down to the grid bottom, accumulating time
/// by trapezoidal quadrature of dt = dh / rocd(h). Samples are emitted at
/// every grid level (plus h_start itself when off-grid). Throws
/// NonDescendingProfileError if rocd >= -1e-6 m/s anywhere on the way down.
SimulatedTrajectory integrate_descent(const DescentProfile& profile, double h_start,
                                      const AircraftConfig& cfg, const IsaConstants& c = {},
                                      EsfMode mode = EsfMode::BadaRegimes);

}  // namespace descent
