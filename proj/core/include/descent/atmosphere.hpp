#pragma once

namespace descent {

/// International Standard Atmosphere constants. Defaults are the standard
/// sea-level values; kept in one struct so scenario configs can pin them.
struct IsaConstants {
  double T0 = 288.15;            // K
  double p0 = 101325.0;          // Pa
  double rho0 = 1.225;           // kg/m^3
  double g0 = 9.80665;           // m/s^2
  double kappa = 1.4;            // ratio of specific heats
  double R = 287.05287;          // J/(kg K)
  double lapse_rate = -0.0065;   // K/m, troposphere
  double h_trop = 11000.0;       // m

  void validate() const;  // throws std::domain_error on nonsense values
};

struct AtmosphereState {
  double temperature;     // K
  double pressure;        // Pa
  double density;         // kg/m^3
  double speed_of_sound;  // m/s
};

/// Highest altitude the atmosphere model is defined for.
inline constexpr double kMaxAltitudeMetres = 20000.0;

/// ISA state at geodetic altitude h in [0, 20000] m. Linear temperature below
/// the tropopause, isothermal above, pressure continuous at the joint.
AtmosphereState isa_state(double h, const IsaConstants& c = {});

/// Compressible CAS -> TAS conversion through impact pressure.
double cas_to_tas(double v_cas, double h, const IsaConstants& c = {});

/// Inverse of cas_to_tas.
double tas_to_cas(double v_tas, double h, const IsaConstants& c = {});

double mach_number(double v_tas, double h, const IsaConstants& c = {});

/// Altitude where a constant-CAS schedule meets a constant-Mach schedule,
/// i.e. cas_to_tas(cas_ref, h) == mach_ref * speed_of_sound(h). Bisection to
/// 0.1 m. Throws NoTransitionError when no crossing exists in [0, 20000] m.
double transition_altitude(double cas_ref, double mach_ref, const IsaConstants& c = {});

}  // namespace descent
