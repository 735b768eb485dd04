#include "descent/atmosphere.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "descent/errors.hpp"

namespace descent {

void IsaConstants::validate() const {
  const bool ok = T0 > 0 && p0 > 0 && rho0 > 0 && g0 > 0 && kappa > 0 && R > 0 &&
                  lapse_rate < 0 && h_trop > 0;
  if (!ok) throw std::domain_error("IsaConstants: invalid constant set");
}

namespace {

void check_altitude(double h) {
  if (!(h >= 0.0 && h <= kMaxAltitudeMetres)) {
    throw std::domain_error("altitude out of range [0, 20000] m: " + std::to_string(h));
  }
}

}  // namespace

AtmosphereState isa_state(double h, const IsaConstants& c) {
  check_altitude(h);
  const double t_trop = c.T0 + c.lapse_rate * c.h_trop;
  // Pressure below the tropopause follows the polytropic law; above it the
  // layer is isothermal and pressure decays exponentially from the joint.
  const double p_trop = c.p0 * std::pow(t_trop / c.T0, -c.g0 / (c.lapse_rate * c.R));

  AtmosphereState s{};
  if (h < c.h_trop) {
    s.temperature = c.T0 + c.lapse_rate * h;
    s.pressure = c.p0 * std::pow(s.temperature / c.T0, -c.g0 / (c.lapse_rate * c.R));
  } else {
    s.temperature = t_trop;
    s.pressure = p_trop * std::exp(-c.g0 * (h - c.h_trop) / (c.R * t_trop));
  }
  s.density = s.pressure / (c.R * s.temperature);
  s.speed_of_sound = std::sqrt(c.kappa * c.R * s.temperature);
  return s;
}

double cas_to_tas(double v_cas, double h, const IsaConstants& c) {
  if (!(v_cas >= 0.0)) throw std::domain_error("cas_to_tas: negative CAS");
  const AtmosphereState s = isa_state(h, c);
  const double mu = (c.kappa - 1.0) / c.kappa;
  // Impact pressure a pitot system would read at sea level for this CAS.
  const double qc =
      c.p0 * (std::pow(1.0 + 0.5 * mu * (c.rho0 / c.p0) * v_cas * v_cas, 1.0 / mu) - 1.0);
  const double ratio = std::pow(1.0 + qc / s.pressure, mu) - 1.0;
  return std::sqrt(2.0 / mu * (s.pressure / s.density) * ratio);
}

double tas_to_cas(double v_tas, double h, const IsaConstants& c) {
  if (!(v_tas >= 0.0)) throw std::domain_error("tas_to_cas: negative TAS");
  const AtmosphereState s = isa_state(h, c);
  const double mu = (c.kappa - 1.0) / c.kappa;
  const double qc =
      s.pressure * (std::pow(1.0 + 0.5 * mu * (s.density / s.pressure) * v_tas * v_tas, 1.0 / mu) - 1.0);
  const double ratio = std::pow(1.0 + qc / c.p0, mu) - 1.0;
  return std::sqrt(2.0 / mu * (c.p0 / c.rho0) * ratio);
}

double mach_number(double v_tas, double h, const IsaConstants& c) {
  if (!(v_tas >= 0.0)) throw std::domain_error("mach_number: negative TAS");
  return v_tas / isa_state(h, c).speed_of_sound;
}

double transition_altitude(double cas_ref, double mach_ref, const IsaConstants& c) {
  if (!(cas_ref > 0.0)) throw std::domain_error("transition_altitude: cas_ref must be > 0");
  if (!(mach_ref > 0.0 && mach_ref < 1.0)) {
    throw std::domain_error("transition_altitude: mach_ref must be in (0,1)");
  }
  const auto residual = [&](double h) {
    return cas_to_tas(cas_ref, h, c) - mach_ref * isa_state(h, c).speed_of_sound;
  };
  double lo = 0.0, hi = kMaxAltitudeMetres;
  const double f_lo = residual(lo);
  const double f_hi = residual(hi);
  if (f_lo > 0.0) {
    throw NoTransitionError("transition_altitude: CAS already exceeds the Mach schedule at sea level");
  }
  if (f_hi < 0.0) {
    throw NoTransitionError("transition_altitude: no CAS/Mach crossing below 20000 m");
  }
  // residual is strictly increasing in h, so bisection is safe.
  while (hi - lo > 0.1) {
    const double mid = 0.5 * (lo + hi);
    (residual(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace descent
