#include "descent/physics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "descent/errors.hpp"

namespace descent {

bool RadarBlip::finite() const {
  return std::isfinite(t) && std::isfinite(h) && std::isfinite(rocd) && std::isfinite(v_ias) &&
         std::isfinite(mach);
}

double Trajectory::min_altitude() const {
  double m = blips.front().h;
  for (const auto& b : blips) m = std::min(m, b.h);
  return m;
}

double Trajectory::max_altitude() const {
  double m = blips.front().h;
  for (const auto& b : blips) m = std::max(m, b.h);
  return m;
}

void AircraftConfig::validate() const {
  if (!(mass > 0.0)) throw std::domain_error("AircraftConfig: mass must be > 0");
  if (!(max_fl > 150)) throw std::domain_error("AircraftConfig: max_fl must be > 150");
  if (!(mach_ref > 0.0 && mach_ref < 1.0)) {
    throw std::domain_error("AircraftConfig: mach_ref must be in (0,1)");
  }
  if (!(cas_ref > 0.0)) throw std::domain_error("AircraftConfig: cas_ref must be > 0");
  for (std::size_t i = 1; i < nominal_cas_schedule.size(); ++i) {
    if (!(nominal_cas_schedule[i].h > nominal_cas_schedule[i - 1].h)) {
      throw std::domain_error("AircraftConfig: nominal_cas_schedule must be ascending in h");
    }
  }
}

double AircraftConfig::nominal_cas_at(double h) const {
  if (nominal_cas_schedule.empty()) return cas_ref;
  const auto& s = nominal_cas_schedule;
  if (h <= s.front().h) return s.front().cas;
  if (h >= s.back().h) return s.back().cas;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (h <= s[i].h) {
      const double w = (h - s[i - 1].h) / (s[i].h - s[i - 1].h);
      return s[i - 1].cas + w * (s[i].cas - s[i - 1].cas);
    }
  }
  return s.back().cas;
}

double AircraftConfig::nominal_drag_at(double h) const {
  double v = 0.0;
  for (auto it = nominal_drag_poly.rbegin(); it != nominal_drag_poly.rend(); ++it) {
    v = v * h + *it;
  }
  return v;
}

EsfRegime esf_regime(double h, double h_trans, double h_trop) {
  const bool above_trans = h >= h_trans;
  const bool above_trop = h >= h_trop;
  if (above_trans) {
    return above_trop ? EsfRegime::ConstMachAboveTrop : EsfRegime::ConstMachBelowTrop;
  }
  return above_trop ? EsfRegime::ConstCasAboveTrop : EsfRegime::ConstCasBelowTrop;
}

double energy_share_factor(double mach, EsfRegime regime, const IsaConstants& c) {
  if (!(mach > 0.0 && mach < 1.0)) {
    throw std::domain_error("energy_share_factor: Mach must be in (0,1), got " +
                            std::to_string(mach));
  }
  const double m2 = mach * mach;
  // Temperature-gradient term for constant-CAS/Mach climbs in the troposphere.
  const double grad = c.kappa * c.R * c.lapse_rate / (2.0 * c.g0) * m2;
  // Compressibility terms shared by the constant-CAS factors.
  const double base = 1.0 + 0.5 * (c.kappa - 1.0) * m2;
  const double comp =
      std::pow(base, -1.0 / (c.kappa - 1.0)) * (std::pow(base, c.kappa / (c.kappa - 1.0)) - 1.0);

  switch (regime) {
    case EsfRegime::ConstMachAboveTrop:
      return 1.0;
    case EsfRegime::ConstMachBelowTrop:
      return 1.0 / (1.0 + grad);
    case EsfRegime::ConstCasAboveTrop:
      return 1.0 / (1.0 + comp);
    case EsfRegime::ConstCasBelowTrop:
      return 1.0 / (1.0 + grad + comp);
  }
  throw std::logic_error("energy_share_factor: unknown regime");
}

double idle_thrust(double h, const AircraftConfig& cfg) {
  if (!(h >= 0.0)) throw std::domain_error("idle_thrust: negative altitude");
  const auto& k = cfg.idle_thrust_coeffs;
  return std::max(0.0, k[0] * (1.0 - h / k[1] + k[2] * h * h));
}

double rocd_kernel(double thrust, double drag, double v_tas, double mass, double esf,
                   double g0) {
  return (thrust - drag) * v_tas / (mass * g0) * esf;
}

namespace {

void check_rocd_inputs(double h, double drag, double v_cas) {
  if (!std::isfinite(h) || !std::isfinite(drag) || !std::isfinite(v_cas)) {
    throw std::domain_error("rocd: non-finite input");
  }
  if (!(drag > 0.0)) throw std::domain_error("rocd: drag must be > 0");
  if (!(v_cas > 0.0)) throw std::domain_error("rocd: CAS must be > 0");
}

}  // namespace

double rocd(double h, double drag, double v_cas, double h_trans, const AircraftConfig& cfg,
            const IsaConstants& c) {
  check_rocd_inputs(h, drag, v_cas);
  const double v_tas = cas_to_tas(v_cas, h, c);
  const double mach = mach_number(v_tas, h, c);
  const double f = energy_share_factor(mach, esf_regime(h, h_trans, c.h_trop), c);
  return rocd_kernel(idle_thrust(h, cfg), drag, v_tas, cfg.mass, f, c.g0);
}

double rocd(double h, double drag, double v_cas, const AircraftConfig& cfg,
            const IsaConstants& c) {
  return rocd(h, drag, v_cas, transition_altitude(cfg.cas_ref, cfg.mach_ref, c), cfg, c);
}

double infer_drag(const RadarBlip& blip, double h_trans, const AircraftConfig& cfg,
                  const IsaConstants& c) {
  if (!blip.finite()) throw std::domain_error("infer_drag: non-finite blip");
  if (!(blip.rocd <= 0.0)) throw std::domain_error("infer_drag: blip not descending");
  const double v_tas = cas_to_tas(blip.v_ias, blip.h, c);
  const double f = energy_share_factor(blip.mach, esf_regime(blip.h, h_trans, c.h_trop), c);
  const double denom = f * v_tas;
  if (!(std::abs(denom) > 1e-12)) {
    throw std::domain_error("infer_drag: singular f(M)*V_TAS");
  }
  return idle_thrust(blip.h, cfg) - blip.rocd * cfg.mass * c.g0 / denom;
}

double infer_drag(const RadarBlip& blip, const AircraftConfig& cfg, const IsaConstants& c) {
  return infer_drag(blip, transition_altitude(cfg.cas_ref, cfg.mach_ref, c), cfg, c);
}

void DescentProfile::validate() const {
  grid.validate();
  if (drag_values.size() != grid.size() || cas_values.size() != grid.size()) {
    throw std::domain_error("DescentProfile: value lengths must equal grid length");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(drag_values[i]) || !std::isfinite(cas_values[i]) ||
        drag_values[i] <= 0.0 || cas_values[i] <= 0.0) {
      throw std::domain_error("DescentProfile: values must be finite and positive");
    }
  }
}

namespace {

double interp_on_grid(const AltitudeGrid& g, const std::vector<double>& ys, double h) {
  if (h <= g.bottom()) return ys.front();
  if (h >= g.top()) return ys.back();
  const double x = (h - g.h_i) / g.delta_h;
  const auto lo = static_cast<std::size_t>(x);
  const double w = x - static_cast<double>(lo);
  return ys[lo] + w * (ys[lo + 1] - ys[lo]);
}

}  // namespace

double DescentProfile::drag_at(double h) const { return interp_on_grid(grid, drag_values, h); }
double DescentProfile::cas_at(double h) const { return interp_on_grid(grid, cas_values, h); }

SimulatedTrajectory integrate_descent(const DescentProfile& profile, double h_start,
                                      const AircraftConfig& cfg, const IsaConstants& c,
                                      EsfMode mode) {
  profile.validate();
  const AltitudeGrid& g = profile.grid;
  const double snap = 1e-9 * std::max(1.0, std::abs(h_start));
  if (h_start < g.bottom() - snap || h_start > g.top() + snap) {
    throw std::domain_error("integrate_descent: h_start outside grid span");
  }
  h_start = std::clamp(h_start, g.bottom(), g.top());

  const double h_trans = transition_altitude(cfg.cas_ref, cfg.mach_ref, c);
  const std::size_t n = g.size();

  // Per-level TAS, used both for output and for the exact-profile ESF.
  std::vector<double> v_tas(n), dvdh(n);
  for (std::size_t i = 0; i < n; ++i) v_tas[i] = cas_to_tas(profile.cas_values[i], g.levels[i], c);
  if (mode == EsfMode::ExactProfile) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = (i == 0) ? 0 : i - 1;
      const std::size_t hi = (i + 1 == n) ? i : i + 1;
      dvdh[i] = (v_tas[hi] - v_tas[lo]) / (static_cast<double>(hi - lo) * g.delta_h);
    }
  }

  const auto rocd_at_level = [&](std::size_t i) {
    if (mode == EsfMode::BadaRegimes) {
      return rocd(g.levels[i], profile.drag_values[i], profile.cas_values[i], h_trans, cfg, c);
    }
    const double denom = 1.0 + v_tas[i] / c.g0 * dvdh[i];
    if (!(denom > 1e-3)) {
      throw std::domain_error("integrate_descent: exact-profile ESF is ill-conditioned");
    }
    return rocd_kernel(idle_thrust(g.levels[i], cfg), profile.drag_values[i], v_tas[i], cfg.mass,
                       1.0 / denom, c.g0);
  };

  // Highest grid level at or below h_start.
  std::size_t start = static_cast<std::size_t>((h_start - g.h_i) / g.delta_h + 1e-9);
  start = std::min(start, n - 1);
  const bool off_grid = h_start - g.levels[start] > snap;

  std::vector<double> r(start + 1);
  for (std::size_t i = 0; i <= start; ++i) {
    r[i] = rocd_at_level(i);
    if (r[i] >= -1e-6) {
      throw NonDescendingProfileError("integrate_descent: rocd >= -1e-6 m/s at level " +
                                      std::to_string(g.levels[i]) + " m");
    }
  }

  SimulatedTrajectory out;
  out.samples.reserve(start + 2);
  double t = 0.0;

  const auto emit = [&](double time, double h, double cas, double tas, double rate, double drag) {
    out.samples.push_back({time, h, cas, tas, rate, drag});
  };

  if (off_grid) {
    const double cas0 = profile.cas_at(h_start);
    const double drag0 = profile.drag_at(h_start);
    double r0;
    if (mode == EsfMode::BadaRegimes) {
      r0 = rocd(h_start, drag0, cas0, h_trans, cfg, c);
    } else {
      const double v0 = cas_to_tas(cas0, h_start, c);
      const double slope = (start + 1 < n) ? (v_tas[start + 1] - v_tas[start]) / g.delta_h
                                           : dvdh[start];
      const double denom = 1.0 + v0 / c.g0 * slope;
      if (!(denom > 1e-3)) {
        throw std::domain_error("integrate_descent: exact-profile ESF is ill-conditioned");
      }
      r0 = rocd_kernel(idle_thrust(h_start, cfg), drag0, v0, cfg.mass, 1.0 / denom, c.g0);
    }
    if (r0 >= -1e-6) {
      throw NonDescendingProfileError("integrate_descent: rocd >= -1e-6 m/s at h_start");
    }
    emit(0.0, h_start, cas0, cas_to_tas(cas0, h_start, c), r0, drag0);
    t += (h_start - g.levels[start]) * 0.5 * (1.0 / -r0 + 1.0 / -r[start]);
  }

  emit(t, g.levels[start], profile.cas_values[start], v_tas[start], r[start],
       profile.drag_values[start]);
  for (std::size_t i = start; i-- > 0;) {
    t += g.delta_h * 0.5 * (1.0 / -r[i + 1] + 1.0 / -r[i]);
    emit(t, g.levels[i], profile.cas_values[i], v_tas[i], r[i], profile.drag_values[i]);
  }

  out.time_to_bottom = t;
  return out;
}

}  // namespace descent
