#include "descent/synth.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "descent/atmosphere.hpp"
#include "descent/errors.hpp"
#include "descent/rng.hpp"
#include "descent/units.hpp"

namespace descent {

void SynthTruthSpec::validate() const {
  grid.validate();
  aircraft.validate();
  const auto n_g = static_cast<Eigen::Index>(grid.size());
  if (mean_drag.size() != n_g || mean_cas.size() != n_g || modes_drag.rows() != n_g ||
      modes_cas.rows() != n_g) {
    throw std::domain_error("SynthTruthSpec: grid/vector shape mismatch");
  }
  const auto gram_err = [](const Eigen::MatrixXd& m) {
    if (m.cols() == 0) return 0.0;
    Eigen::MatrixXd g = m.transpose() * m;
    g -= Eigen::MatrixXd::Identity(g.rows(), g.cols());
    return g.cwiseAbs().maxCoeff();
  };
  if (gram_err(modes_drag) > 1e-10 || gram_err(modes_cas) > 1e-10) {
    throw std::domain_error("SynthTruthSpec: truth modes must be orthonormal within 1e-10");
  }
  if (noise_sigma_drag < 0.0 || noise_sigma_cas < 0.0) {
    throw std::domain_error("SynthTruthSpec: noise sigma must be >= 0");
  }
  if (latent.empty()) throw std::domain_error("SynthTruthSpec: latent mixture is empty");
  double wsum = 0.0;
  for (const auto& c : latent) {
    if (c.mean.size() != latent_dim() || c.covariance.rows() != latent_dim()) {
      throw std::domain_error("SynthTruthSpec: latent component dim mismatch");
    }
    wsum += c.weight;
  }
  if (std::abs(wsum - 1.0) > 1e-10) {
    throw std::domain_error("SynthTruthSpec: latent weights must sum to 1");
  }
  if (n_trajectories < 1) throw std::domain_error("SynthTruthSpec: n_trajectories must be >= 1");
  if (!(full_span_prob >= 0.0 && full_span_prob <= 1.0) ||
      !(min_top_frac > 0.0 && min_top_frac <= 1.0)) {
    throw std::domain_error("SynthTruthSpec: bad gap model");
  }
}

namespace {

Eigen::MatrixXd component_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(0.0, ev[i]));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

SynthResult synth_generate(const SynthTruthSpec& spec) {
  spec.validate();
  const auto n_g = static_cast<Eigen::Index>(spec.grid.size());
  const int k_d = static_cast<int>(spec.modes_drag.cols());
  const int k_v = static_cast<int>(spec.modes_cas.cols());
  const int dim = k_d + k_v;

  std::vector<Eigen::MatrixXd> sqrts;
  sqrts.reserve(spec.latent.size());
  for (const auto& c : spec.latent) sqrts.push_back(component_sqrt(c.covariance));

  const auto min_top =
      static_cast<std::size_t>(std::ceil(spec.min_top_frac * double(spec.grid.size() - 1)));

  SynthResult out;
  out.truth.weights.resize(spec.n_trajectories, dim);
  out.truth.top_levels.resize(spec.n_trajectories);
  out.dataset.trajectories.reserve(spec.n_trajectories);

  for (int i = 0; i < spec.n_trajectories; ++i) {
    Rng rng = Rng::substream(spec.seed, static_cast<std::uint64_t>(i));

    // Gap model first, then latent draw, then observation noise, so that
    // changing the noise level leaves ids, spans and weights untouched.
    std::size_t top = spec.grid.size() - 1;
    if (rng.uniform() >= spec.full_span_prob) {
      top = min_top + rng.bounded(spec.grid.size() - min_top);
    }

    const double u = rng.uniform();
    std::size_t comp = 0;
    double acc = 0.0;
    for (; comp + 1 < spec.latent.size(); ++comp) {
      acc += spec.latent[comp].weight;
      if (u < acc) break;
    }
    Eigen::VectorXd z(dim);
    for (int j = 0; j < dim; ++j) z[j] = rng.normal();
    const Eigen::VectorXd w = spec.latent[comp].mean + sqrts[comp] * z;

    Eigen::VectorXd drag = spec.mean_drag + spec.modes_drag * w.head(k_d);
    Eigen::VectorXd cas = spec.mean_cas + spec.modes_cas * w.tail(k_v);
    if (spec.noise_sigma_drag > 0.0) {
      for (Eigen::Index j = 0; j < n_g; ++j) drag[j] += spec.noise_sigma_drag * rng.normal();
    }
    if (spec.noise_sigma_cas > 0.0) {
      for (Eigen::Index j = 0; j < n_g; ++j) cas[j] += spec.noise_sigma_cas * rng.normal();
    }

    DescentProfile profile;
    profile.grid = AltitudeGrid::make(spec.grid.bottom(), spec.grid.levels[top],
                                      spec.grid.delta_h);
    profile.drag_values.assign(drag.data(), drag.data() + top + 1);
    profile.cas_values.assign(cas.data(), cas.data() + top + 1);

    SimulatedTrajectory sim;
    try {
      sim = integrate_descent(profile, spec.grid.levels[top], spec.aircraft, spec.isa);
    } catch (const NonDescendingProfileError& e) {
      throw std::domain_error(std::string("synth_generate: spec produces non-descending curves (") +
                              e.what() + ")");
    } catch (const std::domain_error& e) {
      throw std::domain_error(std::string("synth_generate: spec produces invalid curves (") +
                              e.what() + ")");
    }

    Trajectory traj;
    traj.id = "synth-" + std::to_string(i);
    traj.aircraft_type = spec.aircraft.type_code;
    traj.blips.reserve(sim.samples.size());
    for (const auto& s : sim.samples) {
      RadarBlip b{};
      b.t = s.t;
      b.h = s.h;
      b.rocd = s.rocd;
      b.v_ias = s.v_cas;
      b.mach = s.v_tas / isa_state(s.h, spec.isa).speed_of_sound;
      traj.blips.push_back(b);
    }
    out.dataset.trajectories.push_back(std::move(traj));

    out.truth.weights.row(i) = w.transpose();
    out.truth.top_levels[i] = spec.grid.levels[top];
  }
  return out;
}

namespace {

/// Twice-iterated modified Gram-Schmidt; returns orthonormal columns.
Eigen::MatrixXd orthonormalize(Eigen::MatrixXd m) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index p = 0; p < c; ++p) {
        m.col(c) -= m.col(p).dot(m.col(c)) * m.col(p);
      }
      m.col(c) /= m.col(c).norm();
    }
  }
  return m;
}

}  // namespace

AircraftConfig make_default_aircraft_config(const std::string& type_code) {
  AircraftConfig cfg;
  cfg.type_code = type_code;
  cfg.mass = 65000.0;
  cfg.idle_thrust_coeffs = {6000.0, 20000.0, 1e-9};
  cfg.cas_ref = 140.0;
  cfg.mach_ref = 0.79;
  cfg.max_fl = 370;

  const double h_bottom = kFl150Metres;
  const double h_top = fl_to_metres(cfg.max_fl);
  const double base_drag = cfg.mass * 9.80665 / 14.0;

  // Nominal schedule drifts from the synthetic truth: faster CAS and more
  // drag, so the deterministic baseline under-predicts time to descend.
  cfg.nominal_cas_schedule = {{h_bottom, 160.0}, {9000.0, 158.0}, {h_top, 140.0}};
  const double slope = 0.18 * base_drag / (h_top - h_bottom);
  cfg.nominal_drag_poly = {1.12 * base_drag - slope * h_bottom, slope};
  return cfg;
}

SynthTruthSpec make_default_synth_spec(const AircraftConfig& aircraft, int n_trajectories,
                                       std::uint64_t seed) {
  SynthTruthSpec spec;
  spec.aircraft = aircraft;
  spec.grid = AltitudeGrid::make(kFl150Metres, fl_to_metres(aircraft.max_fl), kMetresPerFl);
  spec.n_trajectories = n_trajectories;
  spec.seed = seed;
  spec.noise_sigma_drag = 400.0;
  spec.noise_sigma_cas = 1.2;
  spec.full_span_prob = 0.45;
  spec.min_top_frac = 0.35;

  const auto n_g = static_cast<Eigen::Index>(spec.grid.size());
  const double base_drag = aircraft.mass * 9.80665 / 14.0;
  spec.mean_drag.resize(n_g);
  spec.mean_cas.resize(n_g);
  Eigen::MatrixXd raw_d(n_g, 3), raw_v(n_g, 2);
  for (Eigen::Index j = 0; j < n_g; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(n_g - 1);
    spec.mean_drag[j] = base_drag * (1.0 + 0.25 * x);
    spec.mean_cas[j] = aircraft.cas_ref * (1.05 - 0.15 * x * x);
    raw_d(j, 0) = 1.0;
    raw_d(j, 1) = x - 0.5;
    raw_d(j, 2) = std::sin(M_PI * x);
    raw_v(j, 0) = 1.0;
    raw_v(j, 1) = x - 0.5;
  }
  spec.modes_drag = orthonormalize(raw_d);
  spec.modes_cas = orthonormalize(raw_v);

  // Weight scales: modes have unit norm, so a weight of s * sqrt(n_g) moves
  // curve values by roughly s per level.
  const double root_ng = std::sqrt(static_cast<double>(n_g));
  const Eigen::VectorXd stds =
      (Eigen::VectorXd(5) << 0.050 * base_drag, 0.030 * base_drag, 0.018 * base_drag,
       0.035 * aircraft.cas_ref, 0.020 * aircraft.cas_ref)
          .finished() *
      root_ng;

  GmmComponent a, b;
  a.weight = 0.55;
  b.weight = 0.45;
  a.mean = Eigen::VectorXd::Zero(5);
  b.mean = Eigen::VectorXd::Zero(5);
  a.mean[0] = 1.2 * stds[0];
  b.mean[0] = -1.2 * stds[0];
  a.mean[3] = -0.8 * stds[3];
  b.mean[3] = 0.8 * stds[3];
  a.covariance = stds.array().square().matrix().asDiagonal();
  b.covariance = a.covariance;
  spec.latent = {a, b};
  return spec;
}

}  // namespace descent
