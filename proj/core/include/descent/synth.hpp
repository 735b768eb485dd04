#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "descent/dataio.hpp"
#include "descent/grid.hpp"
#include "descent/latent.hpp"
#include "descent/physics.hpp"

namespace descent {

/// Hidden truth for the synthetic fleet: curves come from a known orthonormal
/// basis and latent mixture, blips are produced through the physics
/// integrator so they are dynamically consistent with the ROCD relation.
struct SynthTruthSpec {
  AltitudeGrid grid;
  Eigen::VectorXd mean_drag;   // n_g, N
  Eigen::VectorXd mean_cas;    // n_g, m/s
  Eigen::MatrixXd modes_drag;  // n_g x k_D, orthonormal
  Eigen::MatrixXd modes_cas;   // n_g x k_V, orthonormal
  std::vector<GmmComponent> latent;  // mixture over concatenated (alpha, beta)
  double noise_sigma_drag = 0.0;     // N
  double noise_sigma_cas = 0.0;      // m/s
  double full_span_prob = 0.5;       // gap model: chance a trajectory spans the grid
  double min_top_frac = 0.3;         // lowest truncation top as a fraction of the grid
  int n_trajectories = 0;
  std::uint64_t seed = 0;
  AircraftConfig aircraft;
  IsaConstants isa;

  int latent_dim() const {
    return static_cast<int>(modes_drag.cols() + modes_cas.cols());
  }
  void validate() const;  // throws std::domain_error
};

struct SynthTruth {
  Eigen::MatrixXd weights;         // n_t x (k_D + k_V), true latent draws
  std::vector<double> top_levels;  // observed top altitude per trajectory, m
};

struct SynthResult {
  Dataset dataset;
  SynthTruth truth;
};

SynthResult synth_generate(const SynthTruthSpec& spec);

/// A ready-made plausible fleet spec for an aircraft: smooth mean curves, a
/// small orthonormalised mode set (3 drag, 2 CAS) and a two-component latent
/// mixture. The workhorse fixture behind the CLI synth command and the
/// verification suites.
SynthTruthSpec make_default_synth_spec(const AircraftConfig& aircraft, int n_trajectories,
                                       std::uint64_t seed);

/// An aircraft config with synthetic idle-thrust coefficients and a
/// deliberately mis-specified nominal schedule, mirroring how a globally
/// calibrated baseline drifts from airspace-specific behaviour.
AircraftConfig make_default_aircraft_config(const std::string& type_code);

}  // namespace descent
