#pragma once

#include <cstdint>
#include <vector>

#include "descent/fpca.hpp"
#include "descent/latent.hpp"
#include "descent/physics.hpp"
#include "descent/rng.hpp"

namespace descent {

/// Per-level plausibility envelope: 0.95 x observed minimum and 1.05 x
/// observed maximum of the training data, for drag and CAS separately.
struct PlausibilityBounds {
  AltitudeGrid grid;
  std::vector<double> drag_lower, drag_upper;
  std::vector<double> cas_lower, cas_upper;
  int copied_levels = 0;  // levels that borrowed bounds from a neighbour

  void validate() const;
};

PlausibilityBounds compute_bounds(const GappyCurveMatrix& drag_training,
                                  const GappyCurveMatrix& cas_training);

struct GenerationReport {
  long requested = 0;
  long accepted = 0;
  long rejected_bounds_drag = 0;
  long rejected_bounds_cas = 0;
  long rejected_non_descending = 0;
  double resample_rate = 0.0;  // rejected / (rejected + accepted)
  std::uint64_t seed = 0;

  long rejected() const {
    return rejected_bounds_drag + rejected_bounds_cas + rejected_non_descending;
  }
  long total_draws() const { return accepted + rejected(); }
};

/// Top-of-descent grid level of each test trajectory (snapped down to the
/// grid and clamped to its span); the empirical pool h_start is drawn from.
std::vector<double> test_start_levels(const std::vector<Trajectory>& test_set,
                                      const AltitudeGrid& grid);

double sample_initial_level(const std::vector<double>& start_levels, Rng& rng);

struct GenerationSettings {
  int attempt_cap = 1000;  // consecutive rejections per sample before stalling
  EsfMode esf_mode = EsfMode::BadaRegimes;
};

struct GeneratedSet {
  std::vector<SimulatedTrajectory> trajectories;
  GenerationReport report;
};

/// The full sampling pipeline: latent draw -> reconstruction -> plausibility
/// rejection -> initial-level draw -> descent integration. Sample i uses the
/// substream (seed, i), so results are independent of evaluation order.
/// Throws GenerationStalledError after attempt_cap consecutive rejections.
GeneratedSet generate(const LatentModel& model, const FpcaBasis& basis_drag,
                      const FpcaBasis& basis_cas, const PlausibilityBounds& bounds,
                      const std::vector<double>& start_levels, int n, std::uint64_t seed,
                      const AircraftConfig& cfg, const IsaConstants& isa = {},
                      const GenerationSettings& settings = {});

}  // namespace descent
