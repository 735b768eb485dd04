#pragma once

#include <optional>
#include <span>
#include <vector>

#include "descent/fpca.hpp"
#include "descent/grid.hpp"
#include "descent/physics.hpp"
#include "descent/trajectory.hpp"

namespace descent {

struct DistanceTriple {
  double ks = 0.0;           // in [0,1]
  double wasserstein = 0.0;  // units of the quantity
  double mae = 0.0;          // |mean(a) - mean(b)|
};

/// Exact two-sample KS statistic (supremum ECDF discrepancy).
double ks_distance(std::span<const double> a, std::span<const double> b);

/// Exact 1-D Wasserstein-1: integral of |ECDF_a - ECDF_b| over the support.
double wasserstein1(std::span<const double> a, std::span<const double> b);

double mae_of_means(std::span<const double> a, std::span<const double> b);

DistanceTriple distance_triple(std::span<const double> a, std::span<const double> b);

/// Times to descend the full grid for test trajectories that span it.
/// Throws InsufficientDataError when no trajectory spans the grid.
std::vector<double> time_to_bottom_distribution(const std::vector<Trajectory>& trajs,
                                                const AltitudeGrid& grid);
std::vector<double> time_to_bottom_distribution(const std::vector<SimulatedTrajectory>& trajs,
                                                const AltitudeGrid& grid);

enum class LevelQuantity { Cas, Rocd };
enum class DistanceMeasure { Ks, W1, Mae };

/// Values observed at each grid level, pooled across trajectories that
/// observe that level.
struct PerLevelSamples {
  std::vector<std::vector<double>> by_level;
};

PerLevelSamples collect_levels(const std::vector<Trajectory>& trajs, const AltitudeGrid& grid,
                               LevelQuantity q);
PerLevelSamples collect_levels(const std::vector<SimulatedTrajectory>& trajs,
                               const AltitudeGrid& grid, LevelQuantity q);

struct SplitDistance {
  std::optional<double> above;  // mean over levels strictly above transition
  std::optional<double> below;  // mean over levels at or below transition
};

/// Steps 1-4 of the per-level procedure: distance at each level, averaged
/// separately above and below the transition altitude. Levels where either
/// side has no data are skipped; a side with no usable levels is absent.
SplitDistance per_level_distance(const PerLevelSamples& test, const PerLevelSamples& gen,
                                 const AltitudeGrid& grid, DistanceMeasure measure,
                                 double h_transition);

/// Per-level |mean(test) - baseline| against a deterministic baseline curve.
SplitDistance per_level_mae_vs_baseline(const PerLevelSamples& test,
                                        const std::vector<double>& baseline_by_level,
                                        const std::vector<bool>& baseline_mask,
                                        const AltitudeGrid& grid, double h_transition);

/// Scott-rule Gaussian KDE evaluated on eval_grid.
std::vector<double> kde_pdf(std::span<const double> samples, std::span<const double> eval_grid);
double kde_bandwidth(std::span<const double> samples);
/// Evaluation grid covering the samples padded by 5 sample-sigmas.
std::vector<double> kde_default_grid(std::span<const double> samples, int n_points = 256);

struct SplitCells {
  std::optional<DistanceTriple> above;
  std::optional<DistanceTriple> below;
  std::optional<double> bada_mae_above;
  std::optional<double> bada_mae_below;
};

struct MetricsReport {
  DistanceTriple time_to_bottom;
  double time_to_bottom_bada_mae = 0.0;
  SplitCells cas;
  SplitCells rocd;
  double transition_altitude_used = 0.0;  // m
  long n_test_spanning = 0;
  long n_generated = 0;
};

/// Full evaluation table: time-to-bottom plus per-level CAS and ROCD
/// distances split at the CAS/Mach transition, with MAE-only columns for the
/// deterministic baseline.
MetricsReport build_report(const std::vector<Trajectory>& test,
                           const std::vector<SimulatedTrajectory>& generated,
                           const SimulatedTrajectory& bada_baseline, const AltitudeGrid& grid,
                           const AircraftConfig& cfg, const IsaConstants& isa = {});

}  // namespace descent
