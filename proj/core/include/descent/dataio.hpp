#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "descent/physics.hpp"
#include "descent/trajectory.hpp"
#include "descent/units.hpp"

namespace descent {

struct Dataset {
  std::vector<Trajectory> trajectories;
  long quarantined = 0;  // trajectories dropped for invariant violations
  std::vector<std::string> warnings;

  std::size_t size() const { return trajectories.size(); }
};

/// Blip CSV schema: traj_id,type,t_s,h_m,rocd_mps,ias_mps,mach
/// Malformed rows raise ParseError with the line number; trajectories with
/// non-monotone time or non-finite fields are quarantined with a warning.
Dataset read_blips(const std::filesystem::path& path);
void write_blips(const std::filesystem::path& path, const std::vector<Trajectory>& trajs);

/// Generated-trajectory CSV: traj_id,t_s,h_m,v_cas_mps,v_tas_mps,rocd_mps,drag_n
void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<SimulatedTrajectory>& trajs);
std::vector<SimulatedTrajectory> read_trajectories_csv(const std::filesystem::path& path);

struct CleaningParams {
  double min_rocd_mps = 500.0 * kFtPerMinToMps;  // keep blips with rocd <= -this
  int const_run_length = 10;                     // blips per constant-ROCD run
  double const_run_tolerance_mps = 25.0 * kFtPerMinToMps;
};

/// Free-descent selection: keep blips at or below -min_rocd, remove runs of
/// near-constant ROCD (managed-descent heuristic), keep the longest remaining
/// contiguous segment, drop trajectories with fewer than 2 blips. Idempotent.
Dataset clean_descents(const Dataset& ds, const CleaningParams& params = {});

/// Trajectory-level shuffled split; deterministic per seed.
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed);

}  // namespace descent
