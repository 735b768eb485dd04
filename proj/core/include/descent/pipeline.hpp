#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "descent/artifacts.hpp"
#include "descent/dataio.hpp"
#include "descent/generator.hpp"
#include "descent/metrics.hpp"
#include "descent/synth.hpp"

namespace descent {

struct SynthKnobs {
  int n_trajectories = 600;
  double noise_sigma_drag = 400.0;
  double noise_sigma_cas = 1.2;
  double full_span_prob = 0.45;
  double min_top_frac = 0.35;
};

struct SweepKnobs {
  std::vector<double> variances{0.5, 0.6, 0.7, 0.8, 0.9};
  int folds = 5;
  int samples_per_fold = 1000;
};

struct RunConfig {
  std::string aircraft_config;  // path to aircraft scenario JSON
  std::string dataset;          // path to blip CSV
  std::string out_dir;
  std::uint64_t seed = 0;
  double explained_variance = 0.8;
  std::string model = "gaussian";  // gaussian | gmm | nf
  int count = 10000;
  double coverage_frac = 0.25;
  std::string esf_mode = "bada_regimes";  // bada_regimes | exact_profile
  double train_frac = 0.8;
  CleaningParams cleaning;
  SynthKnobs synth;
  SweepKnobs sweep;
  GmmOptions gmm;
  NfArchitecture nf_arch;
  NfTrainOptions nf_train;

  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
EsfMode parse_esf_mode(const std::string& name);

/// Everything cmd_fit produces, in memory.
struct FitArtifacts {
  BasisArtifact basis;
  ModelArtifact model;
  PlausibilityBounds bounds;
  Dataset train;
  Dataset test;
  SplitManifest manifest;
};

/// Gappy curve matrices (drag via inference, CAS directly) for a trajectory
/// set on a grid. Trajectories whose span misses the grid entirely are
/// excluded and counted.
struct CurveMatrices {
  GappyCurveMatrix drag;
  GappyCurveMatrix cas;
  int excluded = 0;
};
CurveMatrices build_curve_matrices(const std::vector<Trajectory>& trajs,
                                   const AltitudeGrid& grid, const AircraftConfig& cfg,
                                   const IsaConstants& isa);

/// clean -> split -> grid -> gappy fPCA (drag, CAS) -> latent fit -> bounds.
FitArtifacts run_fit(const Dataset& raw, const AircraftScenario& scenario,
                     const RunConfig& config);

GeneratedSet run_sample(const FitArtifacts& artifacts, const AircraftScenario& scenario,
                        const RunConfig& config);
GeneratedSet run_sample(const BasisArtifact& basis, const LatentModel& model,
                        const PlausibilityBounds& bounds, const Dataset& test,
                        const AircraftScenario& scenario, const RunConfig& config);

/// Deterministic baseline from the nominal CAS schedule and drag polynomial.
SimulatedTrajectory nominal_baseline(const AltitudeGrid& grid, const AircraftScenario& scenario,
                                     EsfMode mode = EsfMode::BadaRegimes);

MetricsReport run_evaluate(const Dataset& test, const std::vector<SimulatedTrajectory>& generated,
                           const AltitudeGrid& grid, const AircraftScenario& scenario,
                           const RunConfig& config);

struct SweepRow {
  int fold = 0;
  double variance = 0.0;
  std::string measure;  // ks | wasserstein | mae
  double value = 0.0;
};

/// Appendix-B style sweep: k-fold CV, per variance value fit + sample +
/// mean per-level ROCD distance against the held-out fold.
std::vector<SweepRow> run_sweep(const Dataset& cleaned, const AircraftScenario& scenario,
                                const RunConfig& config);

// Plot-ready emissions.
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report,
                       const std::string& aircraft, const std::string& model_kind);
void write_curves_csv(const std::filesystem::path& path, const Dataset& test,
                      const std::vector<SimulatedTrajectory>& generated,
                      const AltitudeGrid& grid, double h_transition);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace descent
