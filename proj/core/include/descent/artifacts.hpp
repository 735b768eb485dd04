#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "descent/fpca.hpp"
#include "descent/generator.hpp"
#include "descent/latent.hpp"
#include "descent/metrics.hpp"
#include "descent/physics.hpp"
#include "descent/synth.hpp"

namespace descent {

/// All artifacts are versioned JSON; loads check the version tag and throw
/// ArtifactVersionError on mismatch, ParseError on malformed content.
inline constexpr int kArtifactVersion = 1;

/// Everything the sampler needs from the fPCA stage except the latent model.
struct BasisArtifact {
  AltitudeGrid grid;
  FpcaBasis drag;
  FpcaBasis cas;
  WeightScaler scaler;  // over concatenated (alpha, beta) weights
};

void save_basis(const std::filesystem::path& path, const BasisArtifact& basis);
BasisArtifact load_basis(const std::filesystem::path& path);

struct ModelArtifact {
  LatentModel model;
  FitReport report;
};

void save_model(const std::filesystem::path& path, const ModelArtifact& artifact);
ModelArtifact load_model(const std::filesystem::path& path);

void save_bounds(const std::filesystem::path& path, const PlausibilityBounds& bounds);
PlausibilityBounds load_bounds(const std::filesystem::path& path);

void save_generation_report(const std::filesystem::path& path, const GenerationReport& report);
GenerationReport load_generation_report(const std::filesystem::path& path);

void save_metrics(const std::filesystem::path& path, const MetricsReport& report);
MetricsReport load_metrics(const std::filesystem::path& path);

struct SplitManifest {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::uint64_t seed = 0;
  double train_frac = 0.8;
};

void save_split_manifest(const std::filesystem::path& path, const SplitManifest& manifest);
SplitManifest load_split_manifest(const std::filesystem::path& path);

/// Hidden truth emitted next to synthetic datasets for oracle comparisons.
struct TruthArtifact {
  SynthTruthSpec spec;
  SynthTruth truth;
};

void save_truth(const std::filesystem::path& path, const TruthArtifact& truth);
TruthArtifact load_truth(const std::filesystem::path& path);

/// Aircraft + ISA scenario config (ISA block optional in the file).
struct AircraftScenario {
  AircraftConfig aircraft;
  IsaConstants isa;
};

void save_aircraft_scenario(const std::filesystem::path& path, const AircraftScenario& scenario);
AircraftScenario load_aircraft_scenario(const std::filesystem::path& path);

}  // namespace descent
