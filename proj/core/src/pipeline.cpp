#include "descent/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "descent/errors.hpp"
#include "descent/rng.hpp"

namespace descent {

using nlohmann::json;

void RunConfig::validate() const {
  if (!(explained_variance > 0.0 && explained_variance <= 1.0)) {
    throw std::domain_error("RunConfig: explained_variance must be in (0,1]");
  }
  if (count < 1) throw std::domain_error("RunConfig: count must be >= 1");
  if (model != "gaussian" && model != "gmm" && model != "nf") {
    throw std::domain_error("RunConfig: model must be gaussian, gmm or nf");
  }
  if (!(coverage_frac > 0.0 && coverage_frac <= 1.0)) {
    throw std::domain_error("RunConfig: coverage_frac must be in (0,1]");
  }
  parse_esf_mode(esf_mode);
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::domain_error("RunConfig: train_frac must be in (0,1)");
  }
}

EsfMode parse_esf_mode(const std::string& name) {
  if (name == "bada_regimes") return EsfMode::BadaRegimes;
  if (name == "exact_profile") return EsfMode::ExactProfile;
  throw std::domain_error("esf_mode must be bada_regimes or exact_profile, got '" + name + "'");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_run_config: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("load_run_config: malformed JSON: " + std::string(e.what()));
  }

  RunConfig c;
  try {
    c.aircraft_config = j.value("aircraft_config", c.aircraft_config);
    c.dataset = j.value("dataset", c.dataset);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.seed = j.value("seed", c.seed);
    c.explained_variance = j.value("explained_variance", c.explained_variance);
    c.model = j.value("model", c.model);
    c.count = j.value("count", c.count);
    c.coverage_frac = j.value("coverage_frac", c.coverage_frac);
    c.esf_mode = j.value("esf_mode", c.esf_mode);
    c.train_frac = j.value("train_frac", c.train_frac);
    if (j.contains("cleaning")) {
      const json& cl = j.at("cleaning");
      c.cleaning.min_rocd_mps = cl.value("min_rocd_mps", c.cleaning.min_rocd_mps);
      c.cleaning.const_run_length = cl.value("const_run_length", c.cleaning.const_run_length);
      c.cleaning.const_run_tolerance_mps =
          cl.value("const_run_tolerance_mps", c.cleaning.const_run_tolerance_mps);
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      c.synth.n_trajectories = s.value("n_trajectories", c.synth.n_trajectories);
      c.synth.noise_sigma_drag = s.value("noise_sigma_drag", c.synth.noise_sigma_drag);
      c.synth.noise_sigma_cas = s.value("noise_sigma_cas", c.synth.noise_sigma_cas);
      c.synth.full_span_prob = s.value("full_span_prob", c.synth.full_span_prob);
      c.synth.min_top_frac = s.value("min_top_frac", c.synth.min_top_frac);
    }
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      if (s.contains("variances")) c.sweep.variances = s.at("variances").get<std::vector<double>>();
      c.sweep.folds = s.value("folds", c.sweep.folds);
      c.sweep.samples_per_fold = s.value("samples_per_fold", c.sweep.samples_per_fold);
    }
    if (j.contains("gmm")) {
      const json& g = j.at("gmm");
      c.gmm.restarts = g.value("restarts", c.gmm.restarts);
      c.gmm.tol = g.value("tol", c.gmm.tol);
      c.gmm.max_iterations = g.value("max_iterations", c.gmm.max_iterations);
      c.gmm.cov_floor = g.value("cov_floor", c.gmm.cov_floor);
      c.gmm.max_components_override =
          g.value("max_components_override", c.gmm.max_components_override);
    }
    if (j.contains("nf")) {
      const json& f = j.at("nf");
      c.nf_arch.n_flows = f.value("n_flows", c.nf_arch.n_flows);
      c.nf_arch.hidden_width = f.value("hidden_width", c.nf_arch.hidden_width);
      c.nf_train.learning_rate = f.value("learning_rate", c.nf_train.learning_rate);
      c.nf_train.momentum = f.value("momentum", c.nf_train.momentum);
      c.nf_train.batch_size = f.value("batch_size", c.nf_train.batch_size);
      c.nf_train.max_epochs = f.value("max_epochs", c.nf_train.max_epochs);
      c.nf_train.patience = f.value("patience", c.nf_train.patience);
      c.nf_train.val_frac = f.value("val_frac", c.nf_train.val_frac);
    }
  } catch (const json::exception& e) {
    throw ParseError("load_run_config: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

namespace {

/// (h ascending, value) pairs from a time-ordered descent, dropping blips
/// that break altitude monotonicity.
void ascending_series(const Trajectory& traj, std::vector<double>& hs,
                      const std::function<double(const RadarBlip&)>& get,
                      std::vector<double>& ys) {
  hs.clear();
  ys.clear();
  for (auto it = traj.blips.rbegin(); it != traj.blips.rend(); ++it) {
    if (!hs.empty() && !(it->h > hs.back())) continue;
    hs.push_back(it->h);
    ys.push_back(get(*it));
  }
}

}  // namespace

CurveMatrices build_curve_matrices(const std::vector<Trajectory>& trajs,
                                   const AltitudeGrid& grid, const AircraftConfig& cfg,
                                   const IsaConstants& isa) {
  const double h_trans = transition_altitude(cfg.cas_ref, cfg.mach_ref, isa);
  std::vector<Eigen::VectorXd> drag_rows, cas_rows;
  std::vector<BoolArray> masks;
  std::vector<double> hs, ys;
  int excluded = 0;

  for (const auto& traj : trajs) {
    ascending_series(traj, hs, [&](const RadarBlip& b) { return infer_drag(b, h_trans, cfg, isa); },
                     ys);
    if (hs.size() < 2) {
      ++excluded;
      continue;
    }
    const InterpolatedRow drag_row = interpolate_to_grid(hs, ys, grid);
    ascending_series(traj, hs, [](const RadarBlip& b) { return b.v_ias; }, ys);
    const InterpolatedRow cas_row = interpolate_to_grid(hs, ys, grid);
    if (drag_row.mask.count() < 2) {
      ++excluded;  // span disjoint from (or barely touching) the grid
      continue;
    }
    drag_rows.push_back(drag_row.values);
    cas_rows.push_back(cas_row.values);
    masks.push_back(drag_row.mask);
  }
  if (drag_rows.empty()) {
    throw InsufficientDataError("build_curve_matrices: no trajectory overlaps the grid");
  }

  const auto n_t = static_cast<Eigen::Index>(drag_rows.size());
  const auto n_g = static_cast<Eigen::Index>(grid.size());
  CurveMatrices out;
  out.excluded = excluded;
  out.drag.grid = grid;
  out.cas.grid = grid;
  out.drag.values.resize(n_t, n_g);
  out.cas.values.resize(n_t, n_g);
  out.drag.mask.resize(n_t, n_g);
  out.cas.mask.resize(n_t, n_g);
  for (Eigen::Index i = 0; i < n_t; ++i) {
    out.drag.values.row(i) = drag_rows[static_cast<std::size_t>(i)].transpose();
    out.cas.values.row(i) = cas_rows[static_cast<std::size_t>(i)].transpose();
    out.drag.mask.row(i) = masks[static_cast<std::size_t>(i)].transpose();
    out.cas.mask.row(i) = masks[static_cast<std::size_t>(i)].transpose();
  }
  return out;
}

namespace {

FitResult fit_latent(const Eigen::MatrixXd& weights, const RunConfig& config) {
  if (config.model == "gaussian") return fit_gaussian(weights);
  if (config.model == "gmm") return fit_gmm(weights, config.seed, config.gmm);
  return fit_nf(weights, config.seed, config.nf_arch, config.nf_train);
}

}  // namespace

FitArtifacts run_fit(const Dataset& raw, const AircraftScenario& scenario,
                     const RunConfig& config) {
  config.validate();
  const Dataset cleaned = clean_descents(raw, config.cleaning);
  auto [train, test] = split(cleaned, config.train_frac, config.seed);

  FitArtifacts out;
  out.train = std::move(train);
  out.test = std::move(test);
  for (const auto& t : out.train.trajectories) out.manifest.train_ids.push_back(t.id);
  for (const auto& t : out.test.trajectories) out.manifest.test_ids.push_back(t.id);
  out.manifest.seed = config.seed;
  out.manifest.train_frac = config.train_frac;

  const AltitudeGrid grid =
      build_grid(out.train.trajectories, config.coverage_frac);
  const CurveMatrices matrices =
      build_curve_matrices(out.train.trajectories, grid, scenario.aircraft, scenario.isa);

  const GappyFpcaResult drag_fit = gappy_fpca(matrices.drag, config.explained_variance);
  const GappyFpcaResult cas_fit = gappy_fpca(matrices.cas, config.explained_variance);

  Eigen::MatrixXd weights(drag_fit.weights.rows(),
                          drag_fit.weights.cols() + cas_fit.weights.cols());
  weights << drag_fit.weights, cas_fit.weights;

  out.basis.grid = grid;
  out.basis.drag = drag_fit.basis;
  out.basis.cas = cas_fit.basis;
  out.basis.scaler = WeightScaler::fit(weights);

  const FitResult fit = fit_latent(weights, config);
  out.model.model = fit.model;
  out.model.report = fit.report;

  out.bounds = compute_bounds(matrices.drag, matrices.cas);
  return out;
}

GeneratedSet run_sample(const BasisArtifact& basis, const LatentModel& model,
                        const PlausibilityBounds& bounds, const Dataset& test,
                        const AircraftScenario& scenario, const RunConfig& config) {
  const std::vector<double> starts = test_start_levels(test.trajectories, basis.grid);
  GenerationSettings settings;
  settings.esf_mode = parse_esf_mode(config.esf_mode);
  return generate(model, basis.drag, basis.cas, bounds, starts, config.count, config.seed,
                  scenario.aircraft, scenario.isa, settings);
}

GeneratedSet run_sample(const FitArtifacts& artifacts, const AircraftScenario& scenario,
                        const RunConfig& config) {
  return run_sample(artifacts.basis, artifacts.model.model, artifacts.bounds, artifacts.test,
                    scenario, config);
}

SimulatedTrajectory nominal_baseline(const AltitudeGrid& grid, const AircraftScenario& scenario,
                                     EsfMode mode) {
  DescentProfile profile;
  profile.grid = grid;
  profile.drag_values.resize(grid.size());
  profile.cas_values.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    profile.drag_values[j] = scenario.aircraft.nominal_drag_at(grid.levels[j]);
    profile.cas_values[j] = scenario.aircraft.nominal_cas_at(grid.levels[j]);
  }
  return integrate_descent(profile, grid.top(), scenario.aircraft, scenario.isa, mode);
}

MetricsReport run_evaluate(const Dataset& test, const std::vector<SimulatedTrajectory>& generated,
                           const AltitudeGrid& grid, const AircraftScenario& scenario,
                           const RunConfig& config) {
  const SimulatedTrajectory baseline =
      nominal_baseline(grid, scenario, parse_esf_mode(config.esf_mode));
  return build_report(test.trajectories, generated, baseline, grid, scenario.aircraft,
                      scenario.isa);
}

std::vector<SweepRow> run_sweep(const Dataset& cleaned, const AircraftScenario& scenario,
                                const RunConfig& config) {
  const int k = config.sweep.folds;
  if (k < 2) throw std::domain_error("run_sweep: need at least 2 folds");
  const std::size_t n = cleaned.trajectories.size();
  if (n < static_cast<std::size_t>(2 * k)) {
    throw InsufficientDataError("run_sweep: fold too small (need >= 2 trajectories per fold)");
  }

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(config.seed);
  rng.shuffle(idx);

  std::vector<SweepRow> rows;
  for (double variance : config.sweep.variances) {
    for (int fold = 0; fold < k; ++fold) {
      Dataset train, test;
      for (std::size_t i = 0; i < n; ++i) {
        (static_cast<int>(i % static_cast<std::size_t>(k)) == fold ? test : train)
            .trajectories.push_back(cleaned.trajectories[idx[i]]);
      }

      RunConfig fold_config = config;
      fold_config.explained_variance = variance;
      fold_config.count = config.sweep.samples_per_fold;

      const AltitudeGrid grid = build_grid(train.trajectories, config.coverage_frac);
      const CurveMatrices matrices =
          build_curve_matrices(train.trajectories, grid, scenario.aircraft, scenario.isa);
      const GappyFpcaResult drag_fit = gappy_fpca(matrices.drag, variance);
      const GappyFpcaResult cas_fit = gappy_fpca(matrices.cas, variance);
      Eigen::MatrixXd weights(drag_fit.weights.rows(),
                              drag_fit.weights.cols() + cas_fit.weights.cols());
      weights << drag_fit.weights, cas_fit.weights;

      BasisArtifact basis;
      basis.grid = grid;
      basis.drag = drag_fit.basis;
      basis.cas = cas_fit.basis;
      basis.scaler = WeightScaler::fit(weights);

      const FitResult fit = fit_latent(weights, fold_config);
      const PlausibilityBounds bounds = compute_bounds(matrices.drag, matrices.cas);
      const GeneratedSet generated =
          run_sample(basis, fit.model, bounds, test, scenario, fold_config);

      // Appendix-B style error: mean per-level ROCD distance over the whole
      // grid (no transition split).
      const PerLevelSamples test_levels =
          collect_levels(test.trajectories, grid, LevelQuantity::Rocd);
      const PerLevelSamples gen_levels =
          collect_levels(generated.trajectories, grid, LevelQuantity::Rocd);
      const double above_everything = grid.top() + 1.0;
      const auto value_of = [&](DistanceMeasure m) {
        const SplitDistance d =
            per_level_distance(test_levels, gen_levels, grid, m, above_everything);
        if (!d.below) throw InsufficientDataError("run_sweep: no usable levels in fold");
        return *d.below;
      };
      rows.push_back({fold, variance, "ks", value_of(DistanceMeasure::Ks)});
      rows.push_back({fold, variance, "wasserstein", value_of(DistanceMeasure::W1)});
      rows.push_back({fold, variance, "mae", value_of(DistanceMeasure::Mae)});
    }
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

void emit_series(std::ofstream& out, const std::string& quantity, const std::string& series,
                 const std::vector<double>& samples) {
  if (samples.size() < 2) return;
  std::vector<double> sorted(samples);
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    out << quantity << ',' << series << ",ecdf," << fmt(sorted[i]) << ','
        << fmt(static_cast<double>(i + 1) / n) << '\n';
  }
  const std::vector<double> grid = kde_default_grid(sorted);
  const std::vector<double> pdf = kde_pdf(sorted, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out << quantity << ',' << series << ",pdf," << fmt(grid[i]) << ',' << fmt(pdf[i]) << '\n';
  }
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report,
                       const std::string& aircraft, const std::string& model_kind) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_metrics_csv: cannot open " + path.string());
  out << "aircraft,quantity,split,measure,model,value\n";
  const auto row = [&](const std::string& quantity, const std::string& split,
                       const std::string& measure, const std::string& model, double value) {
    out << aircraft << ',' << quantity << ',' << split << ',' << measure << ',' << model << ','
        << fmt(value) << '\n';
  };
  row("time_to_bottom", "all", "ks", model_kind, report.time_to_bottom.ks);
  row("time_to_bottom", "all", "wasserstein", model_kind, report.time_to_bottom.wasserstein);
  row("time_to_bottom", "all", "mae", model_kind, report.time_to_bottom.mae);
  row("time_to_bottom", "all", "mae", "bada", report.time_to_bottom_bada_mae);

  const auto cells = [&](const std::string& quantity, const SplitCells& c) {
    const auto side = [&](const std::string& split, const std::optional<DistanceTriple>& t,
                          const std::optional<double>& bada) {
      if (t) {
        row(quantity, split, "ks", model_kind, t->ks);
        row(quantity, split, "wasserstein", model_kind, t->wasserstein);
        row(quantity, split, "mae", model_kind, t->mae);
      }
      if (bada) row(quantity, split, "mae", "bada", *bada);
    };
    side("above", c.above, c.bada_mae_above);
    side("below", c.below, c.bada_mae_below);
  };
  cells("cas", report.cas);
  cells("rocd", report.rocd);
}

void write_curves_csv(const std::filesystem::path& path, const Dataset& test,
                      const std::vector<SimulatedTrajectory>& generated,
                      const AltitudeGrid& grid, double h_transition) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_curves_csv: cannot open " + path.string());
  out << "quantity,series,kind,x,y\n";

  const auto safe_tb = [&](auto&& trajs) -> std::vector<double> {
    try {
      return time_to_bottom_distribution(trajs, grid);
    } catch (const std::exception&) {
      return {};
    }
  };
  emit_series(out, "time_to_bottom", "test", safe_tb(test.trajectories));
  emit_series(out, "time_to_bottom", "generated", safe_tb(generated));

  const std::size_t level = grid.nearest_level(h_transition);
  const PerLevelSamples test_cas = collect_levels(test.trajectories, grid, LevelQuantity::Cas);
  const PerLevelSamples gen_cas = collect_levels(generated, grid, LevelQuantity::Cas);
  const PerLevelSamples test_rocd = collect_levels(test.trajectories, grid, LevelQuantity::Rocd);
  const PerLevelSamples gen_rocd = collect_levels(generated, grid, LevelQuantity::Rocd);
  emit_series(out, "cas_at_transition", "test", test_cas.by_level[level]);
  emit_series(out, "cas_at_transition", "generated", gen_cas.by_level[level]);
  emit_series(out, "rocd_at_transition", "test", test_rocd.by_level[level]);
  emit_series(out, "rocd_at_transition", "generated", gen_rocd.by_level[level]);
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_sweep_csv: cannot open " + path.string());
  out << "fold,variance,measure,value\n";
  for (const auto& r : rows) {
    out << r.fold << ',' << fmt(r.variance) << ',' << r.measure << ',' << fmt(r.value) << '\n';
  }
}

}  // namespace descent
