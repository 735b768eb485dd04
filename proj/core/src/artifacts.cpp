#include "descent/artifacts.hpp"

#include <fstream>

#include <json.hpp>

#include "descent/errors.hpp"

namespace descent {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vec_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd mat_from_json(const json& rows) {
  const auto n_rows = rows.size();
  const auto n_cols = n_rows == 0 ? 0 : rows[0].size();
  Eigen::MatrixXd m(n_rows, n_cols);
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (rows[r].size() != n_cols) throw ParseError("artifact: ragged matrix rows");
    for (std::size_t c = 0; c < n_cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c].get<double>();
    }
  }
  return m;
}

json grid_to_json(const AltitudeGrid& g) {
  return json{{"h_i", g.h_i}, {"h_f", g.h_f}, {"delta_h", g.delta_h},
              {"n_levels", g.levels.size()}};
}

AltitudeGrid grid_from_json(const json& j) {
  AltitudeGrid g = AltitudeGrid::make(j.at("h_i").get<double>(), j.at("h_f").get<double>(),
                                      j.at("delta_h").get<double>());
  if (g.levels.size() != j.at("n_levels").get<std::size_t>()) {
    throw ParseError("artifact: grid level count mismatch");
  }
  return g;
}

json scaler_to_json(const WeightScaler& s) {
  return json{{"mean", vec_to_json(s.mean)}, {"std", vec_to_json(s.std)}};
}

WeightScaler scaler_from_json(const json& j) {
  WeightScaler s;
  s.mean = vec_from_json(j.at("mean"));
  s.std = vec_from_json(j.at("std"));
  return s;
}

json basis_to_json(const FpcaBasis& b) {
  return json{{"mean", vec_to_json(b.mean)},
              {"modes", mat_to_json(b.modes)},
              {"eigenvalues", vec_to_json(b.eigenvalues)},
              {"explained_variance", b.explained_variance}};
}

FpcaBasis basis_from_json(const json& j) {
  FpcaBasis b;
  b.mean = vec_from_json(j.at("mean"));
  b.modes = mat_from_json(j.at("modes"));
  b.eigenvalues = vec_from_json(j.at("eigenvalues"));
  b.explained_variance = j.at("explained_variance").get<double>();
  return b;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("artifact: cannot open " + path.string() + " for writing");
  out << j.dump(1) << '\n';
}

json read_json(const std::filesystem::path& path, const std::string& expected_kind) {
  std::ifstream in(path);
  if (!in) throw ParseError("artifact: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("artifact: malformed JSON in " + path.string() + ": " + e.what());
  }
  try {
    if (j.at("artifact_version").get<int>() != kArtifactVersion) {
      throw ArtifactVersionError("artifact: unsupported version in " + path.string());
    }
    if (j.at("kind").get<std::string>() != expected_kind) {
      throw ParseError("artifact: expected kind '" + expected_kind + "' in " + path.string());
    }
  } catch (const json::exception& e) {
    throw ParseError("artifact: missing header fields in " + path.string() + ": " + e.what());
  }
  return j;
}

json header(const char* kind) {
  return json{{"artifact_version", kArtifactVersion}, {"kind", kind}};
}

}  // namespace

void save_basis(const std::filesystem::path& path, const BasisArtifact& basis) {
  json j = header("fpca_basis");
  j["grid"] = grid_to_json(basis.grid);
  j["drag"] = basis_to_json(basis.drag);
  j["cas"] = basis_to_json(basis.cas);
  j["scaler"] = scaler_to_json(basis.scaler);
  write_json(path, j);
}

BasisArtifact load_basis(const std::filesystem::path& path) {
  const json j = read_json(path, "fpca_basis");
  try {
    BasisArtifact b;
    b.grid = grid_from_json(j.at("grid"));
    b.drag = basis_from_json(j.at("drag"));
    b.cas = basis_from_json(j.at("cas"));
    b.scaler = scaler_from_json(j.at("scaler"));
    return b;
  } catch (const json::exception& e) {
    throw ParseError("load_basis: " + std::string(e.what()));
  }
}

void save_model(const std::filesystem::path& path, const ModelArtifact& artifact) {
  json j = header("latent_model");
  j["model_kind"] = artifact.model.kind();
  j["dim"] = artifact.model.dim;
  j["training_seed"] = artifact.model.training_seed;
  j["scaler"] = scaler_to_json(artifact.model.scaler);

  if (const auto* g = std::get_if<GaussianModel>(&artifact.model.model)) {
    j["gaussian"] = json{{"mean", vec_to_json(g->mean)},
                         {"covariance", mat_to_json(g->covariance)}};
  } else if (const auto* g = std::get_if<GmmModel>(&artifact.model.model)) {
    json comps = json::array();
    for (const auto& c : g->components) {
      comps.push_back(json{{"weight", c.weight},
                           {"mean", vec_to_json(c.mean)},
                           {"covariance", mat_to_json(c.covariance)}});
    }
    j["gmm"] = json{{"components", std::move(comps)}};
  } else {
    const auto& f = std::get<FlowModel>(artifact.model.model);
    j["nf"] = json{{"n_flows", f.n_flows},
                   {"hidden_width", f.hidden_width},
                   {"parameters", vec_to_json(f.flat_parameters())}};
  }

  const auto& r = artifact.report;
  json bic = json::array();
  for (const auto& [n_m, value] : r.bic_curve) bic.push_back(json{{"n_m", n_m}, {"bic", value}});
  j["report"] = json{{"model_kind", r.model_kind},
                     {"n_p", r.n_p},
                     {"bic_curve", std::move(bic)},
                     {"final_nll", r.final_nll},
                     {"iterations", r.iterations},
                     {"warnings", r.warnings}};
  write_json(path, j);
}

ModelArtifact load_model(const std::filesystem::path& path) {
  const json j = read_json(path, "latent_model");
  try {
    ModelArtifact a;
    a.model.dim = j.at("dim").get<int>();
    a.model.training_seed = j.at("training_seed").get<std::uint64_t>();
    a.model.scaler = scaler_from_json(j.at("scaler"));
    const std::string kind = j.at("model_kind").get<std::string>();
    if (kind == "gaussian") {
      GaussianModel g;
      g.mean = vec_from_json(j.at("gaussian").at("mean"));
      g.covariance = mat_from_json(j.at("gaussian").at("covariance"));
      a.model.model = std::move(g);
    } else if (kind == "gmm") {
      GmmModel g;
      for (const auto& c : j.at("gmm").at("components")) {
        GmmComponent comp;
        comp.weight = c.at("weight").get<double>();
        comp.mean = vec_from_json(c.at("mean"));
        comp.covariance = mat_from_json(c.at("covariance"));
        g.components.push_back(std::move(comp));
      }
      a.model.model = std::move(g);
    } else if (kind == "nf") {
      FlowModel f = FlowModel::make(a.model.dim, j.at("nf").at("n_flows").get<int>(),
                                    j.at("nf").at("hidden_width").get<int>());
      f.set_flat_parameters(vec_from_json(j.at("nf").at("parameters")));
      a.model.model = std::move(f);
    } else {
      throw ParseError("load_model: unknown model kind '" + kind + "'");
    }

    const json& r = j.at("report");
    a.report.model_kind = r.at("model_kind").get<std::string>();
    a.report.n_p = r.at("n_p").get<long>();
    for (const auto& b : r.at("bic_curve")) {
      a.report.bic_curve.emplace_back(b.at("n_m").get<int>(), b.at("bic").get<double>());
    }
    a.report.final_nll = r.at("final_nll").get<double>();
    a.report.iterations = r.at("iterations").get<int>();
    a.report.warnings = r.at("warnings").get<std::vector<std::string>>();
    return a;
  } catch (const json::exception& e) {
    throw ParseError("load_model: " + std::string(e.what()));
  }
}

void save_bounds(const std::filesystem::path& path, const PlausibilityBounds& bounds) {
  json j = header("plausibility_bounds");
  j["grid"] = grid_to_json(bounds.grid);
  j["drag_lower"] = bounds.drag_lower;
  j["drag_upper"] = bounds.drag_upper;
  j["cas_lower"] = bounds.cas_lower;
  j["cas_upper"] = bounds.cas_upper;
  j["copied_levels"] = bounds.copied_levels;
  write_json(path, j);
}

PlausibilityBounds load_bounds(const std::filesystem::path& path) {
  const json j = read_json(path, "plausibility_bounds");
  try {
    PlausibilityBounds b;
    b.grid = grid_from_json(j.at("grid"));
    b.drag_lower = j.at("drag_lower").get<std::vector<double>>();
    b.drag_upper = j.at("drag_upper").get<std::vector<double>>();
    b.cas_lower = j.at("cas_lower").get<std::vector<double>>();
    b.cas_upper = j.at("cas_upper").get<std::vector<double>>();
    b.copied_levels = j.at("copied_levels").get<int>();
    b.validate();
    return b;
  } catch (const json::exception& e) {
    throw ParseError("load_bounds: " + std::string(e.what()));
  }
}

void save_generation_report(const std::filesystem::path& path, const GenerationReport& report) {
  json j = header("generation_report");
  j["requested"] = report.requested;
  j["accepted"] = report.accepted;
  j["rejected_bounds_drag"] = report.rejected_bounds_drag;
  j["rejected_bounds_cas"] = report.rejected_bounds_cas;
  j["rejected_non_descending"] = report.rejected_non_descending;
  j["resample_rate"] = report.resample_rate;
  j["seed"] = report.seed;
  write_json(path, j);
}

GenerationReport load_generation_report(const std::filesystem::path& path) {
  const json j = read_json(path, "generation_report");
  try {
    GenerationReport r;
    r.requested = j.at("requested").get<long>();
    r.accepted = j.at("accepted").get<long>();
    r.rejected_bounds_drag = j.at("rejected_bounds_drag").get<long>();
    r.rejected_bounds_cas = j.at("rejected_bounds_cas").get<long>();
    r.rejected_non_descending = j.at("rejected_non_descending").get<long>();
    r.resample_rate = j.at("resample_rate").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError("load_generation_report: " + std::string(e.what()));
  }
}

namespace {

json triple_to_json(const DistanceTriple& t) {
  return json{{"ks", t.ks}, {"wasserstein", t.wasserstein}, {"mae", t.mae}};
}

DistanceTriple triple_from_json(const json& j) {
  return {j.at("ks").get<double>(), j.at("wasserstein").get<double>(),
          j.at("mae").get<double>()};
}

json cells_to_json(const SplitCells& c) {
  json j;
  j["above"] = c.above ? triple_to_json(*c.above) : json(nullptr);
  j["below"] = c.below ? triple_to_json(*c.below) : json(nullptr);
  j["bada_mae_above"] = c.bada_mae_above ? json(*c.bada_mae_above) : json(nullptr);
  j["bada_mae_below"] = c.bada_mae_below ? json(*c.bada_mae_below) : json(nullptr);
  return j;
}

SplitCells cells_from_json(const json& j) {
  SplitCells c;
  if (!j.at("above").is_null()) c.above = triple_from_json(j.at("above"));
  if (!j.at("below").is_null()) c.below = triple_from_json(j.at("below"));
  if (!j.at("bada_mae_above").is_null()) c.bada_mae_above = j.at("bada_mae_above").get<double>();
  if (!j.at("bada_mae_below").is_null()) c.bada_mae_below = j.at("bada_mae_below").get<double>();
  return c;
}

}  // namespace

void save_metrics(const std::filesystem::path& path, const MetricsReport& report) {
  json j = header("metrics_report");
  j["time_to_bottom"] = triple_to_json(report.time_to_bottom);
  j["time_to_bottom_bada_mae"] = report.time_to_bottom_bada_mae;
  j["cas"] = cells_to_json(report.cas);
  j["rocd"] = cells_to_json(report.rocd);
  j["transition_altitude_used"] = report.transition_altitude_used;
  j["n_test_spanning"] = report.n_test_spanning;
  j["n_generated"] = report.n_generated;
  write_json(path, j);
}

MetricsReport load_metrics(const std::filesystem::path& path) {
  const json j = read_json(path, "metrics_report");
  try {
    MetricsReport r;
    r.time_to_bottom = triple_from_json(j.at("time_to_bottom"));
    r.time_to_bottom_bada_mae = j.at("time_to_bottom_bada_mae").get<double>();
    r.cas = cells_from_json(j.at("cas"));
    r.rocd = cells_from_json(j.at("rocd"));
    r.transition_altitude_used = j.at("transition_altitude_used").get<double>();
    r.n_test_spanning = j.at("n_test_spanning").get<long>();
    r.n_generated = j.at("n_generated").get<long>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError("load_metrics: " + std::string(e.what()));
  }
}

void save_split_manifest(const std::filesystem::path& path, const SplitManifest& manifest) {
  json j = header("split_manifest");
  j["train_ids"] = manifest.train_ids;
  j["test_ids"] = manifest.test_ids;
  j["seed"] = manifest.seed;
  j["train_frac"] = manifest.train_frac;
  write_json(path, j);
}

SplitManifest load_split_manifest(const std::filesystem::path& path) {
  const json j = read_json(path, "split_manifest");
  try {
    SplitManifest m;
    m.train_ids = j.at("train_ids").get<std::vector<std::string>>();
    m.test_ids = j.at("test_ids").get<std::vector<std::string>>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.train_frac = j.at("train_frac").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError("load_split_manifest: " + std::string(e.what()));
  }
}

namespace {

json aircraft_to_json(const AircraftConfig& cfg) {
  json sched = json::array();
  for (const auto& node : cfg.nominal_cas_schedule) {
    sched.push_back(json{{"h", node.h}, {"cas", node.cas}});
  }
  return json{{"type_code", cfg.type_code},
              {"mass", cfg.mass},
              {"idle_thrust_coeffs", cfg.idle_thrust_coeffs},
              {"cas_ref", cfg.cas_ref},
              {"mach_ref", cfg.mach_ref},
              {"max_fl", cfg.max_fl},
              {"nominal_cas_schedule", std::move(sched)},
              {"nominal_drag_poly", cfg.nominal_drag_poly}};
}

AircraftConfig aircraft_from_json(const json& j) {
  AircraftConfig cfg;
  cfg.type_code = j.at("type_code").get<std::string>();
  cfg.mass = j.at("mass").get<double>();
  cfg.idle_thrust_coeffs = j.at("idle_thrust_coeffs").get<std::array<double, 3>>();
  cfg.cas_ref = j.at("cas_ref").get<double>();
  cfg.mach_ref = j.at("mach_ref").get<double>();
  cfg.max_fl = j.at("max_fl").get<int>();
  for (const auto& node : j.at("nominal_cas_schedule")) {
    cfg.nominal_cas_schedule.push_back({node.at("h").get<double>(), node.at("cas").get<double>()});
  }
  cfg.nominal_drag_poly = j.at("nominal_drag_poly").get<std::vector<double>>();
  cfg.validate();
  return cfg;
}

json isa_to_json(const IsaConstants& c) {
  return json{{"T0", c.T0},           {"p0", c.p0},
              {"rho0", c.rho0},       {"g0", c.g0},
              {"kappa", c.kappa},     {"R", c.R},
              {"lapse_rate", c.lapse_rate}, {"h_trop", c.h_trop}};
}

IsaConstants isa_from_json(const json& j) {
  IsaConstants c;
  c.T0 = j.at("T0").get<double>();
  c.p0 = j.at("p0").get<double>();
  c.rho0 = j.at("rho0").get<double>();
  c.g0 = j.at("g0").get<double>();
  c.kappa = j.at("kappa").get<double>();
  c.R = j.at("R").get<double>();
  c.lapse_rate = j.at("lapse_rate").get<double>();
  c.h_trop = j.at("h_trop").get<double>();
  c.validate();
  return c;
}

}  // namespace

void save_truth(const std::filesystem::path& path, const TruthArtifact& truth) {
  json j = header("synth_truth");
  j["grid"] = grid_to_json(truth.spec.grid);
  j["mean_drag"] = vec_to_json(truth.spec.mean_drag);
  j["mean_cas"] = vec_to_json(truth.spec.mean_cas);
  j["modes_drag"] = mat_to_json(truth.spec.modes_drag);
  j["modes_cas"] = mat_to_json(truth.spec.modes_cas);
  json latent = json::array();
  for (const auto& c : truth.spec.latent) {
    latent.push_back(json{{"weight", c.weight},
                          {"mean", vec_to_json(c.mean)},
                          {"covariance", mat_to_json(c.covariance)}});
  }
  j["latent"] = std::move(latent);
  j["noise_sigma_drag"] = truth.spec.noise_sigma_drag;
  j["noise_sigma_cas"] = truth.spec.noise_sigma_cas;
  j["full_span_prob"] = truth.spec.full_span_prob;
  j["min_top_frac"] = truth.spec.min_top_frac;
  j["n_trajectories"] = truth.spec.n_trajectories;
  j["seed"] = truth.spec.seed;
  j["aircraft"] = aircraft_to_json(truth.spec.aircraft);
  j["isa"] = isa_to_json(truth.spec.isa);
  j["weights"] = mat_to_json(truth.truth.weights);
  j["top_levels"] = truth.truth.top_levels;
  write_json(path, j);
}

TruthArtifact load_truth(const std::filesystem::path& path) {
  const json j = read_json(path, "synth_truth");
  try {
    TruthArtifact t;
    t.spec.grid = grid_from_json(j.at("grid"));
    t.spec.mean_drag = vec_from_json(j.at("mean_drag"));
    t.spec.mean_cas = vec_from_json(j.at("mean_cas"));
    t.spec.modes_drag = mat_from_json(j.at("modes_drag"));
    t.spec.modes_cas = mat_from_json(j.at("modes_cas"));
    for (const auto& c : j.at("latent")) {
      GmmComponent comp;
      comp.weight = c.at("weight").get<double>();
      comp.mean = vec_from_json(c.at("mean"));
      comp.covariance = mat_from_json(c.at("covariance"));
      t.spec.latent.push_back(std::move(comp));
    }
    t.spec.noise_sigma_drag = j.at("noise_sigma_drag").get<double>();
    t.spec.noise_sigma_cas = j.at("noise_sigma_cas").get<double>();
    t.spec.full_span_prob = j.at("full_span_prob").get<double>();
    t.spec.min_top_frac = j.at("min_top_frac").get<double>();
    t.spec.n_trajectories = j.at("n_trajectories").get<int>();
    t.spec.seed = j.at("seed").get<std::uint64_t>();
    t.spec.aircraft = aircraft_from_json(j.at("aircraft"));
    t.spec.isa = isa_from_json(j.at("isa"));
    t.truth.weights = mat_from_json(j.at("weights"));
    t.truth.top_levels = j.at("top_levels").get<std::vector<double>>();
    return t;
  } catch (const json::exception& e) {
    throw ParseError("load_truth: " + std::string(e.what()));
  }
}

void save_aircraft_scenario(const std::filesystem::path& path, const AircraftScenario& scenario) {
  json j = header("aircraft_scenario");
  j["aircraft"] = aircraft_to_json(scenario.aircraft);
  j["isa"] = isa_to_json(scenario.isa);
  write_json(path, j);
}

AircraftScenario load_aircraft_scenario(const std::filesystem::path& path) {
  const json j = read_json(path, "aircraft_scenario");
  try {
    AircraftScenario s;
    s.aircraft = aircraft_from_json(j.at("aircraft"));
    if (j.contains("isa") && !j.at("isa").is_null()) s.isa = isa_from_json(j.at("isa"));
    return s;
  } catch (const json::exception& e) {
    throw ParseError("load_aircraft_scenario: " + std::string(e.what()));
  }
}

}  // namespace descent
