#include "descent/latent.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "descent/errors.hpp"
#include "descent/rng.hpp"

namespace descent {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kCovRegularization = 1e-9;
}  // namespace

WeightScaler WeightScaler::fit(const Eigen::MatrixXd& rows) {
  if (rows.rows() < 2) throw InsufficientDataError("WeightScaler: need >= 2 rows");
  WeightScaler s;
  s.mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
  s.std = (centered.array().square().colwise().sum() / double(rows.rows() - 1))
              .sqrt()
              .matrix()
              .transpose();
  for (Eigen::Index j = 0; j < s.std.size(); ++j) s.std[j] = std::max(s.std[j], 1e-12);
  return s;
}

WeightScaler WeightScaler::identity(int dim) {
  WeightScaler s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.std = Eigen::VectorXd::Ones(dim);
  return s;
}

Eigen::VectorXd WeightScaler::scale(const Eigen::VectorXd& w) const {
  return ((w - mean).array() / std.array()).matrix();
}

Eigen::VectorXd WeightScaler::unscale(const Eigen::VectorXd& z) const {
  return (z.array() * std.array()).matrix() + mean;
}

Eigen::MatrixXd WeightScaler::scale_rows(const Eigen::MatrixXd& rows) const {
  return ((rows.rowwise() - mean.transpose()).array().rowwise() /
          std.transpose().array())
      .matrix();
}

Eigen::MatrixXd WeightScaler::unscale_rows(const Eigen::MatrixXd& rows) const {
  return ((rows.array().rowwise() * std.transpose().array()).matrix().rowwise() +
          mean.transpose());
}

double WeightScaler::log_jacobian() const { return -std.array().log().sum(); }

std::string LatentModel::kind() const {
  if (std::holds_alternative<GaussianModel>(model)) return "gaussian";
  if (std::holds_alternative<GmmModel>(model)) return "gmm";
  return "nf";
}

long param_count_gaussian(int n_c) {
  if (n_c < 1) throw std::domain_error("param_count_gaussian: n_c must be >= 1");
  return static_cast<long>(n_c) * (n_c + 3) / 2;
}

long param_count_gmm(int n_m, int n_c) {
  if (n_m < 1) throw std::domain_error("param_count_gmm: n_m must be >= 1");
  return static_cast<long>(n_m) * param_count_gaussian(n_c) + (n_m - 1);
}

int max_components(long n_tr, int n_c) {
  if (n_tr < 1) throw std::domain_error("max_components: n_tr must be >= 1");
  int n_m = 1;
  while (15 * param_count_gmm(n_m + 1, n_c) <= n_tr) ++n_m;
  if (15 * param_count_gmm(1, n_c) > n_tr) return 1;  // clamp
  return n_m;
}

namespace {

/// Log-density of a multivariate normal; escalating jitter when the
/// covariance is numerically singular.
double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                  const Eigen::MatrixXd& cov) {
  const Eigen::Index d = x.size();
  double jitter = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd c = cov;
    if (jitter > 0.0) c.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() == Eigen::Success) {
      const Eigen::VectorXd sol = llt.solve(x - mean);
      double log_det = 0.0;
      for (Eigen::Index i = 0; i < d; ++i) log_det += std::log(llt.matrixL()(i, i));
      return -0.5 * (x - mean).dot(sol) - log_det - 0.5 * d * kLog2Pi;
    }
    jitter = jitter == 0.0 ? kCovRegularization : jitter * 10.0;
  }
  throw std::runtime_error("mvn_logpdf: covariance not factorizable");
}

/// Symmetric PSD square root (eigenvalue clamp), exact for the zero matrix.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev[i] = std::sqrt(std::max(0.0, ev[i]));
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

}  // namespace

FitResult fit_gaussian(const Eigen::MatrixXd& weights) {
  const Eigen::Index n = weights.rows();
  const Eigen::Index d = weights.cols();
  if (n <= d) {
    throw InsufficientDataError("fit_gaussian: need more rows than dimensions");
  }

  FitResult out;
  GaussianModel g;
  g.mean = weights.colwise().mean();
  const Eigen::MatrixXd centered = weights.rowwise() - g.mean.transpose();
  g.covariance = centered.transpose() * centered / double(n - 1);
  g.covariance.diagonal().array() += kCovRegularization;

  out.report.model_kind = "gaussian";
  out.report.n_p = param_count_gaussian(static_cast<int>(d));
  out.report.iterations = 1;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.covariance);
    if (es.eigenvalues().minCoeff() < 10.0 * kCovRegularization) {
      out.report.warnings.push_back("fit_gaussian: near-singular covariance, regularization carries");
    }
  }
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ll += mvn_logpdf(weights.row(i).transpose(), g.mean, g.covariance);
  }
  out.report.final_nll = -ll / double(n);

  out.model.model = std::move(g);
  out.model.dim = static_cast<int>(d);
  out.model.training_seed = 0;
  out.model.scaler = WeightScaler::fit(weights);
  return out;
}

namespace {

struct EmRun {
  bool ok = false;
  double loglik = -std::numeric_limits<double>::infinity();  // total, scaled space
  std::vector<double> trace;                                 // mean loglik per iteration
  std::vector<GmmComponent> components;                      // scaled space
  int iterations = 0;
};

EmRun run_em(const Eigen::MatrixXd& x, int n_m, Rng rng, const GmmOptions& opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  EmRun run;

  // Random-partition responsibilities seed the first M-step.
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, n_m);
  for (Eigen::Index i = 0; i < n; ++i) {
    resp(i, static_cast<Eigen::Index>(rng.bounded(static_cast<std::uint64_t>(n_m)))) = 1.0;
  }

  std::vector<GmmComponent> comps(n_m);
  double prev_mean_ll = -std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    // M-step
    for (int k = 0; k < n_m; ++k) {
      const double nk = resp.col(k).sum();
      if (!(nk > 1e-8)) return run;  // dead component, restart
      const Eigen::VectorXd mu = (resp.col(k).transpose() * x).transpose() / nk;
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::VectorXd c = x.row(i).transpose() - mu;
        cov.noalias() += resp(i, k) * c * c.transpose();
      }
      cov /= nk;
      cov.diagonal().array() += opts.cov_floor;
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      if (llt.info() != Eigen::Success) return run;  // collapsed, restart
      comps[k].weight = nk / double(n);
      comps[k].mean = mu;
      comps[k].covariance = cov;
    }

    // E-step
    Eigen::MatrixXd logp(n, n_m);
    for (int k = 0; k < n_m; ++k) {
      const double lw = std::log(comps[k].weight);
      for (Eigen::Index i = 0; i < n; ++i) {
        logp(i, k) = lw + mvn_logpdf(x.row(i).transpose(), comps[k].mean, comps[k].covariance);
      }
    }
    double total_ll = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double lse = logsumexp(logp.row(i).transpose());
      total_ll += lse;
      resp.row(i) = (logp.row(i).array() - lse).exp();
    }
    const double mean_ll = total_ll / double(n);
    run.trace.push_back(mean_ll);
    run.iterations = iter;
    run.loglik = total_ll;
    if (std::abs(mean_ll - prev_mean_ll) < opts.tol) break;
    prev_mean_ll = mean_ll;
  }

  run.components = comps;
  run.ok = true;
  return run;
}

}  // namespace

FitResult fit_gmm(const Eigen::MatrixXd& weights, std::uint64_t seed, const GmmOptions& opts) {
  const Eigen::Index n = weights.rows();
  const Eigen::Index d = weights.cols();
  if (n <= d) throw InsufficientDataError("fit_gmm: need more rows than dimensions");

  const WeightScaler scaler = WeightScaler::fit(weights);
  const Eigen::MatrixXd x = scaler.scale_rows(weights);

  const int cap = opts.max_components_override > 0
                      ? opts.max_components_override
                      : max_components(n, static_cast<int>(d));

  FitResult out;
  out.report.model_kind = "gmm";

  EmRun best_run;
  int best_nm = 0;
  double best_bic = std::numeric_limits<double>::infinity();

  for (int n_m = 1; n_m <= cap; ++n_m) {
    EmRun candidate;
    for (int restart = 0; restart < opts.restarts; ++restart) {
      const std::uint64_t sub =
          (static_cast<std::uint64_t>(n_m) << 8) | static_cast<std::uint64_t>(restart);
      EmRun run = run_em(x, n_m, Rng::substream(seed, sub), opts);
      if (run.ok && run.loglik > candidate.loglik) candidate = std::move(run);
    }
    if (!candidate.ok) {
      out.report.warnings.push_back("fit_gmm: all restarts failed for n_m=" +
                                    std::to_string(n_m) + ", falling back to fewer components");
      continue;
    }
    const long n_p = param_count_gmm(n_m, static_cast<int>(d));
    // Scaled-space likelihood shifted to the original space; the shift is
    // common to every n_m so the BIC ranking is unaffected.
    const double ll_orig = candidate.loglik + double(n) * scaler.log_jacobian();
    const double bic = static_cast<double>(n_p) * std::log(double(n)) - 2.0 * ll_orig;
    out.report.bic_curve.emplace_back(n_m, bic);
    if (bic < best_bic) {
      best_bic = bic;
      best_nm = n_m;
      best_run = std::move(candidate);
    }
  }
  if (best_nm == 0) throw std::runtime_error("fit_gmm: no mixture size could be fitted");

  GmmModel g;
  g.components.resize(best_nm);
  const Eigen::MatrixXd scale_diag = scaler.std.asDiagonal();
  for (int k = 0; k < best_nm; ++k) {
    g.components[k].weight = best_run.components[k].weight;
    g.components[k].mean = scaler.unscale(best_run.components[k].mean);
    g.components[k].covariance =
        scale_diag * best_run.components[k].covariance * scale_diag;
  }

  out.report.n_p = param_count_gmm(best_nm, static_cast<int>(d));
  out.report.final_nll =
      -(best_run.loglik + double(n) * scaler.log_jacobian()) / double(n);
  out.report.iterations = best_run.iterations;
  out.report.loglik_trace = best_run.trace;

  out.model.model = std::move(g);
  out.model.dim = static_cast<int>(d);
  out.model.training_seed = seed;
  out.model.scaler = scaler;
  return out;
}

FitResult fit_nf(const Eigen::MatrixXd& weights, std::uint64_t seed, NfArchitecture arch,
                 const NfTrainOptions& opts) {
  const Eigen::Index n = weights.rows();
  const Eigen::Index d = weights.cols();
  if (n < 2) throw InsufficientDataError("fit_nf: need at least 2 rows");

  FitResult out;
  out.report.model_kind = "nf";
  if (n < 50) {
    out.report.warnings.push_back("fit_nf: fewer than 50 training rows, fit may be unreliable");
  }

  const WeightScaler scaler = WeightScaler::fit(weights);
  const Eigen::MatrixXd x = scaler.scale_rows(weights);

  const int hidden = arch.hidden_width > 0 ? arch.hidden_width : 2 * static_cast<int>(d);
  FlowModel flow = FlowModel::make(static_cast<int>(d), arch.n_flows, hidden);
  const NfTrainResult train = train_flow(flow, x, seed, opts);

  out.report.n_p = flow.free_param_count();
  out.report.final_nll = train.final_train_nll - scaler.log_jacobian();
  out.report.iterations = train.epochs;
  if (train.lr_restarts > 0) {
    out.report.warnings.push_back("fit_nf: learning rate halved " +
                                  std::to_string(train.lr_restarts) + " times after divergence");
  }

  out.model.model = std::move(flow);
  out.model.dim = static_cast<int>(d);
  out.model.training_seed = seed;
  out.model.scaler = scaler;
  return out;
}

Eigen::VectorXd sample_one(const LatentModel& model, Rng& rng) {
  const int d = model.dim;
  Eigen::VectorXd z(d);
  for (int j = 0; j < d; ++j) z[j] = rng.normal();

  if (const auto* g = std::get_if<GaussianModel>(&model.model)) {
    return g->mean + psd_sqrt(g->covariance) * z;
  }
  if (const auto* g = std::get_if<GmmModel>(&model.model)) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double acc = 0.0;
    for (; k + 1 < g->components.size(); ++k) {
      acc += g->components[k].weight;
      if (u < acc) break;
    }
    return g->components[k].mean + psd_sqrt(g->components[k].covariance) * z;
  }
  const auto& flow = std::get<FlowModel>(model.model);
  return model.scaler.unscale(flow.forward(z));
}

Eigen::MatrixXd sample(const LatentModel& model, int n, std::uint64_t seed) {
  if (n < 1) throw std::domain_error("sample: n must be >= 1");
  Rng rng(seed);
  Eigen::MatrixXd draws(n, model.dim);
  for (int i = 0; i < n; ++i) draws.row(i) = sample_one(model, rng).transpose();
  return draws;
}

double log_density(const LatentModel& model, const Eigen::VectorXd& w) {
  if (!w.allFinite()) throw std::domain_error("log_density: non-finite input");
  if (const auto* g = std::get_if<GaussianModel>(&model.model)) {
    return mvn_logpdf(w, g->mean, g->covariance);
  }
  if (const auto* g = std::get_if<GmmModel>(&model.model)) {
    Eigen::VectorXd lp(static_cast<Eigen::Index>(g->components.size()));
    for (std::size_t k = 0; k < g->components.size(); ++k) {
      lp[static_cast<Eigen::Index>(k)] =
          std::log(g->components[k].weight) +
          mvn_logpdf(w, g->components[k].mean, g->components[k].covariance);
    }
    return logsumexp(lp);
  }
  const auto& flow = std::get<FlowModel>(model.model);
  return flow.log_density(model.scaler.scale(w)) + model.scaler.log_jacobian();
}

}  // namespace descent
