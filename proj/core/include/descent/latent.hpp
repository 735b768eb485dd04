#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "descent/flow.hpp"
#include "descent/rng.hpp"

namespace descent {

/// Per-dimension z-scoring applied to the fPCA weights before any fit.
struct WeightScaler {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  static WeightScaler fit(const Eigen::MatrixXd& rows);
  static WeightScaler identity(int dim);

  Eigen::VectorXd scale(const Eigen::VectorXd& w) const;
  Eigen::VectorXd unscale(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd scale_rows(const Eigen::MatrixXd& rows) const;
  Eigen::MatrixXd unscale_rows(const Eigen::MatrixXd& rows) const;
  /// log |d scaled / d original| = -sum log std.
  double log_jacobian() const;
};

struct GaussianModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct GmmComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

struct GmmModel {
  std::vector<GmmComponent> components;
};

/// Tagged union over the three latent families with one sample/log-density
/// contract. Gaussian and GMM parameters live in the original weight space;
/// the flow operates on z-scored weights through the stored scaler.
struct LatentModel {
  std::variant<GaussianModel, GmmModel, FlowModel> model;
  int dim = 0;
  std::uint64_t training_seed = 0;
  WeightScaler scaler;

  std::string kind() const;
};

struct FitReport {
  std::string model_kind;
  long n_p = 0;                                  // free parameter count
  std::vector<std::pair<int, double>> bic_curve; // (n_m, BIC), GMM only
  double final_nll = 0.0;                        // mean negative log-likelihood
  int iterations = 0;                            // EM iterations or epochs
  std::vector<double> loglik_trace;              // selected GMM run, diagnostics
  std::vector<std::string> warnings;
};

long param_count_gaussian(int n_c);
long param_count_gmm(int n_m, int n_c);

/// Largest mixture size allowed by the 15-trajectories-per-parameter rule,
/// clamped to at least 1.
int max_components(long n_tr, int n_c);

struct GmmOptions {
  int restarts = 5;
  double tol = 1e-6;          // on mean log-likelihood change
  int max_iterations = 500;
  double cov_floor = 1e-8;    // added to covariance diagonals (scaled space)
  int max_components_override = 0;  // 0 = use the 15-per-parameter rule
};

struct NfArchitecture {
  int n_flows = 5;
  int hidden_width = 0;  // 0 -> 2 * n_c
};

struct FitResult {
  LatentModel model;
  FitReport report;
};

/// Closed-form MLE with unbiased covariance plus 1e-9 I regularization.
FitResult fit_gaussian(const Eigen::MatrixXd& weights);

/// Full-covariance EM over n_m = 1..max_components, BIC-selected.
FitResult fit_gmm(const Eigen::MatrixXd& weights, std::uint64_t seed, const GmmOptions& opts = {});

/// Masked affine autoregressive flow trained on z-scored weights.
FitResult fit_nf(const Eigen::MatrixXd& weights, std::uint64_t seed, NfArchitecture arch = {},
                 const NfTrainOptions& opts = {});

/// n i.i.d. draws (rows) in the original weight space; deterministic per seed.
Eigen::MatrixXd sample(const LatentModel& model, int n, std::uint64_t seed);

/// One draw from a caller-owned stream (rejection loops, substreams).
Eigen::VectorXd sample_one(const LatentModel& model, Rng& rng);

/// Exact log-pdf in the original weight space.
double log_density(const LatentModel& model, const Eigen::VectorXd& w);

}  // namespace descent
