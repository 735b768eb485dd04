#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "descent/grid.hpp"
#include "descent/physics.hpp"
#include "descent/trajectory.hpp"
#include "descent/units.hpp"

namespace descent {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Sparse per-trajectory curve data on a grid. mask(i,j) is true where
/// trajectory i was observed at level j; masked-out values carry nothing.
struct GappyCurveMatrix {
  Eigen::MatrixXd values;  // n_t x n_g
  BoolMatrix mask;         // n_t x n_g
  AltitudeGrid grid;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  void validate() const;  // shape + every row >= 2 observed, one contiguous span
};

/// Truncated discrete fPCA basis for one quantity.
struct FpcaBasis {
  Eigen::VectorXd mean;         // n_g
  Eigen::MatrixXd modes;        // n_g x n_modes, orthonormal columns
  Eigen::VectorXd eigenvalues;  // n_modes, descending, >= 0
  double explained_variance = 0.0;

  Eigen::Index n_modes() const { return modes.cols(); }
  /// max |modes^T modes - I|; orthonormality diagnostic.
  double gram_error() const;
};

/// Latent weights of one trajectory: drag weights then CAS weights.
struct WeightVector {
  Eigen::VectorXd alpha;  // drag
  Eigen::VectorXd beta;   // CAS
};

/// Grid floored at FL150 whose top is the highest level span-covered by at
/// least coverage_frac of the trajectories.
AltitudeGrid build_grid(const std::vector<Trajectory>& trajs, double coverage_frac,
                        double h_i = kFl150Metres, double delta_h = kMetresPerFl);

struct InterpolatedRow {
  Eigen::VectorXd values;
  BoolArray mask;
};

/// Linear interpolation of (h, y) samples onto the grid; no extrapolation,
/// levels outside [hs.front(), hs.back()] get mask false. hs must be
/// ascending with at least two points.
InterpolatedRow interpolate_to_grid(std::span<const double> hs, std::span<const double> ys,
                                    const AltitudeGrid& grid);

/// Per-level mean over observed entries (0 where a level is never observed).
Eigen::VectorXd per_level_observed_mean(const GappyCurveMatrix& F);

/// Pairwise-complete covariance: entry (j,k) from rows observing both levels,
/// centered by per-level observed means; entries with < 2 co-observations are
/// set to 0. Reduces to the (n_t-1)-divisor sample covariance when complete.
Eigen::MatrixXd pairwise_covariance(const GappyCurveMatrix& F);

struct EigenModes {
  Eigen::MatrixXd modes;        // orthonormal columns
  Eigen::VectorXd eigenvalues;  // descending, negatives clamped to 0
};

/// Symmetric eigendecomposition with deterministic sign (largest-magnitude
/// entry of each mode positive).
EigenModes eigen_modes(const Eigen::MatrixXd& C);

/// Smallest mode count whose cumulative eigenvalue fraction reaches
/// target_var; always >= 1.
int truncate_modes(const Eigen::VectorXd& eigenvalues_desc, double target_var);

struct SequentialFitResult {
  Eigen::VectorXd weights;
  int zero_support_modes = 0;
};

/// One-mode-at-a-time least squares over observed entries: weight l is the
/// closed-form minimiser of the remaining residual, which is then updated.
SequentialFitResult fit_weights_sequential(const Eigen::VectorXd& row, const BoolArray& mask,
                                           const Eigen::VectorXd& mean,
                                           const Eigen::MatrixXd& modes, int n_modes);

struct GappyFpcaOptions {
  double rel_change_threshold = 0.01;  // mean abs relative change of imputed entries
  int stable_iterations = 10;          // consecutive quiet iterations required
  int max_iterations = 50;
};

struct GappyFpcaResult {
  FpcaBasis basis;
  Eigen::MatrixXd weights;    // n_t x n_modes, final fit
  int iterations = 0;         // imputation passes performed
  Eigen::MatrixXd completed;  // data matrix with missing entries imputed
};

/// Iterative gappy fPCA: covariance -> eigenmodes -> sequential weights ->
/// impute, repeated until the imputed entries are quiet (see options) or the
/// iteration cap is hit. The basis is truncated to target_var.
GappyFpcaResult gappy_fpca(const GappyCurveMatrix& F, double target_var,
                           const GappyFpcaOptions& opts = {});

/// Eq-style reconstruction: mean + sum of weighted modes for both quantities.
DescentProfile reconstruct(const WeightVector& w, const FpcaBasis& basis_drag,
                           const FpcaBasis& basis_cas, const AltitudeGrid& grid);

}  // namespace descent
