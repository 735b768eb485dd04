#include "descent/fpca.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "descent/errors.hpp"

namespace descent {

AltitudeGrid AltitudeGrid::make(double h_i, double h_f, double delta_h) {
  AltitudeGrid g;
  g.h_i = h_i;
  g.h_f = h_f;
  g.delta_h = delta_h;
  if (!(delta_h > 0.0) || !(h_f > h_i)) {
    throw std::domain_error("AltitudeGrid: need h_f > h_i and delta_h > 0");
  }
  const auto n = static_cast<std::size_t>(std::llround((h_f - h_i) / delta_h)) + 1;
  g.levels.resize(n);
  for (std::size_t k = 0; k < n; ++k) g.levels[k] = h_i + static_cast<double>(k) * delta_h;
  g.h_f = g.levels.back();
  return g;
}

std::size_t AltitudeGrid::nearest_level(double h) const {
  const double x = (h - h_i) / delta_h;
  const auto k = static_cast<long long>(std::llround(x));
  return static_cast<std::size_t>(std::clamp(k, 0LL, static_cast<long long>(levels.size()) - 1));
}

void AltitudeGrid::validate() const {
  if (levels.size() < 2 || !(delta_h > 0.0) || !(h_i < h_f)) {
    throw std::domain_error("AltitudeGrid: degenerate grid");
  }
  for (std::size_t k = 1; k < levels.size(); ++k) {
    if (std::abs((levels[k] - levels[k - 1]) - delta_h) > 1e-9) {
      throw std::domain_error("AltitudeGrid: non-uniform spacing");
    }
  }
}

void GappyCurveMatrix::validate() const {
  grid.validate();
  if (values.rows() != mask.rows() || values.cols() != mask.cols() ||
      values.cols() != static_cast<Eigen::Index>(grid.size())) {
    throw std::domain_error("GappyCurveMatrix: shape mismatch");
  }
  for (Eigen::Index i = 0; i < mask.rows(); ++i) {
    int observed = 0;
    int runs = 0;
    bool in_run = false;
    for (Eigen::Index j = 0; j < mask.cols(); ++j) {
      if (mask(i, j)) {
        ++observed;
        if (!in_run) {
          ++runs;
          in_run = true;
        }
      } else {
        in_run = false;
      }
    }
    if (observed < 2 || runs != 1) {
      throw std::domain_error("GappyCurveMatrix: row " + std::to_string(i) +
                              " must observe >= 2 levels in one contiguous span");
    }
  }
}

double FpcaBasis::gram_error() const {
  if (modes.cols() == 0) return 0.0;
  Eigen::MatrixXd gram = modes.transpose() * modes;
  gram -= Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
  return gram.cwiseAbs().maxCoeff();
}

AltitudeGrid build_grid(const std::vector<Trajectory>& trajs, double coverage_frac, double h_i,
                        double delta_h) {
  if (trajs.empty()) throw InsufficientDataError("build_grid: empty trajectory set");
  if (!(coverage_frac > 0.0 && coverage_frac <= 1.0)) {
    throw std::domain_error("build_grid: coverage_frac must be in (0, 1]");
  }
  double top = h_i;
  for (const auto& t : trajs) top = std::max(top, t.max_altitude());
  const auto n_candidates = static_cast<std::size_t>(std::floor((top - h_i) / delta_h + 1e-9)) + 1;

  const double needed = coverage_frac * static_cast<double>(trajs.size()) - 1e-9;
  long best = -1;
  for (std::size_t k = 0; k < n_candidates; ++k) {
    const double level = h_i + static_cast<double>(k) * delta_h;
    int count = 0;
    for (const auto& t : trajs) {
      if (t.min_altitude() <= level + 1e-9 && t.max_altitude() >= level - 1e-9) ++count;
    }
    if (k == 0 && count == 0) {
      throw InsufficientDataError("build_grid: no trajectory reaches the grid floor");
    }
    if (static_cast<double>(count) >= needed) best = static_cast<long>(k);
  }
  if (best < 1) {
    throw InsufficientDataError("build_grid: no grid top reaches the coverage threshold above the floor");
  }
  return AltitudeGrid::make(h_i, h_i + static_cast<double>(best) * delta_h, delta_h);
}

InterpolatedRow interpolate_to_grid(std::span<const double> hs, std::span<const double> ys,
                                    const AltitudeGrid& grid) {
  if (hs.size() != ys.size()) throw std::domain_error("interpolate_to_grid: length mismatch");
  if (hs.size() < 2) throw std::domain_error("interpolate_to_grid: need >= 2 samples");
  for (std::size_t i = 1; i < hs.size(); ++i) {
    if (!(hs[i] > hs[i - 1])) {
      throw std::domain_error("interpolate_to_grid: altitudes must be strictly ascending");
    }
  }
  const auto n = static_cast<Eigen::Index>(grid.size());
  InterpolatedRow out{Eigen::VectorXd::Zero(n), BoolArray::Constant(n, false)};
  std::size_t seg = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double level = grid.levels[static_cast<std::size_t>(j)];
    if (level < hs.front() - 1e-9 || level > hs.back() + 1e-9) continue;
    while (seg + 2 < hs.size() && hs[seg + 1] < level) ++seg;
    const double lo = hs[seg], hi = hs[seg + 1];
    const double w = std::clamp((level - lo) / (hi - lo), 0.0, 1.0);
    // Reproduce node values exactly rather than through the affine blend.
    out.values[j] = (w == 0.0) ? ys[seg]
                  : (w == 1.0) ? ys[seg + 1]
                               : ys[seg] + w * (ys[seg + 1] - ys[seg]);
    out.mask[j] = true;
  }
  return out;
}

Eigen::VectorXd per_level_observed_mean(const GappyCurveMatrix& F) {
  const Eigen::Index n_g = F.cols();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_g);
  for (Eigen::Index j = 0; j < n_g; ++j) {
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index i = 0; i < F.rows(); ++i) {
      if (F.mask(i, j)) {
        sum += F.values(i, j);
        ++count;
      }
    }
    mean[j] = count > 0 ? sum / count : 0.0;
  }
  return mean;
}

Eigen::MatrixXd pairwise_covariance(const GappyCurveMatrix& F) {
  const Eigen::Index n_g = F.cols();
  const Eigen::VectorXd mean = per_level_observed_mean(F);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_g, n_g);
  for (Eigen::Index j = 0; j < n_g; ++j) {
    for (Eigen::Index k = j; k < n_g; ++k) {
      double sum = 0.0;
      int count = 0;
      for (Eigen::Index i = 0; i < F.rows(); ++i) {
        if (F.mask(i, j) && F.mask(i, k)) {
          sum += (F.values(i, j) - mean[j]) * (F.values(i, k) - mean[k]);
          ++count;
        }
      }
      const double c = count >= 2 ? sum / (count - 1) : 0.0;
      cov(j, k) = c;
      cov(k, j) = c;
    }
  }
  return cov;
}

EigenModes eigen_modes(const Eigen::MatrixXd& C) {
  if (C.rows() != C.cols()) throw std::domain_error("eigen_modes: matrix must be square");
  const double scale = std::max(1.0, C.cwiseAbs().maxCoeff());
  if (((C - C.transpose()).cwiseAbs().maxCoeff()) > 1e-8 * scale) {
    throw std::domain_error("eigen_modes: matrix must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("eigen_modes: eigendecomposition failed");
  }
  const Eigen::Index n = C.rows();
  EigenModes out;
  out.modes.resize(n, n);
  out.eigenvalues.resize(n);
  // Solver returns ascending order; flip to descending and clamp negatives
  // introduced by pairwise estimation.
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues[k] = std::max(0.0, solver.eigenvalues()[n - 1 - k]);
    out.modes.col(k) = solver.eigenvectors().col(n - 1 - k);
    Eigen::Index arg_max = 0;
    out.modes.col(k).cwiseAbs().maxCoeff(&arg_max);
    if (out.modes(arg_max, k) < 0.0) out.modes.col(k) = -out.modes.col(k);
  }
  return out;
}

int truncate_modes(const Eigen::VectorXd& eigenvalues_desc, double target_var) {
  const double total = eigenvalues_desc.sum();
  if (!(total > 0.0)) throw std::domain_error("truncate_modes: eigenvalue sum must be > 0");
  if (!(target_var > 0.0 && target_var <= 1.0)) {
    throw std::domain_error("truncate_modes: target_var must be in (0, 1]");
  }
  double cum = 0.0;
  for (Eigen::Index k = 0; k < eigenvalues_desc.size(); ++k) {
    cum += eigenvalues_desc[k];
    if (cum / total >= target_var - 1e-12) return static_cast<int>(k) + 1;
  }
  return static_cast<int>(eigenvalues_desc.size());
}

SequentialFitResult fit_weights_sequential(const Eigen::VectorXd& row, const BoolArray& mask,
                                           const Eigen::VectorXd& mean,
                                           const Eigen::MatrixXd& modes, int n_modes) {
  if (row.size() != mean.size() || row.size() != modes.rows() || row.size() != mask.size()) {
    throw std::domain_error("fit_weights_sequential: shape mismatch");
  }
  if (n_modes < 0 || n_modes > modes.cols()) {
    throw std::domain_error("fit_weights_sequential: bad mode count");
  }
  const long observed = mask.count();
  if (observed < n_modes) {
    throw InsufficientDataError("fit_weights_sequential: fewer observed entries than modes");
  }

  SequentialFitResult out;
  out.weights = Eigen::VectorXd::Zero(n_modes);
  Eigen::VectorXd residual = row - mean;
  for (int l = 0; l < n_modes; ++l) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (!mask[j]) continue;
      num += residual[j] * modes(j, l);
      den += modes(j, l) * modes(j, l);
    }
    if (den <= 0.0) {
      ++out.zero_support_modes;
      continue;  // weight stays 0
    }
    const double w = num / den;
    out.weights[l] = w;
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      if (mask[j]) residual[j] -= w * modes(j, l);
    }
  }
  return out;
}

namespace {

struct IterationState {
  Eigen::VectorXd mean;
  Eigen::MatrixXd modes;       // all modes
  Eigen::VectorXd eigenvalues; // all, descending
  int n_keep = 0;
};

IterationState decompose(const Eigen::MatrixXd& cov, const Eigen::VectorXd& mean,
                         double target_var) {
  IterationState s;
  s.mean = mean;
  EigenModes em = eigen_modes(cov);
  s.modes = std::move(em.modes);
  s.eigenvalues = std::move(em.eigenvalues);
  s.n_keep = truncate_modes(s.eigenvalues, target_var);
  return s;
}

}  // namespace

GappyFpcaResult gappy_fpca(const GappyCurveMatrix& F, double target_var,
                           const GappyFpcaOptions& opts) {
  F.validate();
  const Eigen::Index n_t = F.rows();
  const Eigen::Index n_g = F.cols();
  if (n_t < 3) throw InsufficientDataError("gappy_fpca: need at least 3 trajectories");

  const long n_missing = (n_t * n_g) - F.mask.count();
  Eigen::MatrixXd work = F.values;

  const auto fit_all_rows = [&](const IterationState& s, bool use_mask) {
    Eigen::MatrixXd weights(n_t, s.n_keep);
    const BoolArray full = BoolArray::Constant(n_g, true);
    for (Eigen::Index i = 0; i < n_t; ++i) {
      const BoolArray mask = use_mask ? BoolArray(F.mask.row(i).transpose()) : full;
      weights.row(i) =
          fit_weights_sequential(work.row(i).transpose(), mask, s.mean, s.modes, s.n_keep)
              .weights.transpose();
    }
    return weights;
  };

  const auto impute = [&](const IterationState& s, const Eigen::MatrixXd& weights,
                          Eigen::MatrixXd& target) {
    for (Eigen::Index i = 0; i < n_t; ++i) {
      const Eigen::VectorXd recon =
          s.mean + s.modes.leftCols(s.n_keep) * weights.row(i).transpose();
      for (Eigen::Index j = 0; j < n_g; ++j) {
        if (!F.mask(i, j)) target(i, j) = recon[j];
      }
    }
  };

  const auto finish = [&](const IterationState& s, Eigen::MatrixXd weights, int iterations) {
    GappyFpcaResult out;
    out.basis.mean = s.mean;
    out.basis.modes = s.modes.leftCols(s.n_keep);
    out.basis.eigenvalues = s.eigenvalues.head(s.n_keep);
    const double total = s.eigenvalues.sum();
    out.basis.explained_variance = total > 0.0 ? out.basis.eigenvalues.sum() / total : 1.0;
    out.weights = std::move(weights);
    out.iterations = iterations;
    out.completed = work;
    return out;
  };

  // First pass works on the sparse representation directly.
  IterationState state = decompose(pairwise_covariance(F), per_level_observed_mean(F), target_var);
  Eigen::MatrixXd weights = fit_all_rows(state, /*use_mask=*/true);
  if (n_missing == 0) {
    return finish(state, std::move(weights), 1);
  }
  impute(state, weights, work);

  int iterations = 1;
  int quiet_streak = 0;
  while (iterations < opts.max_iterations && quiet_streak < opts.stable_iterations) {
    ++iterations;
    const Eigen::VectorXd mean = work.colwise().mean();
    const Eigen::MatrixXd centered = work.rowwise() - mean.transpose();
    const Eigen::MatrixXd cov = centered.transpose() * centered / double(n_t - 1);
    state = decompose(cov, mean, target_var);
    weights = fit_all_rows(state, /*use_mask=*/false);

    Eigen::MatrixXd updated = work;
    impute(state, weights, updated);

    double change_sum = 0.0;
    for (Eigen::Index i = 0; i < n_t; ++i) {
      for (Eigen::Index j = 0; j < n_g; ++j) {
        if (!F.mask(i, j)) {
          change_sum += std::abs(updated(i, j) - work(i, j)) /
                        std::max(std::abs(work(i, j)), 1e-6);
        }
      }
    }
    const double mean_change = change_sum / static_cast<double>(n_missing);
    quiet_streak = mean_change < opts.rel_change_threshold ? quiet_streak + 1 : 0;
    work = std::move(updated);
  }

  // Refresh the basis from the final completed matrix so the returned basis,
  // weights and imputed data are mutually consistent.
  const Eigen::VectorXd mean = work.colwise().mean();
  const Eigen::MatrixXd centered = work.rowwise() - mean.transpose();
  state = decompose(centered.transpose() * centered / double(n_t - 1), mean, target_var);
  weights = fit_all_rows(state, /*use_mask=*/false);
  return finish(state, std::move(weights), iterations);
}

DescentProfile reconstruct(const WeightVector& w, const FpcaBasis& basis_drag,
                           const FpcaBasis& basis_cas, const AltitudeGrid& grid) {
  if (w.alpha.size() != basis_drag.n_modes() || w.beta.size() != basis_cas.n_modes()) {
    throw std::domain_error("reconstruct: weight length does not match basis modes");
  }
  const auto n = static_cast<Eigen::Index>(grid.size());
  if (basis_drag.mean.size() != n || basis_cas.mean.size() != n) {
    throw std::domain_error("reconstruct: basis does not match grid");
  }
  DescentProfile p;
  p.grid = grid;
  const Eigen::VectorXd drag = basis_drag.mean + basis_drag.modes * w.alpha;
  const Eigen::VectorXd cas = basis_cas.mean + basis_cas.modes * w.beta;
  p.drag_values.assign(drag.data(), drag.data() + n);
  p.cas_values.assign(cas.data(), cas.data() + n);
  return p;
}

}  // namespace descent
