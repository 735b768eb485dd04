#include "descent/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "descent/errors.hpp"

namespace descent {

void PlausibilityBounds::validate() const {
  grid.validate();
  const std::size_t n = grid.size();
  if (drag_lower.size() != n || drag_upper.size() != n || cas_lower.size() != n ||
      cas_upper.size() != n) {
    throw std::domain_error("PlausibilityBounds: length mismatch");
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (!(drag_lower[j] < drag_upper[j]) || !(cas_lower[j] < cas_upper[j])) {
      throw std::domain_error("PlausibilityBounds: lower must be < upper at every level");
    }
  }
}

namespace {

struct MinMax {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  bool seen = false;
};

void bounds_for(const GappyCurveMatrix& m, std::vector<double>& lower,
                std::vector<double>& upper, int& copied) {
  const std::size_t n = m.grid.size();
  std::vector<MinMax> mm(n);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (!m.mask(i, j)) continue;
      auto& s = mm[static_cast<std::size_t>(j)];
      s.lo = std::min(s.lo, m.values(i, j));
      s.hi = std::max(s.hi, m.values(i, j));
      s.seen = true;
    }
  }
  lower.assign(n, 0.0);
  upper.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    if (!mm[j].seen) {
      // Borrow from the nearest observed level.
      std::size_t best = n;
      for (std::size_t k = 0; k < n; ++k) {
        if (mm[k].seen && (best == n || std::llabs(static_cast<long long>(k) -
                                                   static_cast<long long>(j)) <
                                            std::llabs(static_cast<long long>(best) -
                                                       static_cast<long long>(j)))) {
          best = k;
        }
      }
      if (best == n) throw std::domain_error("compute_bounds: no observed level at all");
      mm[j] = mm[best];
      ++copied;
    }
    lower[j] = 0.95 * mm[j].lo;
    upper[j] = 1.05 * mm[j].hi;
    if (!(lower[j] < upper[j])) {
      // Single repeated value with lo == hi == 0 would collapse; nudge.
      upper[j] = lower[j] + 1e-9;
    }
  }
}

}  // namespace

PlausibilityBounds compute_bounds(const GappyCurveMatrix& drag_training,
                                  const GappyCurveMatrix& cas_training) {
  if (drag_training.grid.levels != cas_training.grid.levels) {
    throw std::domain_error("compute_bounds: drag and CAS grids differ");
  }
  PlausibilityBounds b;
  b.grid = drag_training.grid;
  int copied = 0;
  bounds_for(drag_training, b.drag_lower, b.drag_upper, copied);
  bounds_for(cas_training, b.cas_lower, b.cas_upper, copied);
  b.copied_levels = copied;
  b.validate();
  return b;
}

std::vector<double> test_start_levels(const std::vector<Trajectory>& test_set,
                                      const AltitudeGrid& grid) {
  if (test_set.empty()) throw std::domain_error("test_start_levels: empty test set");
  std::vector<double> out;
  out.reserve(test_set.size());
  for (const auto& t : test_set) {
    const double top = std::clamp(t.max_altitude(), grid.bottom(), grid.top());
    // Snap down so the start never exceeds the observed top of descent.
    const auto k = static_cast<std::size_t>(std::floor((top - grid.h_i) / grid.delta_h + 1e-9));
    out.push_back(grid.levels[std::min(k, grid.size() - 1)]);
  }
  return out;
}

double sample_initial_level(const std::vector<double>& start_levels, Rng& rng) {
  if (start_levels.empty()) throw std::domain_error("sample_initial_level: empty pool");
  return start_levels[rng.bounded(start_levels.size())];
}

GeneratedSet generate(const LatentModel& model, const FpcaBasis& basis_drag,
                      const FpcaBasis& basis_cas, const PlausibilityBounds& bounds,
                      const std::vector<double>& start_levels, int n, std::uint64_t seed,
                      const AircraftConfig& cfg, const IsaConstants& isa,
                      const GenerationSettings& settings) {
  if (n < 1) throw std::domain_error("generate: n must be >= 1");
  bounds.validate();
  const auto n_g = static_cast<Eigen::Index>(bounds.grid.size());
  if (basis_drag.mean.size() != n_g || basis_cas.mean.size() != n_g) {
    throw std::domain_error("generate: basis and bounds grids differ");
  }
  if (model.dim != basis_drag.n_modes() + basis_cas.n_modes()) {
    throw std::domain_error("generate: latent dim does not match basis mode counts");
  }
  const double h_trans = transition_altitude(cfg.cas_ref, cfg.mach_ref, isa);

  GeneratedSet out;
  out.trajectories.reserve(n);
  out.report.requested = n;
  out.report.seed = seed;

  const int n_alpha = static_cast<int>(basis_drag.n_modes());

  for (int i = 0; i < n; ++i) {
    Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(i));
    const double h_start = sample_initial_level(start_levels, rng);

    int attempts = 0;
    while (true) {
      if (attempts >= settings.attempt_cap) {
        throw GenerationStalledError(
            "generate: " + std::to_string(settings.attempt_cap) +
            " consecutive rejections for sample " + std::to_string(i) +
            " (bounds-drag=" + std::to_string(out.report.rejected_bounds_drag) +
            ", bounds-cas=" + std::to_string(out.report.rejected_bounds_cas) +
            ", non-descending=" + std::to_string(out.report.rejected_non_descending) + ")");
      }
      ++attempts;

      const Eigen::VectorXd w = sample_one(model, rng);
      WeightVector wv{w.head(n_alpha), w.tail(w.size() - n_alpha)};
      DescentProfile profile = reconstruct(wv, basis_drag, basis_cas, bounds.grid);

      bool drag_ok = true, cas_ok = true;
      for (Eigen::Index j = 0; j < n_g && drag_ok; ++j) {
        const double v = profile.drag_values[static_cast<std::size_t>(j)];
        drag_ok = v >= bounds.drag_lower[static_cast<std::size_t>(j)] &&
                  v <= bounds.drag_upper[static_cast<std::size_t>(j)] && v > 0.0;
      }
      if (!drag_ok) {
        ++out.report.rejected_bounds_drag;
        continue;
      }
      for (Eigen::Index j = 0; j < n_g && cas_ok; ++j) {
        const double v = profile.cas_values[static_cast<std::size_t>(j)];
        cas_ok = v >= bounds.cas_lower[static_cast<std::size_t>(j)] &&
                 v <= bounds.cas_upper[static_cast<std::size_t>(j)] && v > 0.0;
      }
      if (!cas_ok) {
        ++out.report.rejected_bounds_cas;
        continue;
      }

      // A profile that cannot descend anywhere on the grid is rejected like a
      // bound violation; the integrator requires rocd < 0 throughout.
      bool descending = true;
      for (Eigen::Index j = 0; j < n_g && descending; ++j) {
        const std::size_t js = static_cast<std::size_t>(j);
        descending = rocd(bounds.grid.levels[js], profile.drag_values[js],
                          profile.cas_values[js], h_trans, cfg, isa) < -1e-6;
      }
      if (!descending) {
        ++out.report.rejected_non_descending;
        continue;
      }

      out.trajectories.push_back(
          integrate_descent(profile, h_start, cfg, isa, settings.esf_mode));
      ++out.report.accepted;
      break;
    }
  }

  const double rejected = static_cast<double>(out.report.rejected());
  out.report.resample_rate = rejected / (rejected + static_cast<double>(out.report.accepted));
  return out;
}

}  // namespace descent
