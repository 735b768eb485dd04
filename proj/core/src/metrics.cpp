#include "descent/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "descent/atmosphere.hpp"
#include "descent/errors.hpp"

namespace descent {

namespace {

std::vector<double> sorted_copy(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  std::sort(out.begin(), out.end());
  return out;
}

void require_non_empty(std::span<const double> a, std::span<const double> b, const char* who) {
  if (a.empty() || b.empty()) {
    throw std::domain_error(std::string(who) + ": empty sample set");
  }
}

}  // namespace

double ks_distance(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b, "ks_distance");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (i < sa.size() && (j >= sb.size() || sa[i] <= sb[j])) {
      x = sa[i];
    } else {
      x = sb[j];
    }
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b, "wasserstein1");
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double total = 0.0;
  double prev = std::min(sa.front(), sb.front());
  while (i < sa.size() || j < sb.size()) {
    double x;
    if (i < sa.size() && (j >= sb.size() || sa[i] <= sb[j])) {
      x = sa[i];
    } else {
      x = sb[j];
    }
    total += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (x - prev);
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
    prev = x;
  }
  return total;
}

double mae_of_means(std::span<const double> a, std::span<const double> b) {
  require_non_empty(a, b, "mae_of_means");
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  return std::abs(ma - mb);
}

DistanceTriple distance_triple(std::span<const double> a, std::span<const double> b) {
  return {ks_distance(a, b), wasserstein1(a, b), mae_of_means(a, b)};
}

namespace {

// Linear interpolation of t against strictly decreasing altitude samples.
double time_at_altitude(const Trajectory& traj, double h) {
  const auto& bs = traj.blips;
  for (std::size_t i = 1; i < bs.size(); ++i) {
    const double h0 = bs[i - 1].h, h1 = bs[i].h;
    if ((h0 >= h && h >= h1) || (h0 <= h && h <= h1)) {
      const double w = h0 == h1 ? 0.0 : (h - h0) / (h1 - h0);
      return bs[i - 1].t + w * (bs[i].t - bs[i - 1].t);
    }
  }
  throw std::domain_error("time_at_altitude: altitude outside trajectory span");
}

constexpr double kSpanTol = 1e-6;

}  // namespace

std::vector<double> time_to_bottom_distribution(const std::vector<Trajectory>& trajs,
                                                const AltitudeGrid& grid) {
  if (trajs.empty()) throw std::domain_error("time_to_bottom_distribution: empty set");
  std::vector<double> out;
  for (const auto& t : trajs) {
    if (t.blips.size() < 2) continue;
    if (t.min_altitude() <= grid.bottom() + kSpanTol &&
        t.max_altitude() >= grid.top() - kSpanTol) {
      out.push_back(time_at_altitude(t, grid.bottom()) - time_at_altitude(t, grid.top()));
    }
  }
  if (out.empty()) {
    throw InsufficientDataError("time_to_bottom_distribution: no trajectory spans the grid");
  }
  return out;
}

std::vector<double> time_to_bottom_distribution(const std::vector<SimulatedTrajectory>& trajs,
                                                const AltitudeGrid& grid) {
  if (trajs.empty()) throw std::domain_error("time_to_bottom_distribution: empty set");
  std::vector<double> out;
  for (const auto& t : trajs) {
    if (t.samples.empty()) continue;
    if (t.samples.front().h >= grid.top() - kSpanTol &&
        t.samples.back().h <= grid.bottom() + kSpanTol) {
      out.push_back(t.time_to_bottom);
    }
  }
  if (out.empty()) {
    throw InsufficientDataError("time_to_bottom_distribution: no trajectory spans the grid");
  }
  return out;
}

PerLevelSamples collect_levels(const std::vector<Trajectory>& trajs, const AltitudeGrid& grid,
                               LevelQuantity q) {
  PerLevelSamples out;
  out.by_level.resize(grid.size());
  std::vector<double> hs, ys;
  for (const auto& t : trajs) {
    hs.clear();
    ys.clear();
    // Blips are time-ordered descents; reverse for ascending altitude.
    for (auto it = t.blips.rbegin(); it != t.blips.rend(); ++it) {
      if (!hs.empty() && !(it->h > hs.back())) continue;  // drop non-monotone stragglers
      hs.push_back(it->h);
      ys.push_back(q == LevelQuantity::Cas ? it->v_ias : it->rocd);
    }
    if (hs.size() < 2) continue;
    const InterpolatedRow row = interpolate_to_grid(hs, ys, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (row.mask[static_cast<Eigen::Index>(j)]) {
        out.by_level[j].push_back(row.values[static_cast<Eigen::Index>(j)]);
      }
    }
  }
  return out;
}

PerLevelSamples collect_levels(const std::vector<SimulatedTrajectory>& trajs,
                               const AltitudeGrid& grid, LevelQuantity q) {
  PerLevelSamples out;
  out.by_level.resize(grid.size());
  std::vector<double> hs, ys;
  for (const auto& t : trajs) {
    hs.clear();
    ys.clear();
    for (auto it = t.samples.rbegin(); it != t.samples.rend(); ++it) {
      if (!hs.empty() && !(it->h > hs.back())) continue;
      hs.push_back(it->h);
      ys.push_back(q == LevelQuantity::Cas ? it->v_cas : it->rocd);
    }
    if (hs.size() < 2) continue;
    const InterpolatedRow row = interpolate_to_grid(hs, ys, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (row.mask[static_cast<Eigen::Index>(j)]) {
        out.by_level[j].push_back(row.values[static_cast<Eigen::Index>(j)]);
      }
    }
  }
  return out;
}

SplitDistance per_level_distance(const PerLevelSamples& test, const PerLevelSamples& gen,
                                 const AltitudeGrid& grid, DistanceMeasure measure,
                                 double h_transition) {
  if (test.by_level.size() != grid.size() || gen.by_level.size() != grid.size()) {
    throw std::domain_error("per_level_distance: level count mismatch");
  }
  double sum_above = 0.0, sum_below = 0.0;
  long n_above = 0, n_below = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto& a = test.by_level[j];
    const auto& b = gen.by_level[j];
    if (a.empty() || b.empty()) continue;
    double d = 0.0;
    switch (measure) {
      case DistanceMeasure::Ks: d = ks_distance(a, b); break;
      case DistanceMeasure::W1: d = wasserstein1(a, b); break;
      case DistanceMeasure::Mae: d = mae_of_means(a, b); break;
    }
    if (grid.levels[j] > h_transition) {  // ties go below
      sum_above += d;
      ++n_above;
    } else {
      sum_below += d;
      ++n_below;
    }
  }
  SplitDistance out;
  if (n_above > 0) out.above = sum_above / static_cast<double>(n_above);
  if (n_below > 0) out.below = sum_below / static_cast<double>(n_below);
  return out;
}

SplitDistance per_level_mae_vs_baseline(const PerLevelSamples& test,
                                        const std::vector<double>& baseline_by_level,
                                        const std::vector<bool>& baseline_mask,
                                        const AltitudeGrid& grid, double h_transition) {
  if (test.by_level.size() != grid.size() || baseline_by_level.size() != grid.size() ||
      baseline_mask.size() != grid.size()) {
    throw std::domain_error("per_level_mae_vs_baseline: level count mismatch");
  }
  double sum_above = 0.0, sum_below = 0.0;
  long n_above = 0, n_below = 0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto& a = test.by_level[j];
    if (a.empty() || !baseline_mask[j]) continue;
    const double mean_a =
        std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    const double d = std::abs(mean_a - baseline_by_level[j]);
    if (grid.levels[j] > h_transition) {
      sum_above += d;
      ++n_above;
    } else {
      sum_below += d;
      ++n_below;
    }
  }
  SplitDistance out;
  if (n_above > 0) out.above = sum_above / static_cast<double>(n_above);
  if (n_below > 0) out.below = sum_below / static_cast<double>(n_below);
  return out;
}

double kde_bandwidth(std::span<const double> samples) {
  if (samples.size() < 2) throw std::domain_error("kde_bandwidth: need >= 2 samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  double max_abs = 0.0;
  for (const double x : samples) {
    ss += (x - mean) * (x - mean);
    max_abs = std::max(max_abs, std::abs(x));
  }
  const double sigma = std::sqrt(ss / (n - 1.0));
  const double bw = sigma * std::pow(n, -0.2);  // Scott's rule
  return bw > 0.0 ? bw : 1e-6 * std::max(max_abs, 1.0);
}

std::vector<double> kde_pdf(std::span<const double> samples, std::span<const double> eval_grid) {
  const double bw = kde_bandwidth(samples);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bw * std::sqrt(2.0 * M_PI));
  std::vector<double> out(eval_grid.size(), 0.0);
  for (std::size_t g = 0; g < eval_grid.size(); ++g) {
    double acc = 0.0;
    for (const double x : samples) {
      const double z = (eval_grid[g] - x) / bw;
      acc += std::exp(-0.5 * z * z);
    }
    out[g] = norm * acc;
  }
  return out;
}

std::vector<double> kde_default_grid(std::span<const double> samples, int n_points) {
  if (samples.size() < 2) throw std::domain_error("kde_default_grid: need >= 2 samples");
  if (n_points < 2) throw std::domain_error("kde_default_grid: need >= 2 points");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (const double x : samples) ss += (x - mean) * (x - mean);
  const double sigma = std::max(std::sqrt(ss / (n - 1.0)), 1e-6);
  const auto [lo_it, hi_it] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *lo_it - 5.0 * sigma;
  const double hi = *hi_it + 5.0 * sigma;
  std::vector<double> grid(n_points);
  for (int i = 0; i < n_points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_points - 1);
  }
  return grid;
}

MetricsReport build_report(const std::vector<Trajectory>& test,
                           const std::vector<SimulatedTrajectory>& generated,
                           const SimulatedTrajectory& bada_baseline, const AltitudeGrid& grid,
                           const AircraftConfig& cfg, const IsaConstants& isa) {
  if (test.empty() || generated.empty()) {
    throw std::domain_error("build_report: empty test or generated set");
  }
  MetricsReport r;
  r.transition_altitude_used = transition_altitude(cfg.cas_ref, cfg.mach_ref, isa);
  r.n_generated = static_cast<long>(generated.size());

  const auto tb_test = time_to_bottom_distribution(test, grid);
  const auto tb_gen = time_to_bottom_distribution(generated, grid);
  r.n_test_spanning = static_cast<long>(tb_test.size());
  r.time_to_bottom = distance_triple(tb_test, tb_gen);
  const std::vector<double> bada_tb{bada_baseline.time_to_bottom};
  r.time_to_bottom_bada_mae = mae_of_means(tb_test, bada_tb);

  // Baseline curves per level (the baseline spans the grid by construction).
  std::vector<double> bada_cas(grid.size()), bada_rocd(grid.size());
  std::vector<bool> bada_mask(grid.size(), false);
  for (const auto& s : bada_baseline.samples) {
    const std::size_t j = grid.nearest_level(s.h);
    if (std::abs(grid.levels[j] - s.h) < 1e-6) {
      bada_cas[j] = s.v_cas;
      bada_rocd[j] = s.rocd;
      bada_mask[j] = true;
    }
  }

  const auto fill = [&](LevelQuantity q, SplitCells& cells, const std::vector<double>& base) {
    const PerLevelSamples t = collect_levels(test, grid, q);
    const PerLevelSamples g = collect_levels(generated, grid, q);
    const SplitDistance ks = per_level_distance(t, g, grid, DistanceMeasure::Ks,
                                                r.transition_altitude_used);
    const SplitDistance w1 = per_level_distance(t, g, grid, DistanceMeasure::W1,
                                                r.transition_altitude_used);
    const SplitDistance mae = per_level_distance(t, g, grid, DistanceMeasure::Mae,
                                                 r.transition_altitude_used);
    if (ks.above && w1.above && mae.above) {
      cells.above = DistanceTriple{*ks.above, *w1.above, *mae.above};
    }
    if (ks.below && w1.below && mae.below) {
      cells.below = DistanceTriple{*ks.below, *w1.below, *mae.below};
    }
    const SplitDistance bada =
        per_level_mae_vs_baseline(t, base, bada_mask, grid, r.transition_altitude_used);
    cells.bada_mae_above = bada.above;
    cells.bada_mae_below = bada.below;
  };
  fill(LevelQuantity::Cas, r.cas, bada_cas);
  fill(LevelQuantity::Rocd, r.rocd, bada_rocd);
  return r;
}

}  // namespace descent
