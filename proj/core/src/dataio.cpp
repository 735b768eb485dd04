#include "descent/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "descent/errors.hpp"
#include "descent/rng.hpp"

namespace descent {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, long line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ParseError("read_blips: bad numeric field '" + s + "'", line_no);
  }
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

Dataset read_blips(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_blips: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("read_blips: empty file", 1);
  if (line != "traj_id,type,t_s,h_m,rocd_mps,ias_mps,mach") {
    throw ParseError("read_blips: unexpected header '" + line + "'", 1);
  }

  Dataset ds;
  std::vector<std::string> order;        // first-appearance order of ids
  std::vector<Trajectory> staged;
  std::vector<std::size_t> index_of;     // parallel to order
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      throw ParseError("read_blips: expected 7 fields, got " + std::to_string(fields.size()),
                       line_no);
    }
    RadarBlip b{};
    b.t = parse_double(fields[2], line_no);
    b.h = parse_double(fields[3], line_no);
    b.rocd = parse_double(fields[4], line_no);
    b.v_ias = parse_double(fields[5], line_no);
    b.mach = parse_double(fields[6], line_no);

    std::size_t slot;
    auto it = std::find(order.begin(), order.end(), fields[0]);
    if (it == order.end()) {
      order.push_back(fields[0]);
      staged.push_back(Trajectory{fields[0], fields[1], {}});
      slot = staged.size() - 1;
    } else {
      slot = static_cast<std::size_t>(it - order.begin());
    }
    staged[slot].blips.push_back(b);
  }

  for (auto& t : staged) {
    bool ok = t.blips.size() >= 2;
    for (std::size_t i = 0; ok && i < t.blips.size(); ++i) {
      if (!t.blips[i].finite() || !(t.blips[i].h > 0.0)) ok = false;
      if (i > 0 && !(t.blips[i].t > t.blips[i - 1].t)) ok = false;
    }
    if (ok) {
      ds.trajectories.push_back(std::move(t));
    } else {
      ++ds.quarantined;
      ds.warnings.push_back("read_blips: quarantined trajectory '" + t.id +
                            "' (non-monotone time, non-finite field or too few blips)");
    }
  }
  return ds;
}

void write_blips(const std::filesystem::path& path, const std::vector<Trajectory>& trajs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_blips: cannot open " + path.string());
  out << "traj_id,type,t_s,h_m,rocd_mps,ias_mps,mach\n";
  for (const auto& t : trajs) {
    for (const auto& b : t.blips) {
      out << t.id << ',' << t.aircraft_type << ',' << format_double(b.t) << ','
          << format_double(b.h) << ',' << format_double(b.rocd) << ','
          << format_double(b.v_ias) << ',' << format_double(b.mach) << '\n';
    }
  }
}

void write_trajectories_csv(const std::filesystem::path& path,
                            const std::vector<SimulatedTrajectory>& trajs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_trajectories_csv: cannot open " + path.string());
  out << "traj_id,t_s,h_m,v_cas_mps,v_tas_mps,rocd_mps,drag_n\n";
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    for (const auto& s : trajs[i].samples) {
      out << i << ',' << format_double(s.t) << ',' << format_double(s.h) << ','
          << format_double(s.v_cas) << ',' << format_double(s.v_tas) << ','
          << format_double(s.rocd) << ',' << format_double(s.drag) << '\n';
    }
  }
}

std::vector<SimulatedTrajectory> read_trajectories_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("read_trajectories_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "traj_id,t_s,h_m,v_cas_mps,v_tas_mps,rocd_mps,drag_n") {
    throw ParseError("read_trajectories_csv: unexpected header", 1);
  }
  std::vector<SimulatedTrajectory> out;
  std::string current_id;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 7) throw ParseError("read_trajectories_csv: expected 7 fields", line_no);
    if (fields[0] != current_id || out.empty()) {
      current_id = fields[0];
      out.emplace_back();
    }
    TrajectorySample s{};
    s.t = parse_double(fields[1], line_no);
    s.h = parse_double(fields[2], line_no);
    s.v_cas = parse_double(fields[3], line_no);
    s.v_tas = parse_double(fields[4], line_no);
    s.rocd = parse_double(fields[5], line_no);
    s.drag = parse_double(fields[6], line_no);
    out.back().samples.push_back(s);
    out.back().time_to_bottom = s.t;
  }
  return out;
}

namespace {

/// Greedy constant-ROCD run removal within one contiguous segment. A window
/// grows while every member stays within tolerance of the running window
/// mean; windows reaching run_length are removed wholesale.
std::vector<std::vector<RadarBlip>> remove_constant_runs(const std::vector<RadarBlip>& seg,
                                                         int run_length, double tol) {
  std::vector<std::vector<RadarBlip>> pieces;
  std::vector<RadarBlip> current;
  std::size_t i = 0;
  while (i < seg.size()) {
    // Grow the window [i, j] as far as the criterion allows.
    std::size_t j = i;
    double sum = seg[i].rocd;
    while (j + 1 < seg.size()) {
      const double candidate_sum = sum + seg[j + 1].rocd;
      const double mean = candidate_sum / static_cast<double>(j + 2 - i);
      bool within = true;
      for (std::size_t k = i; k <= j + 1 && within; ++k) {
        within = std::abs(seg[k].rocd - mean) <= tol;
      }
      if (!within) break;
      ++j;
      sum = candidate_sum;
    }
    if (static_cast<int>(j - i + 1) >= run_length) {
      if (!current.empty()) pieces.push_back(std::move(current));
      current.clear();
      i = j + 1;  // run removed; a seam starts here
    } else {
      current.push_back(seg[i]);
      ++i;
    }
  }
  if (!current.empty()) pieces.push_back(std::move(current));
  return pieces;
}

}  // namespace

Dataset clean_descents(const Dataset& ds, const CleaningParams& params) {
  Dataset out;
  out.quarantined = ds.quarantined;
  for (const auto& traj : ds.trajectories) {
    // Step 1: keep descending blips, split into contiguous segments at gaps.
    std::vector<std::vector<RadarBlip>> segments;
    std::vector<RadarBlip> current;
    for (const auto& blip : traj.blips) {
      if (blip.rocd <= -params.min_rocd_mps) {
        current.push_back(blip);
      } else if (!current.empty()) {
        segments.push_back(std::move(current));
        current.clear();
      }
    }
    if (!current.empty()) segments.push_back(std::move(current));

    // Step 2: constant-ROCD removal inside each segment (never across seams).
    std::vector<std::vector<RadarBlip>> pieces;
    for (const auto& seg : segments) {
      auto sub = remove_constant_runs(seg, params.const_run_length,
                                      params.const_run_tolerance_mps);
      for (auto& p : sub) pieces.push_back(std::move(p));
    }

    // Step 3: longest remaining contiguous piece; first wins ties.
    const std::vector<RadarBlip>* best = nullptr;
    for (const auto& p : pieces) {
      if (!best || p.size() > best->size()) best = &p;
    }
    if (best && best->size() >= 2) {
      out.trajectories.push_back(Trajectory{traj.id, traj.aircraft_type, *best});
    }
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double train_frac, std::uint64_t seed) {
  if (ds.trajectories.size() < 5) {
    throw InsufficientDataError("split: need at least 5 trajectories");
  }
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw std::domain_error("split: train_frac must be in (0,1)");
  }
  std::vector<std::size_t> idx(ds.trajectories.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  rng.shuffle(idx);

  auto n_train = static_cast<std::size_t>(
      std::floor(train_frac * static_cast<double>(idx.size()) + 0.5));
  n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);

  Dataset train, test;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    (i < n_train ? train : test).trajectories.push_back(ds.trajectories[idx[i]]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace descent
