#include "tse/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "tse/rng.hpp"

namespace tse {

void TrajectoryTable::validate() const {
  std::map<long, double> last_time;
  for (const auto& r : records) {
    if (!std::isfinite(r.time) || !std::isfinite(r.position))
      throw std::invalid_argument("TrajectoryTable: non-finite record");
    const auto it = last_time.find(r.vehicle_id);
    if (it != last_time.end() && r.time <= it->second)
      throw std::invalid_argument(
          "TrajectoryTable: time must be strictly increasing for vehicle " +
          std::to_string(r.vehicle_id));
    last_time[r.vehicle_id] = r.time;
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, long line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError("malformed numeric field '" + s + "'", line);
  return v;
}

long parse_long(const std::string& s, long line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw ParseError("malformed integer field '" + s + "'", line);
  return v;
}

}  // namespace

TrajectoryTable read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  long line_no = 0;

  if (!std::getline(is, line)) throw ParseError("empty trajectory file", 0);
  ++line_no;
  const auto header = split_csv(line);
  if (header.size() < 3 || header[0] != "vehicle_id" || header[1] != "time_s" ||
      header[2] != "position_ft")
    throw ParseError("expected header vehicle_id,time_s,position_ft[,speed_fps][,lane]",
                     line_no);
  int speed_col = -1, lane_col = -1;
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c] == "speed_fps") speed_col = static_cast<int>(c);
    else if (header[c] == "lane") lane_col = static_cast<int>(c);
    else throw ParseError("unknown column '" + header[c] + "'", line_no);
  }

  TrajectoryTable table;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cols = split_csv(line);
    if (cols.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, got " +
                           std::to_string(cols.size()),
                       line_no);
    TrajectoryRecord r;
    r.vehicle_id = parse_long(cols[0], line_no);
    r.time = parse_double(cols[1], line_no);
    r.position = parse_double(cols[2], line_no);
    if (speed_col >= 0 && !cols[speed_col].empty())
      r.speed = parse_double(cols[speed_col], line_no);
    if (lane_col >= 0 && !cols[lane_col].empty())
      r.lane = static_cast<int>(parse_long(cols[lane_col], line_no));
    table.records.push_back(r);
  }
  table.validate();
  return table;
}

void SpillReport::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& r : records) {
    nlohmann::json j{{"vehicle_id", r.vehicle_id},
                     {"time_s", r.time},
                     {"position_ft", r.position},
                     {"reason", r.reason}};
    os << j.dump() << '\n';
  }
}

BinResult bin_trajectories(const TrajectoryTable& traj, const Grid& grid) {
  traj.validate();
  BinResult out{DensityField::zeros(grid), SpeedField::masked(grid), {}};
  std::vector<double> occupancy(static_cast<std::size_t>(grid.cells()), 0.0);
  std::vector<double> distance(static_cast<std::size_t>(grid.cells()), 0.0);

  const double x_lo = grid.x0, x_hi = grid.x_end();
  const double t_lo = grid.t0, t_hi = grid.t_end();

  // group record indices by vehicle, preserving file order
  std::map<long, std::vector<std::size_t>> by_vehicle;
  for (std::size_t k = 0; k < traj.records.size(); ++k)
    by_vehicle[traj.records[k].vehicle_id].push_back(k);

  for (const auto& r : traj.records) {
    if (r.position < x_lo || r.position > x_hi || r.time < t_lo || r.time > t_hi)
      out.spill.records.push_back({r.vehicle_id, r.time, r.position, "outside-grid"});
  }

  std::vector<double> cuts;
  for (const auto& [veh, idx] : by_vehicle) {
    (void)veh;
    for (std::size_t k = 1; k < idx.size(); ++k) {
      const TrajectoryRecord& a = traj.records[idx[k - 1]];
      const TrajectoryRecord& b = traj.records[idx[k]];
      const double dt_seg = b.time - a.time;
      const double v = (b.position - a.position) / dt_seg;

      // split the linear motion at every bin edge and cell edge it crosses
      cuts.clear();
      cuts.push_back(a.time);
      cuts.push_back(b.time);
      const int j_first = static_cast<int>(std::ceil((a.time - t_lo) / grid.dt));
      for (int j = j_first;; ++j) {
        const double tc = t_lo + j * grid.dt;
        if (tc >= b.time) break;
        if (tc > a.time) cuts.push_back(tc);
      }
      if (v != 0.0) {
        const double x_min = std::min(a.position, b.position);
        const double x_max = std::max(a.position, b.position);
        const int i_first = static_cast<int>(std::ceil((x_min - x_lo) / grid.dx));
        for (int i = i_first;; ++i) {
          const double xc = x_lo + i * grid.dx;
          if (xc >= x_max) break;
          if (xc > x_min) {
            const double tc = a.time + (xc - a.position) / v;
            if (tc > a.time && tc < b.time) cuts.push_back(tc);
          }
        }
      }
      std::sort(cuts.begin(), cuts.end());

      for (std::size_t s = 1; s < cuts.size(); ++s) {
        const double seg = cuts[s] - cuts[s - 1];
        if (seg <= 0.0) continue;
        const double tm = 0.5 * (cuts[s - 1] + cuts[s]);
        const double xm = a.position + v * (tm - a.time);
        const int i = static_cast<int>(std::floor((xm - x_lo) / grid.dx));
        const int j = static_cast<int>(std::floor((tm - t_lo) / grid.dt));
        if (i < 0 || i >= grid.nx || j < 0 || j >= grid.nt) {
          out.spill.spilled_vehicle_seconds += seg;
          continue;
        }
        const std::size_t cell = static_cast<std::size_t>(i) * grid.nt + j;
        occupancy[cell] += seg;
        distance[cell] += v * seg;
      }
    }
  }

  const double bin_area = grid.dx * grid.dt;
  for (std::size_t cell = 0; cell < occupancy.size(); ++cell) {
    out.density.values[cell] = occupancy[cell] / bin_area;
    if (occupancy[cell] > 0.0) {
      out.speed.values[cell] = distance[cell] / occupancy[cell];
      out.speed.mask[cell] = 1;
    }
  }
  return out;
}

FDParams estimate_fd_params(const DensityField& density, const SpeedField& speed) {
  if (!density.grid.same_shape(speed.grid))
    throw std::invalid_argument("estimate_fd_params: grid mismatch");

  std::vector<std::pair<double, double>> pairs;  // (rho, v)
  for (std::size_t k = 0; k < density.values.size(); ++k)
    if (speed.mask[k]) pairs.emplace_back(density.values[k], speed.values[k]);

  if (pairs.size() < 10)
    throw EstimationError(
        "estimate_fd_params: need at least 10 density/speed pairs; supply FDParams "
        "manually");
  double rho_min = pairs[0].first, rho_max = pairs[0].first;
  for (const auto& p : pairs) {
    rho_min = std::min(rho_min, p.first);
    rho_max = std::max(rho_max, p.first);
  }
  if (!(rho_max - rho_min >= 0.1 * rho_max) || rho_max <= 0.0)
    throw EstimationError(
        "estimate_fd_params: density spread below 10% of the maximum; supply "
        "FDParams manually");

  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    mx += p.first;
    my += p.second;
  }
  mx /= pairs.size();
  my /= pairs.size();
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : pairs) {
    sxx += (p.first - mx) * (p.first - mx);
    sxy += (p.first - mx) * (p.second - my);
  }
  const double slope = sxy / sxx;
  if (!(slope < 0.0))
    throw EstimationError(
        "estimate_fd_params: fitted speed does not decrease with density; supply "
        "FDParams manually");
  const double v_f = my - slope * mx;
  return FDParams(v_f, -v_f / slope);
}

std::pair<ObservationSet, CollocationSet> sample_points(const DensityField& field,
                                                        const SamplingPlan& plan) {
  const Grid& g = field.grid;
  const long cells = g.cells();
  if (plan.n_obs < 1 || plan.n_coll < 1)
    throw std::invalid_argument("sample_points: counts must be positive");
  if (plan.n_obs > cells)
    throw std::invalid_argument("sample_points: n_obs exceeds the cell count");

  // distinct cells via partial Fisher-Yates
  Xoshiro256 rng_obs(plan.seed);
  std::vector<long> idx(static_cast<std::size_t>(cells));
  for (long k = 0; k < cells; ++k) idx[k] = k;
  ObservationSet obs;
  obs.points.reserve(plan.n_obs);
  for (int k = 0; k < plan.n_obs; ++k) {
    const long pick = k + static_cast<long>(rng_obs.below(cells - k));
    std::swap(idx[k], idx[pick]);
    const int i = static_cast<int>(idx[k] / g.nt);
    const int j = static_cast<int>(idx[k] % g.nt);
    obs.points.push_back({g.x_center(i), g.t_center(j), field.at(i, j)});
  }

  Xoshiro256 rng_coll(plan.seed ^ 0x517cc1b727220a95ull);
  CollocationSet coll;
  coll.points.reserve(plan.n_coll);
  if (plan.strategy == SamplingPlan::Strategy::LatinHypercube) {
    const int n = plan.n_coll;
    std::vector<int> px(n), pt(n);
    for (int k = 0; k < n; ++k) px[k] = pt[k] = k;
    for (int k = 0; k < n - 1; ++k)
      std::swap(px[k], px[k + static_cast<int>(rng_coll.below(n - k))]);
    for (int k = 0; k < n - 1; ++k)
      std::swap(pt[k], pt[k + static_cast<int>(rng_coll.below(n - k))]);
    for (int k = 0; k < n; ++k) {
      const double x = g.x0 + (px[k] + rng_coll.uniform01()) * g.length / n;
      const double t = g.t0 + (pt[k] + rng_coll.uniform01()) * g.duration / n;
      coll.points.push_back({x, t});
    }
  } else {
    for (int k = 0; k < plan.n_coll; ++k) {
      const double x = rng_coll.uniform(g.x0, g.x_end());
      const double t = rng_coll.uniform(g.t0, g.t_end());
      coll.points.push_back({x, t});
    }
  }
  return {std::move(obs), std::move(coll)};
}

double relative_l2_error(const DensityField& est, const DensityField& truth) {
  if (!est.grid.same_shape(truth.grid))
    throw std::invalid_argument("relative_l2_error: grid mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < est.values.size(); ++k) {
    const double d = est.values[k] - truth.values[k];
    num += d * d;
    den += truth.values[k] * truth.values[k];
  }
  if (den == 0.0) {
    if (num == 0.0) return 0.0;
    throw std::invalid_argument("relative_l2_error: zero-norm truth field");
  }
  return 100.0 * std::sqrt(num) / std::sqrt(den);
}

}  // namespace tse
