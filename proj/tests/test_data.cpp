#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "tse/data.hpp"
#include "tse/rng.hpp"

using namespace tse;

namespace {

std::filesystem::path write_tmp(const char* name, const std::string& content) {
  auto dir = std::filesystem::temp_directory_path() / "tse_data_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream os(path);
  os << content;
  return path;
}

// straight-line trajectory records for one vehicle
void add_vehicle(TrajectoryTable& t, long id, double t0, double x0, double v,
                 double t1, double step = 1.0) {
  for (double tt = t0; tt <= t1 + 1e-12; tt += step)
    t.records.push_back({id, tt, x0 + v * (tt - t0), v, 1});
}

}  // namespace

TEST_CASE("trajectory CSV parsing: happy path and errors") {
  const auto good = write_tmp("good.csv",
                              "vehicle_id,time_s,position_ft,speed_fps,lane\n"
                              "1,0.0,10.0,20.0,1\n"
                              "1,1.0,30.0,20.0,1\n"
                              "2,0.5,5.0,,2\n");
  const TrajectoryTable t = read_trajectory_csv(good);
  REQUIRE(t.records.size() == 3);
  CHECK(t.records[0].vehicle_id == 1);
  CHECK(t.records[2].speed.has_value() == false);
  CHECK(t.records[2].lane.value() == 2);

  const auto bad_row = write_tmp("bad_row.csv",
                                 "vehicle_id,time_s,position_ft\n"
                                 "1,0.0,10.0\n"
                                 "1,oops,30.0\n");
  try {
    read_trajectory_csv(bad_row);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 3);
  }

  const auto bad_header = write_tmp("bad_header.csv", "car,when,where\n1,0,0\n");
  CHECK_THROWS_AS(read_trajectory_csv(bad_header), ParseError);

  const auto non_monotone = write_tmp("nonmono.csv",
                                      "vehicle_id,time_s,position_ft\n"
                                      "1,1.0,10.0\n"
                                      "1,1.0,30.0\n");
  CHECK_THROWS_AS(read_trajectory_csv(non_monotone), std::invalid_argument);
}

TEST_CASE("empty table bins to a zero field with a fully masked speed") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 4, 3);
  const BinResult r = bin_trajectories(TrajectoryTable{}, g);
  for (double v : r.density.values) CHECK(v == 0.0);
  for (auto m : r.speed.mask) CHECK(m == 0);
  CHECK(r.spill.records.empty());
}

TEST_CASE("one vehicle crossing one cell in one bin: hand Edie values") {
  // 20 ft/s across the 20-ft cell [0,20) during the 5-s bin [0,5):
  // occupancy 1 s, so density = 1/(20*5) = 0.01 veh/ft and speed = 20 ft/s
  const Grid g = Grid::from_counts(0, 0, 20, 5, 2, 2);
  TrajectoryTable t;
  t.records.push_back({7, 0.0, 0.0, 20.0, 1});
  t.records.push_back({7, 1.0, 20.0, 20.0, 1});
  t.records.push_back({7, 2.0, 40.0, 20.0, 1});

  const BinResult r = bin_trajectories(t, g);
  CHECK(r.density.at(0, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(r.speed.valid(0, 0));
  CHECK(r.speed.at(0, 0) == doctest::Approx(20.0).epsilon(1e-12));
  // second cell [20,40) also holds 1 vehicle-second
  CHECK(r.density.at(1, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(r.density.at(0, 1) == 0.0);
}

TEST_CASE("two identical vehicles double the density at equal speed") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 4, 2);
  TrajectoryTable one, two;
  add_vehicle(one, 1, 0.0, 0.0, 16.0, 5.0);
  add_vehicle(two, 1, 0.0, 0.0, 16.0, 5.0);
  add_vehicle(two, 2, 0.0, 0.0, 16.0, 5.0);

  const BinResult r1 = bin_trajectories(one, g);
  const BinResult r2 = bin_trajectories(two, g);
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nt; ++j) {
      CHECK(r2.density.at(i, j) == doctest::Approx(2.0 * r1.density.at(i, j)));
      if (r1.speed.valid(i, j))
        CHECK(r2.speed.at(i, j) == doctest::Approx(r1.speed.at(i, j)));
    }
}

TEST_CASE("records outside the grid land in the spill report") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 2, 2);
  TrajectoryTable t;
  t.records.push_back({3, 0.0, -100.0, {}, {}});
  t.records.push_back({3, 20.0, 100.0, {}, {}});  // also beyond duration
  const BinResult r = bin_trajectories(t, g);
  CHECK(r.spill.records.size() == 2);
  CHECK(r.spill.records[0].reason == "outside-grid");

  const auto path = std::filesystem::temp_directory_path() / "tse_data_tests" /
                    "spill.jsonl";
  r.spill.write_jsonl(path);
  std::ifstream is(path);
  std::string line;
  int lines = 0;
  while (std::getline(is, line)) {
    ++lines;
    CHECK(line.find("outside-grid") != std::string::npos);
  }
  CHECK(lines == 2);
}

TEST_CASE("Edie consistency: binned flow equals boundary counting") {
  // vehicles that fully traverse the cell during the bin contribute exactly
  // one mid-boundary crossing and one cell-length of distance each
  const Grid g = Grid::from_counts(0, 0, 20, 5, 2, 2);
  TrajectoryTable t;
  int id = 1;
  for (double t_enter : {0.1, 1.1, 2.1, 3.1})
    add_vehicle(t, id++, 0.0, -20.0 * t_enter, 20.0, 5.0, 0.5);

  const BinResult r = bin_trajectories(t, g);
  const double flow_edie = r.density.at(0, 0) * r.speed.at(0, 0);

  // direct count of crossings of x = 10 during [0, 5): at t_enter + 0.5
  const double flow_count = 4.0 / 5.0;
  CHECK(flow_edie == doctest::Approx(flow_count).epsilon(1e-9));
}

TEST_CASE("binning conserves in-domain vehicle-seconds") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 6, 4);
  TrajectoryTable t;
  add_vehicle(t, 1, 0.0, -30.0, 13.7, 20.0, 0.7);
  add_vehicle(t, 2, 2.5, 5.0, 7.3, 19.5, 1.3);
  add_vehicle(t, 3, 1.0, 60.0, 0.0, 18.0, 2.0);  // parked vehicle

  const BinResult r = bin_trajectories(t, g);
  double total = 0.0;
  for (int i = 0; i < g.nx; ++i)
    for (int j = 0; j < g.nt; ++j) total += r.density.at(i, j) * g.dx * g.dt;

  // independent clipping oracle: intersect each linear segment with the box
  double expected = 0.0;
  for (std::size_t k = 1; k < t.records.size(); ++k) {
    const auto& a = t.records[k - 1];
    const auto& b = t.records[k];
    if (a.vehicle_id != b.vehicle_id) continue;
    double lo = std::max(a.time, g.t0);
    double hi = std::min(b.time, g.t_end());
    const double v = (b.position - a.position) / (b.time - a.time);
    if (v != 0.0) {
      const double t_at_x0 = a.time + (g.x0 - a.position) / v;
      const double t_at_x1 = a.time + (g.x_end() - a.position) / v;
      lo = std::max(lo, std::min(t_at_x0, t_at_x1));
      hi = std::min(hi, std::max(t_at_x0, t_at_x1));
    } else if (a.position < g.x0 || a.position > g.x_end()) {
      continue;
    }
    expected += std::max(0.0, hi - lo);
  }
  CHECK(total == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("FD estimation recovers exact Greenshields samples") {
  const FDParams truth(54.30, 0.11);
  const Grid g = Grid::from_counts(0, 0, 20, 5, 10, 5);
  DensityField d = DensityField::zeros(g);
  SpeedField s = SpeedField::masked(g);
  for (int k = 0; k < 50; ++k) {
    const int i = k / 5, j = k % 5;
    const double rho = truth.rho_m * (k + 1) / 51.0;
    d.at(i, j) = rho;
    s.set(i, j, greenshields_speed(rho, truth));
  }
  const FDParams fit = estimate_fd_params(d, s);
  CHECK(fit.v_f == doctest::Approx(54.30).epsilon(1e-9));
  CHECK(fit.rho_m == doctest::Approx(0.11).epsilon(1e-9));
}

TEST_CASE("FD estimation under noise: Monte-Carlo regression oracle") {
  const FDParams truth(54.30, 0.11);
  const int n = 10000;
  const Grid g = Grid::from_counts(0, 0, 20, 5, 100, 100);
  DensityField d = DensityField::zeros(g);
  SpeedField s = SpeedField::masked(g);
  Xoshiro256 rng(7);
  for (int k = 0; k < n; ++k) {
    const int i = k / 100, j = k % 100;
    const double rho = rng.uniform(0.0, truth.rho_m);
    d.at(i, j) = rho;
    s.set(i, j, std::max(0.0, greenshields_speed(rho, truth) + rng.normal()));
  }
  const FDParams fit = estimate_fd_params(d, s);
  CHECK(std::abs(fit.v_f - 54.30) < 1.0);
  CHECK(std::abs(fit.rho_m - 0.11) < 0.01);
}

TEST_CASE("FD estimation rejects degenerate inputs") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 10, 5);
  DensityField d = DensityField::zeros(g);
  SpeedField s = SpeedField::masked(g);
  // too few pairs
  d.at(0, 0) = 0.05;
  s.set(0, 0, 30.0);
  CHECK_THROWS_AS(estimate_fd_params(d, s), EstimationError);
  // no spread
  for (int k = 0; k < 12; ++k) {
    d.at(k / 5, k % 5) = 0.05;
    s.set(k / 5, k % 5, 30.0);
  }
  CHECK_THROWS_AS(estimate_fd_params(d, s), EstimationError);
  // increasing speed with density
  for (int k = 0; k < 12; ++k) {
    const double rho = 0.01 + 0.008 * k;
    d.at(k / 5, k % 5) = rho;
    s.set(k / 5, k % 5, 10.0 + 100.0 * rho);
  }
  CHECK_THROWS_AS(estimate_fd_params(d, s), EstimationError);
}

TEST_CASE("sampling is seeded, exhaustive when asked, and validated") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 120, 60);
  DensityField f = DensityField::zeros(g);
  for (std::size_t k = 0; k < f.values.size(); ++k) f.values[k] = 1e-5 * k;

  SamplingPlan plan;
  plan.n_obs = 1000;
  plan.n_coll = 5000;
  plan.seed = 11;
  const auto [obs1, coll1] = sample_points(f, plan);
  const auto [obs2, coll2] = sample_points(f, plan);
  REQUIRE(obs1.points.size() == 1000);  // 1000/7200 of the cells, ~13.9%
  REQUIRE(coll1.points.size() == 5000);
  for (std::size_t k = 0; k < obs1.points.size(); ++k) {
    CHECK(obs1.points[k].x == obs2.points[k].x);
    CHECK(obs1.points[k].rho == obs2.points[k].rho);
  }
  for (std::size_t k = 0; k < coll1.points.size(); ++k)
    CHECK(coll1.points[k].x == coll2.points[k].x);

  // observations sit at distinct cell centers with the binned value
  std::set<std::pair<double, double>> seen;
  for (const auto& o : obs1.points) {
    CHECK(seen.insert({o.x, o.t}).second);
    const int i = static_cast<int>((o.x - g.x0) / g.dx);
    const int j = static_cast<int>((o.t - g.t0) / g.dt);
    CHECK(o.rho == f.at(i, j));
  }

  // exhaustive draw hits every cell exactly once
  const Grid small = Grid::from_counts(0, 0, 20, 5, 4, 3);
  DensityField sf = DensityField::zeros(small);
  SamplingPlan all;
  all.n_obs = 12;
  all.n_coll = 5;
  const auto [obs_all, coll_all] = sample_points(sf, all);
  std::set<std::pair<double, double>> cells;
  for (const auto& o : obs_all.points) cells.insert({o.x, o.t});
  CHECK(cells.size() == 12);

  all.n_obs = 13;
  CHECK_THROWS_AS(sample_points(sf, all), std::invalid_argument);
}

TEST_CASE("latin hypercube stratifies both axes") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 10, 10);
  DensityField f = DensityField::zeros(g);
  SamplingPlan plan;
  plan.n_obs = 1;
  plan.n_coll = 50;
  plan.strategy = SamplingPlan::Strategy::LatinHypercube;
  const auto [obs, coll] = sample_points(f, plan);
  (void)obs;
  std::set<int> sx, st;
  for (const auto& c : coll.points) {
    sx.insert(static_cast<int>((c.x - g.x0) / (g.length / 50)));
    st.insert(static_cast<int>((c.t - g.t0) / (g.duration / 50)));
  }
  CHECK(sx.size() == 50);  // one point per stratum on each axis
  CHECK(st.size() == 50);
}

TEST_CASE("relative L2 error: identities and closed forms") {
  const Grid g = Grid::from_counts(0, 0, 20, 5, 6, 5);
  DensityField truth = DensityField::zeros(g);
  Xoshiro256 rng(3);
  for (auto& v : truth.values) v = rng.uniform(0.01, 0.1);

  CHECK(relative_l2_error(truth, truth) == 0.0);

  DensityField est = truth;
  for (auto& v : est.values) v *= 1.1;
  CHECK(relative_l2_error(est, truth) == doctest::Approx(10.0).epsilon(1e-9));

  // unit-norm truth plus constant c: error = 100 c sqrt(nx nt)
  DensityField unit = DensityField::zeros(g);
  unit.values[4] = 1.0;
  DensityField shifted = unit;
  const double c = 0.001;
  for (auto& v : shifted.values) v += c;
  CHECK(relative_l2_error(shifted, unit) ==
        doctest::Approx(100.0 * c * std::sqrt(30.0)).epsilon(1e-9));

  // scale equivariance
  DensityField est2 = truth;
  for (std::size_t k = 0; k < est2.values.size(); ++k)
    est2.values[k] += 0.001 * std::sin(double(k));
  DensityField truth_s = truth, est_s = est2;
  for (auto& v : truth_s.values) v *= 3.5;
  for (auto& v : est_s.values) v *= 3.5;
  CHECK(relative_l2_error(est_s, truth_s) ==
        doctest::Approx(relative_l2_error(est2, truth)).epsilon(1e-12));

  const Grid g2 = Grid::from_counts(0, 0, 20, 5, 5, 6);
  CHECK_THROWS_AS(relative_l2_error(DensityField::zeros(g2), truth),
                  std::invalid_argument);
}
