#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "radiomap/errors.hpp"
#include "radiomap/fieldsim.hpp"
#include "radiomap/random.hpp"
#include "radiomap/scenes.hpp"

using namespace radiomap;
using namespace radiomap::fieldsim;

namespace {

/// Empty grid: no surfaces, so only the direct path exists.
scene::OccupancyGrid open_space() { return scene::OccupancyGrid({80, 80, 40}, 0.25, {-10, -10, -5}); }

OracleParams quiet() {
  OracleParams p;
  p.max_bounces = 0;
  return p;
}

/// Corridor of `sections` 3 m long sections, one region per section.
struct Corridor {
  scene::OccupancyGrid grid;
  partition::Partition part;
};

Corridor corridor(int sections) {
  Corridor c{scene::make_closed_room({3.0 * sections, 1.0, 2.5}, 0.25), {}};
  c.part.D = 8.0;
  c.part.regions.resize(static_cast<std::size_t>(sections));
  for (int r = 0; r < sections; ++r) {
    c.part.regions[r].id = r;
    c.part.regions[r].center = {3.0 * r + 1.5, 0.5, 1.25};
  }
  std::vector<std::vector<VoxelIndex>> members(static_cast<std::size_t>(sections));
  for (const auto& v : scene::extract_surface_voxels(c.grid)) {
    const Vec3 p = c.grid.center_of(v);
    const int r = std::clamp(static_cast<int>(std::floor(p.x / 3.0)), 0, sections - 1);
    members[r].push_back(v);
  }
  for (int r = 0; r < sections; ++r) {
    const VoxelIndex rep = c.grid.voxel_of({3.0 * r + 1.5, 0.5, -0.1});
    c.part.regions[r].patches.push_back({members[r], c.grid.center_of(rep)});
  }
  return c;
}

double db(double mw) { return 10.0 * std::log10(mw); }

/// Received power predicted by the image method for a single reflection off each
/// wall of the box [0, ext].
double image_method_first_order(const Vec3& tx, const Vec3& rx, const Vec3& ext, const OracleParams& p) {
  const double p0 = std::pow(10.0, p.ref_power_dbm / 10.0);
  double total = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (double wall : {0.0, ext[a]}) {
      Vec3 img = rx;
      img[a] = 2.0 * wall - rx[a];
      total += p0 * std::pow(p.d0 / distance(tx, img), p.path_loss_exp) * p.reflection_coeff * p.reflection_coeff;
    }
  }
  return total;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("radiomap_" + name);
}

}  // namespace

TEST_CASE("free space at d0 reads the reference power") {
  const auto grid = open_space();
  const auto p = quiet();
  CHECK(oracle_rssi(grid, p, {0, 0, 1}, {1, 0, 1}) == doctest::Approx(-30.0).epsilon(1e-12));
  CHECK(oracle_rssi(grid, p, {0, 0, 1}, {0, 0.6, 1.8}) == doctest::Approx(-30.0).epsilon(1e-12));
}

TEST_CASE("doubling distance costs 20 log10 2 with exponent 2") {
  const auto grid = open_space();
  const auto p = quiet();
  const double r = oracle_rssi(grid, p, {0, 0, 1}, {2, 0, 1});
  CHECK(r == doctest::Approx(-30.0 - 20.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(r == doctest::Approx(-36.0206).epsilon(1e-5));
}

TEST_CASE("blocked link without reflections reads the floor") {
  const auto grid = scene::make_two_rooms();
  const auto p = quiet();
  CHECK(oracle_rssi(grid, p, {2.0, 2.0, 1.25}, {9.0, 2.0, 1.25}) == -80.0);
}

TEST_CASE("oracle rejects endpoints in occupied voxels") {
  const auto grid = scene::make_two_rooms();
  const auto wall = scene::extract_surface_voxels(grid).front();
  const Vec3 solid = grid.center_of(wall);
  CHECK_THROWS_AS(oracle_rssi(grid, {}, solid, {2.0, 2.0, 1.25}), DomainError);
  CHECK_THROWS_AS(oracle_rssi(grid, {}, {2.0, 2.0, 1.25}, solid), DomainError);
  CHECK_THROWS_AS(oracle_rssi(grid, {}, {2.0, 2.0, 1.25}, {2.0, 2.0, 1.25}), DomainError);
}

TEST_CASE("oracle parameters are validated") {
  OracleParams p;
  p.ref_power_dbm = -90.0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p = {};
  p.d0 = 0.0;
  CHECK_THROWS_AS(validate(p), DomainError);
  p = {};
  p.reflection_coeff = 1.5;
  CHECK_THROWS_AS(validate(p), DomainError);
  p = {};
  p.max_bounces = -1;
  CHECK_THROWS_AS(validate(p), DomainError);

  p = {};
  p.noise_sigma_dbm = 2.5;
  p.seed = 99;
  const auto back = oracle_params_from_json(to_json(p));
  CHECK(back.noise_sigma_dbm == 2.5);
  CHECK(back.seed == 99);
  CHECK(back.ray_count == p.ray_count);
  CHECK_THROWS_AS(oracle_params_from_json({{"d0", "far"}}), MalformedInput);
}

TEST_CASE("free-space readings strictly decrease with distance") {
  const auto grid = open_space();
  const auto p = quiet();
  const OracleField field(grid, p, {0, 0, 1});
  double prev = 1e9;
  for (double d = 0.3; d < 9.0; d += 0.37) {
    const double r = field.rssi({d, 0.0, 1.0});
    if (r == p.noise_floor_dbm) break;
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("single reflections agree with the image method") {
  const Vec3 ext{20, 20, 10};
  const auto grid = scene::make_closed_room(ext, 0.5);
  OracleParams p;
  p.max_bounces = 1;
  p.ray_count = 65536;
  const Vec3 tx{8, 10, 1};
  for (const Vec3& rx : {Vec3{12, 10, 1}, Vec3{8, 14, 2}, Vec3{13, 7, 1.5}}) {
    const OracleField field(grid, p, tx);
    const double direct = std::pow(10.0, p.ref_power_dbm / 10.0) / std::pow(distance(tx, rx), 2.0);
    const double reflected = field.power_mw(rx) - direct;
    const double expected = image_method_first_order(tx, rx, ext, p);
    CAPTURE(rx.x);
    CHECK(reflected == doctest::Approx(expected).epsilon(0.2));
    CHECK(db(field.power_mw(rx)) == doctest::Approx(db(direct + expected)).epsilon(0.02));
  }
}

TEST_CASE("more bounces never lower the received power") {
  const auto grid = scene::make_two_room_corridor();
  const Vec3 tx{4.5, 1.5, 1.25};
  Rng rng(5);
  std::vector<Vec3> rxs;
  while (rxs.size() < 40) {
    const Vec3 q{rng.uniform(0.2, 19.8), rng.uniform(0.2, 9.8), rng.uniform(0.3, 2.7)};
    if (grid.free_at(q)) rxs.push_back(q);
  }
  std::vector<double> prev(rxs.size(), 0.0);
  for (int b = 0; b <= 3; ++b) {
    OracleParams p;
    p.max_bounces = b;
    const OracleField field(grid, p, tx);
    for (std::size_t k = 0; k < rxs.size(); ++k) {
      const double mw = field.power_mw(rxs[k]);
      CHECK(mw >= prev[k]);
      prev[k] = mw;
    }
  }
}

TEST_CASE("survey is deterministic for a fixed seed") {
  const auto grid = scene::make_two_room_corridor();
  OracleParams p;
  p.noise_sigma_dbm = 3.0;
  p.seed = 11;
  const auto rxs = free_lattice(grid, 2.0, 1.25);
  const std::vector<Vec3> txs{{4.5, 1.5, 1.25}, {15.5, 6.5, 1.25}};
  const auto a = survey(grid, p, txs, rxs);
  const auto b = survey(grid, p, txs, rxs);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() > 0);
  bool any_diff = false;
  p.seed = 12;
  const auto c = survey(grid, p, txs, rxs);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.measurements[k].rssi_dbm == b.measurements[k].rssi_dbm);
    CHECK(a.measurements[k].rssi_dbm >= p.noise_floor_dbm);
    CHECK(a.measurements[k].tx != a.measurements[k].rx);
    any_diff = any_diff || a.measurements[k].rssi_dbm != c.measurements[k].rssi_dbm;
  }
  CHECK(any_diff);
}

TEST_CASE("free lattice keeps only free points") {
  const auto grid = scene::make_closed_room({4, 4, 3});
  CHECK(free_lattice(grid, 1.0, 1.25).size() == 16);
  CHECK(free_lattice(grid, 2.0, 1.25).size() == 4);
  CHECK(free_lattice(grid, 1.0, 5.0).empty());
  CHECK_THROWS_AS(free_lattice(grid, 0.0, 1.25), DomainError);
}

TEST_CASE("executing a two-region plan takes the full waypoint product") {
  const auto c = corridor(2);
  const auto wps = partition::all_region_waypoints(c.part, c.grid, {});
  REQUIRE(wps[0].size() == 3);
  REQUIRE(wps[1].size() == 3);
  const auto travel = planner::travel_cost_matrix(c.part, c.grid);
  const auto matrix = planner::init_matrix(2);
  const auto plan = planner::plan_collection(matrix, 2, {0, 1}, travel);
  const auto res = execute_plan(plan, matrix, c.part, c.grid, travel, {});
  CHECK(res.dataset.size() == 9);
  CHECK(res.matrix.at(0, 1) == 1);
  CHECK(res.replans == 0);
  CHECK(res.fill_requests.empty());
  // Each tour starts at the middle waypoint: one step to an end, two to the other.
  CHECK(res.total_travel == doctest::Approx(6.0));
  for (const auto& m : res.dataset.measurements) {
    CHECK(m.pair == planner::RegionPair{0, 1});
    CHECK(m.tx.x < 3.0);
    CHECK(m.rx.x > 3.0);
  }
}

TEST_CASE("a link at the noise floor is marked infeasible and triggers a replan") {
  const auto c = corridor(3);
  const auto travel = planner::travel_cost_matrix(c.part, c.grid);
  const auto matrix = planner::init_matrix(3);
  const auto plan = planner::plan_collection(matrix, 2, {0, 1}, travel);
  ExecutionOptions opts;
  opts.blocked_pairs = {{0, 1}};
  const auto res = execute_plan(plan, matrix, c.part, c.grid, travel, {}, opts);
  CHECK(res.matrix.at(0, 1) == -1);
  CHECK(res.matrix.at(0, 2) == 1);
  CHECK(res.matrix.at(1, 2) == 1);
  CHECK(res.matrix.complete());
  CHECK(res.replans >= 1);
  CHECK(res.fill_requests.size() == 9);
  for (const auto& m : res.dataset.measurements) CHECK(m.pair != planner::RegionPair{0, 1});
}

TEST_CASE("sealed rooms cannot communicate") {
  const auto grid = scene::make_two_rooms();
  const auto part = partition::partition_scene(grid, {});
  REQUIRE(part.size() == 2);
  const auto travel = planner::travel_cost_matrix(part, grid);
  const auto matrix = planner::init_matrix(2);
  const auto plan = planner::plan_collection(matrix, 2, {0, 1}, travel);
  const auto res = execute_plan(plan, matrix, part, grid, travel, {});
  CHECK(res.matrix.at(0, 1) == -1);
  CHECK(res.dataset.size() == 0);
  const auto wps = partition::all_region_waypoints(part, grid, {});
  CHECK(res.fill_requests.size() == wps[0].size() * wps[1].size());
}

TEST_CASE("an empty plan collects nothing") {
  const auto c = corridor(2);
  const auto travel = planner::travel_cost_matrix(c.part, c.grid);
  const auto res = execute_plan({}, planner::init_matrix(2), c.part, c.grid, travel, {});
  CHECK(res.dataset.size() == 0);
  CHECK(res.total_travel == 0.0);
  CHECK(res.visited.empty());
}

TEST_CASE("a covering plan without failures leaves no zeros") {
  const auto grid = scene::make_two_room_corridor();
  const auto part = partition::partition_scene(grid, {});
  const int m = static_cast<int>(part.size());
  REQUIRE(m >= 3);
  const auto travel = planner::travel_cost_matrix(part, grid);
  const auto matrix = planner::init_matrix(m);
  const auto plan = planner::plan_collection(matrix, 3, {0, 1, 2}, travel);
  OracleParams p;
  p.ray_count = 1024;
  const auto res = execute_plan(plan, matrix, part, grid, travel, p, {2.0, 1.25, {}});
  if (res.matrix.pairs_with(-1).empty()) CHECK(res.matrix.complete());
  CHECK(res.matrix.zeros().empty());
  CHECK(res.total_travel > 0.0);
  for (const auto& meas : res.dataset.measurements) {
    CHECK(meas.rssi_dbm >= p.noise_floor_dbm);
    CHECK(meas.tx != meas.rx);
  }
}

TEST_CASE("preprocess with zero radius keeps values") {
  Dataset ds;
  Rng rng(3);
  for (int k = 0; k < 30; ++k) {
    ds.measurements.push_back({{rng.uniform(0, 5), rng.uniform(0, 5), 1}, {rng.uniform(0, 5), rng.uniform(0, 5), 1},
                               rng.uniform(-80, -30), std::nullopt});
  }
  const auto out = preprocess(ds, 0.0, -80.0);
  REQUIRE(out.size() == ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) CHECK(out.measurements[k].rssi_dbm == ds.measurements[k].rssi_dbm);
}

TEST_CASE("co-located readings collapse to their median") {
  Dataset ds;
  const Vec3 tx{1, 1, 1};
  const Vec3 rx{4, 1, 1};
  for (double v : {-50.0, -51.0, -90.0}) ds.measurements.push_back({tx, rx, v, std::nullopt});
  const auto out = preprocess(ds, 0.5, -80.0);
  REQUIRE(out.size() == 1);
  CHECK(out.measurements[0].rssi_dbm == -51.0);

  Dataset near;
  const double vals[] = {-50.0, -51.0, -90.0};
  for (int k = 0; k < 3; ++k) near.measurements.push_back({tx, rx + Vec3{0.1 * k, 0, 0}, vals[k], std::nullopt});
  const auto out2 = preprocess(near, 0.25, -80.0);
  REQUIRE(out2.size() == 3);
  for (const auto& m : out2.measurements) CHECK(m.rssi_dbm == -51.0);
}

TEST_CASE("median filter matches a brute-force neighbor scan") {
  Rng rng(8);
  Dataset ds;
  for (int k = 0; k < 200; ++k) {
    const Vec3 tx{std::floor(rng.uniform(0, 3)), std::floor(rng.uniform(0, 3)), 1};
    const Vec3 rx{rng.uniform(0, 4), rng.uniform(0, 4), 1};
    ds.measurements.push_back({tx, rx, std::round(rng.uniform(-80, -30)), std::nullopt});
  }
  const double radius = 0.7;
  const auto out = preprocess(ds, radius, -80.0);
  REQUIRE(out.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<double> v;
    for (const auto& o : ds.measurements) {
      if (distance(o.tx, ds.measurements[i].tx) <= radius && distance(o.rx, ds.measurements[i].rx) <= radius) {
        v.push_back(o.rssi_dbm);
      }
    }
    std::sort(v.begin(), v.end());
    const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    CHECK(out.measurements[i].rssi_dbm == doctest::Approx(med));
  }
}

TEST_CASE("fill requests become floor records") {
  Dataset ds;
  ds.measurements.push_back({{1, 1, 1}, {2, 1, 1}, -40.0, planner::RegionPair{0, 1}});
  const std::vector<FillRequest> fills{{{1, 1, 1}, {5, 1, 1}, planner::RegionPair{0, 2}},
                                       {{1, 1, 1}, {2, 1, 1}, planner::RegionPair{0, 1}}};
  const auto out = preprocess(ds, 0.0, -80.0, fills);
  REQUIRE(out.size() == 2);
  CHECK(out.measurements[0].rssi_dbm == -40.0);
  CHECK(out.measurements[1].rssi_dbm == -80.0);
  CHECK(out.measurements[1].pair == planner::RegionPair{0, 2});
  CHECK_THROWS_AS(preprocess(ds, -1.0, -80.0), DomainError);
}

TEST_CASE("datasets round-trip through JSONL") {
  Dataset ds;
  ds.meta["seed"] = 4;
  ds.measurements.push_back({{1.5, 2.25, 1.25}, {3, 4, 1.25}, -47.123456789, planner::RegionPair{2, 5}});
  ds.measurements.push_back({{0.1, 0.2, 0.3}, {9, 8, 7}, -80.0, std::nullopt});
  const auto path = temp_file("roundtrip.jsonl");
  save_dataset(ds, path);
  const auto back = load_dataset(path);
  REQUIRE(back.size() == 2);
  CHECK(back.meta["seed"] == 4);
  CHECK(back.meta["schema_version"] == kDatasetSchemaVersion);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(back.measurements[k].tx == ds.measurements[k].tx);
    CHECK(back.measurements[k].rx == ds.measurements[k].rx);
    CHECK(back.measurements[k].rssi_dbm == ds.measurements[k].rssi_dbm);
    CHECK(back.measurements[k].pair == ds.measurements[k].pair);
  }
  std::filesystem::remove(path);
}

TEST_CASE("malformed dataset lines are reported with their number") {
  const auto path = temp_file("bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"meta":{"schema_version":1}})" << '\n'
        << R"({"tx":[0,0,1],"rx":[1,0,1],"rssi_dbm":-40})" << '\n'
        << R"({"tx":[0,0],"rx":[1,0,1],"rssi_dbm":-40})" << '\n';
  }
  try {
    (void)load_dataset(path);
    FAIL("expected MalformedInput");
  } catch (const MalformedInput& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << R"({"meta":{"schema_version":7}})" << '\n';
  }
  CHECK_THROWS_AS(load_dataset(path), MalformedInput);
  CHECK_THROWS_AS(load_dataset(temp_file("missing.jsonl")), MalformedInput);
  std::filesystem::remove(path);
}
