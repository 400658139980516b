#include <chrono>
#include <cstdio>
#include <fstream>

#include "radiomap/app.hpp"
#include "radiomap/errors.hpp"
#include "radiomap/log.hpp"

namespace radiomap::app {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::filesystem::path or_default(const std::optional<std::filesystem::path>& p, const std::filesystem::path& fallback) {
  return p ? *p : fallback;
}

partition::Partition read_partition(const std::filesystem::path& path, const scene::OccupancyGrid& grid) {
  auto p = partition_from_json(read_json(path));
  if (p.size() < 2) throw DomainError("partition has fewer than 2 regions; nothing to collect");
  for (const auto& r : p.regions)
    for (const auto& patch : r.patches)
      for (const auto& v : patch.voxels)
        if (!grid.in_bounds(v)) throw StructuralError("partition does not belong to this scene (voxel out of bounds)");
  return p;
}

fieldsim::Dataset read_dataset(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DomainError("dataset does not exist: " + path.string());
  return fieldsim::load_dataset(path);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Number of data rows in an existing training log.
int logged_epochs(const std::filesystem::path& log) {
  std::ifstream in(log);
  if (!in) return 0;
  std::string line;
  int rows = -1;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  return std::max(rows, 0);
}

}  // namespace

mpnet::NetConfig fitted_net_config(const RunConfig& c, const scene::OccupancyGrid& grid) {
  auto cfg = c.net;
  mpnet::fit_bounds(cfg, grid, c.render.sub_range);
  return cfg;
}

PartitionSummary cmd_partition(const RunConfig& c) {
  const auto grid = load_scene(c);
  const auto p = partition::partition_scene(grid, c.partition);
  PartitionSummary s;
  s.regions = p.size();
  for (const auto& r : p.regions) s.patches_per_region.push_back(r.patches.size());
  s.file = c.out / "partition.json";
  write_json(s.file, to_json(p));
  Manifest m("partition", c);
  if (!c.scene.path.empty()) m.input("scene", c.scene.path);
  m.output("partition", s.file);
  m.write();
  return s;
}

PlanReport cmd_plan(const RunConfig& c, const std::optional<std::filesystem::path>& partition_file) {
  const auto grid = load_scene(c);
  const auto part_path = or_default(partition_file, c.out / "partition.json");
  const auto part = read_partition(part_path, grid);
  const int m = static_cast<int>(part.size());
  const auto start = start_configuration(c, m);
  const auto travel = planner::travel_cost_matrix(part, grid, c.waypoints);

  PlanReport r;
  auto t0 = Clock::now();
  r.plan = planner::plan_collection(planner::init_matrix(m), c.robots, start, travel);
  r.seconds = c.reproducible ? 0.0 : since(t0);
  json report = {{"regions", m},
                 {"robots", c.robots},
                 {"plan", {{"transition_count", r.plan.transition_count()},
                           {"total_cost_m", r.plan.total_cost},
                           {"compute_seconds", r.seconds}}},
                 {"travel_costs", cost_matrix_to_json(travel)}};
  if (c.compare_baseline) {
    t0 = Clock::now();
    r.baseline = planner::baseline_greedy(planner::init_matrix(m), c.robots, start, travel);
    r.baseline_seconds = c.reproducible ? 0.0 : since(t0);
    report["baseline"] = {{"transition_count", r.baseline->plan.transition_count()},
                          {"total_cost_m", r.baseline->plan.total_cost},
                          {"compute_seconds", r.baseline_seconds},
                          {"truncated", r.baseline->truncated}};
    write_json(c.out / "baseline_plan.json", to_json(r.baseline->plan));
  }
  r.file = c.out / "plan.json";
  write_json(r.file, to_json(r.plan));
  write_json(c.out / "plan_report.json", report);
  Manifest man("plan", c);
  man.input("partition", part_path);
  man.output("plan", r.file);
  man.output("report", c.out / "plan_report.json");
  man.write();
  return r;
}

CollectReport cmd_collect(const RunConfig& c, const std::optional<std::filesystem::path>& plan_file,
                          const std::optional<std::filesystem::path>& partition_file) {
  const auto grid = load_scene(c);
  const auto part_path = or_default(partition_file, c.out / "partition.json");
  const auto plan_path = or_default(plan_file, c.out / "plan.json");
  const auto part = read_partition(part_path, grid);
  const auto plan = plan_from_json(read_json(plan_path));
  const int m = static_cast<int>(part.size());
  if (!plan.empty()) {
    planner::validate_configuration(plan.start, m);
    for (const auto& cfg : plan.configs) planner::validate_configuration(cfg, m);
  }
  for (const auto& [a, b] : c.blocked_pairs) {
    if (b >= m) throw DomainError("blocked pair (" + std::to_string(a) + ", " + std::to_string(b) + ") names a missing region");
  }
  const auto travel = planner::travel_cost_matrix(part, grid, c.waypoints);
  fieldsim::ExecutionOptions opts;
  opts.waypoint_spacing = c.waypoints.spacing;
  opts.waypoint_height = c.waypoints.height;
  opts.blocked_pairs = c.blocked_pairs;

  CollectReport r{fieldsim::execute_plan(plan, planner::init_matrix(m), part, grid, travel, c.oracle, opts), {}, {}};
  r.dataset = fieldsim::preprocess(r.execution.dataset, c.filter_radius, c.oracle.noise_floor_dbm,
                                   r.execution.fill_requests);
  r.dataset.meta["scene"] = c.scene.path.empty() ? c.scene.preset : c.scene.path.string();
  r.file = c.out / "dataset.jsonl";
  std::filesystem::create_directories(c.out);
  fieldsim::save_dataset(r.dataset, r.file);
  write_json(c.out / "matrix.json", to_json(r.execution.matrix));
  json failed = json::array();
  for (const auto& [a, b] : r.execution.matrix.pairs_with(-1)) failed.push_back({a, b});
  write_json(c.out / "collect_report.json", {{"measurements", r.dataset.size()},
                                             {"raw_measurements", r.execution.dataset.size()},
                                             {"fill_requests", r.execution.fill_requests.size()},
                                             {"total_travel_m", r.execution.total_travel},
                                             {"replans", r.execution.replans},
                                             {"configurations_visited", r.execution.visited.size()},
                                             {"failed_pairs", failed},
                                             {"remaining_zeros", r.execution.matrix.zeros().size()}});
  Manifest man("collect", c);
  man.input("partition", part_path);
  man.input("plan", plan_path);
  man.output("dataset", r.file);
  man.output("matrix", c.out / "matrix.json");
  man.output("report", c.out / "collect_report.json");
  man.write();
  return r;
}

fieldsim::Dataset cmd_survey(const RunConfig& c, const std::vector<Vec3>& txs, double spacing,
                             const std::filesystem::path& file) {
  if (txs.empty()) throw DomainError("survey needs at least one transmitter");
  const auto grid = load_scene(c);
  for (const auto& t : txs) {
    if (!grid.in_bounds(grid.voxel_of(t)) || grid.occupied(grid.voxel_of(t))) {
      throw DomainError("survey transmitter is not in free space");
    }
  }
  const auto rxs = fieldsim::free_lattice(grid, spacing, c.waypoints.height);
  auto d = fieldsim::survey(grid, c.oracle, txs, rxs);
  d.meta["scene"] = c.scene.path.empty() ? c.scene.preset : c.scene.path.string();
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  fieldsim::save_dataset(d, file);
  Manifest man("survey", c);
  man.output("dataset", file);
  man.write();
  return d;
}

std::pair<fieldsim::Dataset, fieldsim::Dataset> cmd_split(const RunConfig& c, const std::filesystem::path& dataset) {
  const auto all = read_dataset(dataset);
  auto parts = eval::split_dataset(all, c.split_fraction, c.split_seed);
  std::filesystem::create_directories(c.out);
  fieldsim::save_dataset(parts.first, c.out / "split_train.jsonl");
  fieldsim::save_dataset(parts.second, c.out / "split_test.jsonl");
  Manifest man("split", c);
  man.input("dataset", dataset);
  man.output("train", c.out / "split_train.jsonl");
  man.output("test", c.out / "split_test.jsonl");
  man.write();
  return parts;
}

TrainReport cmd_train(const RunConfig& c, const std::filesystem::path& dataset,
                      const std::optional<std::filesystem::path>& resume) {
  const auto data = read_dataset(dataset);
  if (data.measurements.empty()) throw DomainError("training dataset is empty: " + dataset.string());
  const auto grid = load_scene(c);
  const auto expected = fitted_net_config(c, grid);
  mpnet::MultipathNet net = resume ? mpnet::load_checkpoint(*resume, expected) : mpnet::MultipathNet(expected);

  TrainReport r;
  r.checkpoint = c.out / "model.ckpt";
  r.log = c.out / "train_log.csv";
  std::filesystem::create_directories(c.out);
  r.first_epoch = resume ? logged_epochs(r.log) : 0;
  std::ofstream log(r.log, resume && r.first_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (!log) throw Error("cannot write " + r.log.string());
  if (!resume || r.first_epoch == 0) log << "epoch,l_energy,l_decay,l_total,wall_seconds,mean_abs_signal\n";
  const auto on_epoch = [&](const mpnet::EpochStats& s) {
    log << (r.first_epoch + s.epoch) << ',' << fmt(s.loss.energy) << ',' << fmt(s.loss.decay) << ','
        << fmt(s.loss.total) << ',' << fmt(c.reproducible ? 0.0 : s.seconds) << ',' << fmt(s.mean_signal) << '\n';
    log.flush();
    log::info("epoch ", r.first_epoch + s.epoch, " loss ", s.loss.total, " energy ", s.loss.energy);
  };
  try {
    r.result = mpnet::train(net, data, grid, c.render, c.train, on_epoch);
  } catch (const NumericFault& e) {
    mpnet::save_checkpoint(net, r.checkpoint);
    throw NumericFault(std::string(e.what()) + "; last good checkpoint: " + r.checkpoint.string());
  }
  mpnet::save_checkpoint(net, r.checkpoint);
  Manifest man("train", c);
  man.input("dataset", dataset);
  if (resume) man.input("resume", *resume);
  man.output("checkpoint", r.checkpoint);
  man.output("log", r.log);
  man.write();
  return r;
}

eval::EvalReport cmd_eval(const RunConfig& c, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& train, const std::filesystem::path& test) {
  const auto net = mpnet::load_checkpoint(checkpoint);
  const auto train_set = read_dataset(train);
  const auto test_set = read_dataset(test);
  const auto grid = load_scene(c);
  mpnet::LosCache cache(grid, c.render);
  const auto t0 = Clock::now();
  auto report = eval::evaluate(
      [&](const Vec3& tx, const Vec3& rx) { return mpnet::predict_dbm(net, cache, grid, tx, rx, c.render); }, train_set,
      test_set, grid, c.oracle.d0, c.oracle.noise_floor_dbm);
  report.seconds = c.reproducible ? 0.0 : since(t0);
  write_json(c.out / "eval.json", eval::to_json(report));
  Manifest man("eval", c);
  man.input("checkpoint", checkpoint);
  man.input("train", train);
  man.input("test", test);
  man.output("report", c.out / "eval.json");
  man.write();
  return report;
}

propagation::Heatmap cmd_heatmap(const RunConfig& c, const std::filesystem::path& checkpoint, const Vec3& tx,
                                 double z) {
  const auto net = mpnet::load_checkpoint(checkpoint);
  const auto grid = load_scene(c);
  if (!(z >= grid.origin().z && z <= grid.upper_corner().z)) throw DomainError("heatmap z lies outside the scene");
  const auto map = propagation::render_heatmap(net, grid, tx, z, c.heatmap_spacing, c.render);
  std::filesystem::create_directories(c.out);
  propagation::write_heatmap_csv(map, c.out / "heatmap.csv");
  propagation::write_heatmap_pgm(map, c.render, c.out / "heatmap.pgm");
  Manifest man("heatmap", c);
  man.input("checkpoint", checkpoint);
  man.output("csv", c.out / "heatmap.csv");
  man.output("pgm", c.out / "heatmap.pgm");
  man.write();
  return map;
}

}  // namespace radiomap::app
