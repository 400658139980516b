#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radiomap/eval.hpp"
#include "radiomap/fieldsim.hpp"
#include "radiomap/mpnet.hpp"
#include "radiomap/partition.hpp"
#include "radiomap/planner.hpp"
#include "radiomap/propagation.hpp"

namespace radiomap::app {

nlohmann::json to_json(const partition::Partition& p);
/// Throws MalformedInput on missing or mistyped fields.
partition::Partition partition_from_json(const nlohmann::json& j);

nlohmann::json to_json(const planner::CollectionMatrix& m);
/// Throws MalformedInput or StructuralError (asymmetric, bad entries).
planner::CollectionMatrix matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const planner::Plan& plan);
planner::Plan plan_from_json(const nlohmann::json& j);

nlohmann::json cost_matrix_to_json(const planner::CostMatrix& c);

nlohmann::json to_json(const partition::PartitionParams& p);
nlohmann::json to_json(const partition::WaypointParams& p);

struct SceneSource {
  /// Either a preset name or a file path.
  std::string preset = "two-room-corridor";
  std::filesystem::path path;
  std::string format = "occupancy-json";
  double resolution = scene::kDefaultResolution;
  std::uint64_t seed = 1;
};

struct RunConfig {
  SceneSource scene;
  partition::PartitionParams partition;
  partition::WaypointParams waypoints;
  int robots = 2;
  /// Starting regions, one per robot; empty means 0, 1, ..., robots - 1.
  std::vector<int> start;
  bool compare_baseline = false;
  fieldsim::OracleParams oracle;
  double filter_radius = 0.0;
  planner::PairSet blocked_pairs;
  propagation::RenderConfig render;
  mpnet::NetConfig net;
  mpnet::TrainConfig train;
  double split_fraction = 0.5;
  std::uint64_t split_seed = 1;
  double heatmap_spacing = 0.5;
  std::filesystem::path out = "out";
  bool reproducible = false;
};

/// Every field optional. Throws MalformedInput on type errors, DomainError on
/// invalid values or a scene file that does not exist.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);
/// Replaces every seed in the config with `seed`.
void override_seed(RunConfig& c, std::uint64_t seed);

scene::OccupancyGrid load_scene(const RunConfig& c);
planner::Configuration start_configuration(const RunConfig& c, int m);

/// Inputs and outputs of one command with their SHA-256, merged into out/manifest.json.
class Manifest {
 public:
  Manifest(std::string command, const RunConfig& config);
  void input(const std::string& role, const std::filesystem::path& path);
  void output(const std::string& role, const std::filesystem::path& path);
  void write() const;

 private:
  std::string command_;
  std::filesystem::path out_;
  nlohmann::json config_;
  nlohmann::json inputs_ = nlohmann::json::object();
  nlohmann::json outputs_ = nlohmann::json::object();
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
/// Throws MalformedInput (parse errors) or DomainError (missing file).
nlohmann::json read_json(const std::filesystem::path& path);

struct PartitionSummary {
  std::size_t regions = 0;
  std::vector<std::size_t> patches_per_region;
  std::filesystem::path file;
};
PartitionSummary cmd_partition(const RunConfig& c);

struct PlanReport {
  planner::Plan plan;
  std::optional<planner::BaselineResult> baseline;
  double seconds = 0.0;
  double baseline_seconds = 0.0;
  std::filesystem::path file;
};
/// Reads the partition from `partition_file` (default out/partition.json).
PlanReport cmd_plan(const RunConfig& c, const std::optional<std::filesystem::path>& partition_file = {});

struct CollectReport {
  fieldsim::ExecutionResult execution;
  fieldsim::Dataset dataset;
  std::filesystem::path file;
};
CollectReport cmd_collect(const RunConfig& c, const std::optional<std::filesystem::path>& plan_file = {},
                          const std::optional<std::filesystem::path>& partition_file = {});

/// Oracle survey of every given Tx against the free lattice at the waypoint height.
fieldsim::Dataset cmd_survey(const RunConfig& c, const std::vector<Vec3>& txs, double spacing,
                             const std::filesystem::path& file);

/// Writes split_train.jsonl and split_test.jsonl.
std::pair<fieldsim::Dataset, fieldsim::Dataset> cmd_split(const RunConfig& c, const std::filesystem::path& dataset);

struct TrainReport {
  mpnet::TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  int first_epoch = 0;
};
/// Writes out/model.ckpt and appends to out/train_log.csv. With `resume`, training
/// continues from that checkpoint and the log's epoch numbering. On divergence the
/// last good parameters are saved before the NumericFault propagates.
TrainReport cmd_train(const RunConfig& c, const std::filesystem::path& dataset,
                      const std::optional<std::filesystem::path>& resume = {});

/// Scores a checkpoint on `test`; baselines are fitted on `train`. Writes out/eval.json.
eval::EvalReport cmd_eval(const RunConfig& c, const std::filesystem::path& checkpoint,
                          const std::filesystem::path& train, const std::filesystem::path& test);

/// Writes out/heatmap.csv and out/heatmap.pgm.
propagation::Heatmap cmd_heatmap(const RunConfig& c, const std::filesystem::path& checkpoint, const Vec3& tx,
                                 double z);

/// Net config sized for the scene: encoder bounds fitted, with the configured widths.
mpnet::NetConfig fitted_net_config(const RunConfig& c, const scene::OccupancyGrid& grid);

}  // namespace radiomap::app
