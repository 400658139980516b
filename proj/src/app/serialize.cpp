#include <algorithm>
#include <fstream>
#include <sstream>

#include "radiomap/app.hpp"
#include "radiomap/encoding.hpp"
#include "radiomap/errors.hpp"
#include "radiomap/scenes.hpp"

namespace radiomap::app {
namespace {

using nlohmann::json;

json vec(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw MalformedInput(std::string(what) + " must be an array of 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

/// Runs f, turning json type errors into MalformedInput tagged with `what`.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw MalformedInput(std::string(what) + ": " + e.what());
  }
}

json pairs_json(const planner::PairSet& s) {
  json a = json::array();
  for (const auto& [x, y] : s) a.push_back({x, y});
  return a;
}

planner::PairSet pairs_from(const json& j) {
  planner::PairSet s;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2) throw MalformedInput("region pair must be [a, b]");
    s.insert(planner::make_region_pair(p[0].get<int>(), p[1].get<int>()));
  }
  return s;
}

}  // namespace

json to_json(const partition::Partition& p) {
  json regions = json::array();
  for (const auto& r : p.regions) {
    json patches = json::array();
    for (const auto& patch : r.patches) {
      json voxels = json::array();
      for (const auto& v : patch.voxels) voxels.push_back({v.i, v.j, v.k});
      patches.push_back({{"representative", vec(patch.representative)}, {"voxels", voxels}});
    }
    regions.push_back({{"id", r.id}, {"center", vec(r.center)}, {"patches", patches}});
  }
  return {{"D", p.D}, {"regions", regions}};
}

partition::Partition partition_from_json(const json& j) {
  return guarded("partition", [&] {
    partition::Partition p;
    p.D = j.at("D").get<double>();
    for (const auto& r : j.at("regions")) {
      partition::Region region;
      region.id = r.at("id").get<int>();
      region.center = vec_from(r.at("center"), "region center");
      for (const auto& patch : r.at("patches")) {
        partition::SurfacePatch sp;
        sp.representative = vec_from(patch.at("representative"), "patch representative");
        for (const auto& v : patch.at("voxels")) {
          if (!v.is_array() || v.size() != 3) throw MalformedInput("partition: voxel must be [i, j, k]");
          sp.voxels.push_back({v[0].get<int>(), v[1].get<int>(), v[2].get<int>()});
        }
        region.patches.push_back(std::move(sp));
      }
      if (region.id != static_cast<int>(p.regions.size())) {
        throw StructuralError("partition: region ids must be 0, 1, 2, ... in order");
      }
      p.regions.push_back(std::move(region));
    }
    return p;
  });
}

json to_json(const planner::CollectionMatrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.size(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.size(); ++j) row.push_back(m.at(i, j));
    rows.push_back(row);
  }
  return {{"m", m.size()}, {"entries", rows}};
}

planner::CollectionMatrix matrix_from_json(const json& j) {
  return guarded("collection matrix", [&] {
    const int m = j.at("m").get<int>();
    const auto& rows = j.at("entries");
    auto mat = planner::init_matrix(m);
    if (!rows.is_array() || static_cast<int>(rows.size()) != m) throw StructuralError("collection matrix: expected m rows");
    for (int a = 0; a < m; ++a) {
      if (static_cast<int>(rows[a].size()) != m) throw StructuralError("collection matrix: expected m columns");
      for (int b = 0; b < m; ++b) {
        const int v = rows[a][b].get<int>();
        if (v != rows[b][a].get<int>()) throw StructuralError("collection matrix: not symmetric");
        if (a == b) {
          if (v != 1) throw StructuralError("collection matrix: diagonal must be 1");
        } else if (a < b && v != 0) {
          if (v != 1 && v != -1) throw StructuralError("collection matrix: entries must be -1, 0 or 1");
          mat.mark(a, b, v);
        }
      }
    }
    return mat;
  });
}

json to_json(const planner::Plan& plan) {
  return {{"start", plan.start},
          {"configs", plan.configs},
          {"step_costs", plan.step_costs},
          {"total_cost", plan.total_cost},
          {"transition_count", plan.transition_count()},
          {"covered_pairs", pairs_json(plan.covered_pairs)}};
}

planner::Plan plan_from_json(const json& j) {
  return guarded("plan", [&] {
    planner::Plan p;
    p.start = j.at("start").get<planner::Configuration>();
    p.configs = j.at("configs").get<std::vector<planner::Configuration>>();
    p.step_costs = j.at("step_costs").get<std::vector<double>>();
    p.total_cost = j.at("total_cost").get<double>();
    p.covered_pairs = pairs_from(j.at("covered_pairs"));
    if (p.step_costs.size() != p.configs.size()) throw StructuralError("plan: one step cost per configuration");
    for (const auto& c : p.configs) {
      if (c.size() != p.start.size()) throw StructuralError("plan: every configuration needs one region per robot");
    }
    return p;
  });
}

json cost_matrix_to_json(const planner::CostMatrix& c) {
  json rows = json::array();
  for (const auto& r : c) {
    json row = json::array();
    for (double v : r) row.push_back(v >= planner::kUnreachable ? json(nullptr) : json(v));
    rows.push_back(row);
  }
  return rows;
}

json to_json(const partition::PartitionParams& p) {
  return {{"max_extent", p.max_extent}, {"D", p.D}, {"seed", p.seed}};
}

json to_json(const partition::WaypointParams& p) { return {{"spacing", p.spacing}, {"height", p.height}}; }

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw MalformedInput("run config must be a JSON object");
  RunConfig c;
  guarded("run config", [&] {
    if (j.contains("scene")) {
      const auto& s = j["scene"];
      c.scene.preset = s.value("preset", std::string{});
      if (s.contains("path")) c.scene.path = s["path"].get<std::string>();
      c.scene.format = s.value("format", c.scene.format);
      c.scene.resolution = s.value("resolution", c.scene.resolution);
      c.scene.seed = s.value("seed", c.scene.seed);
      if (c.scene.preset.empty() && c.scene.path.empty()) c.scene.preset = SceneSource{}.preset;
    }
    if (j.contains("partition")) {
      const auto& p = j["partition"];
      c.partition.max_extent = p.value("max_extent", c.partition.max_extent);
      c.partition.D = p.value("D", c.partition.D);
      c.partition.seed = p.value("seed", c.partition.seed);
    }
    if (j.contains("waypoints")) {
      c.waypoints.spacing = j["waypoints"].value("spacing", c.waypoints.spacing);
      c.waypoints.height = j["waypoints"].value("height", c.waypoints.height);
    }
    if (j.contains("planner")) {
      const auto& p = j["planner"];
      c.robots = p.value("n", c.robots);
      c.start = p.value("start", c.start);
      c.compare_baseline = p.value("compare_baseline", c.compare_baseline);
    }
    if (j.contains("oracle")) c.oracle = fieldsim::oracle_params_from_json(j["oracle"]);
    if (j.contains("collect")) {
      const auto& p = j["collect"];
      c.filter_radius = p.value("filter_radius", c.filter_radius);
      if (p.contains("blocked_pairs")) c.blocked_pairs = pairs_from(p["blocked_pairs"]);
    }
    if (j.contains("render")) c.render = propagation::render_config_from_json(j["render"]);
    if (j.contains("net")) c.net = mpnet::net_config_from_json(j["net"]);
    if (j.contains("train")) c.train = mpnet::train_config_from_json(j["train"]);
    if (j.contains("split")) {
      c.split_fraction = j["split"].value("train_fraction", c.split_fraction);
      c.split_seed = j["split"].value("seed", c.split_seed);
    }
    if (j.contains("heatmap")) c.heatmap_spacing = j["heatmap"].value("spacing", c.heatmap_spacing);
    if (j.contains("out")) c.out = j["out"].get<std::string>();
    c.reproducible = j.value("reproducible", c.reproducible);
    return 0;
  });
  if (c.robots < 2) throw DomainError("run config: planner.n must be >= 2");
  if (!c.start.empty() && static_cast<int>(c.start.size()) != c.robots) {
    throw DomainError("run config: planner.start needs one region per robot");
  }
  if (!(c.waypoints.spacing > 0.0)) throw DomainError("run config: waypoints.spacing must be positive");
  if (!(c.filter_radius >= 0.0)) throw DomainError("run config: collect.filter_radius must be non-negative");
  if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0)) throw DomainError("run config: split.train_fraction must lie in (0, 1)");
  if (!(c.heatmap_spacing > 0.0)) throw DomainError("run config: heatmap.spacing must be positive");
  if (!c.scene.path.empty() && !std::filesystem::exists(c.scene.path)) {
    throw DomainError("run config: scene file does not exist: " + c.scene.path.string());
  }
  if (c.scene.path.empty()) {
    const auto names = scene::preset_names();
    if (std::find(names.begin(), names.end(), c.scene.preset) == names.end()) {
      throw DomainError("run config: unknown scene preset '" + c.scene.preset + "'");
    }
  } else {
    (void)scene::parse_scene_format(c.scene.format);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  auto c = run_config_from_json(read_json(path));
  // Relative scene paths are resolved against the config file's directory.
  if (!c.scene.path.empty() && c.scene.path.is_relative()) {
    const auto resolved = path.parent_path() / c.scene.path;
    if (std::filesystem::exists(resolved)) c.scene.path = resolved;
  }
  return c;
}

json to_json(const RunConfig& c) {
  json scene = {{"format", c.scene.format}, {"resolution", c.scene.resolution}, {"seed", c.scene.seed}};
  if (c.scene.path.empty()) {
    scene["preset"] = c.scene.preset;
  } else {
    scene["path"] = c.scene.path.string();
  }
  json blocked = pairs_json(c.blocked_pairs);
  return {{"scene", scene},
          {"partition", to_json(c.partition)},
          {"waypoints", to_json(c.waypoints)},
          {"planner", {{"n", c.robots}, {"start", c.start}, {"compare_baseline", c.compare_baseline}}},
          {"oracle", fieldsim::to_json(c.oracle)},
          {"collect", {{"filter_radius", c.filter_radius}, {"blocked_pairs", blocked}}},
          {"render", propagation::to_json(c.render)},
          {"net", mpnet::to_json(c.net)},
          {"train", mpnet::to_json(c.train)},
          {"split", {{"train_fraction", c.split_fraction}, {"seed", c.split_seed}}},
          {"heatmap", {{"spacing", c.heatmap_spacing}}},
          {"out", c.out.string()},
          {"reproducible", c.reproducible}};
}

void override_seed(RunConfig& c, std::uint64_t seed) {
  c.scene.seed = seed;
  c.partition.seed = seed;
  c.oracle.seed = seed;
  c.net.seed = seed;
  c.train.seed = seed;
  c.split_seed = seed;
}

scene::OccupancyGrid load_scene(const RunConfig& c) {
  if (c.scene.path.empty()) return scene::make_preset(c.scene.preset, c.scene.resolution, c.scene.seed);
  if (!std::filesystem::exists(c.scene.path)) throw DomainError("scene file does not exist: " + c.scene.path.string());
  return scene::load_scene(c.scene.path, scene::parse_scene_format(c.scene.format), c.scene.resolution);
}

planner::Configuration start_configuration(const RunConfig& c, int m) {
  if (c.robots > m) {
    throw DomainError("cannot place " + std::to_string(c.robots) + " robots in " + std::to_string(m) +
                      " regions (n must not exceed the region count)");
  }
  planner::Configuration start = c.start;
  if (start.empty()) {
    for (int p = 0; p < c.robots; ++p) start.push_back(p);
  }
  planner::validate_configuration(start, m);
  return start;
}

void write_json(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DomainError("file does not exist: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw MalformedInput(path.string() + ": " + e.what());
  }
}

Manifest::Manifest(std::string command, const RunConfig& config)
    : command_(std::move(command)), out_(config.out), config_(to_json(config)) {}

void Manifest::input(const std::string& role, const std::filesystem::path& path) {
  inputs_[role] = {{"path", path.string()}, {"sha256", sha256_file(path.string())}};
}

void Manifest::output(const std::string& role, const std::filesystem::path& path) {
  outputs_[role] = {{"path", path.string()}, {"sha256", sha256_file(path.string())}};
}

void Manifest::write() const {
  const auto path = out_ / "manifest.json";
  json m = json::object();
  if (std::filesystem::exists(path)) {
    try {
      m = read_json(path);
    } catch (const Error&) {
      m = json::object();
    }
  }
  m["tool"] = "radiomap";
  m["version"] = RADIOMAP_VERSION;
  m["commands"][command_] = {{"config", config_}, {"inputs", inputs_}, {"outputs", outputs_}};
  write_json(path, m);
}

}  // namespace radiomap::app
