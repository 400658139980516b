#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "radiomap/app.hpp"
#include "radiomap/errors.hpp"
#include "radiomap/log.hpp"
#include "radiomap/scenes.hpp"

using namespace radiomap;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

Vec3 parse_vec3(const std::string& text) {
  std::stringstream ss(text);
  std::string tok;
  std::vector<double> v;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DomainError("expected x,y,z but got '" + text + "'");
    }
  }
  if (v.size() != 3) throw DomainError("expected x,y,z but got '" + text + "'");
  return {v[0], v[1], v[2]};
}

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool compare_baseline = false;
  bool reproducible = false;
  std::string out;
  bool quiet = false;
};

app::RunConfig resolve(const Globals& g) {
  app::RunConfig c = g.config.empty() ? app::RunConfig{} : app::load_run_config(g.config);
  if (g.seed) app::override_seed(c, *g.seed);
  if (g.compare_baseline) c.compare_baseline = true;
  if (g.reproducible) c.reproducible = true;
  if (!g.out.empty()) c.out = g.out;
  return c;
}

int run(int argc, char** argv) {
  CLI::App cli{"Radio map construction: partition, plan, collect, train, evaluate"};
  cli.require_subcommand(1);
  Globals g;
  cli.add_option("--config", g.config, "Run config (JSON)");
  cli.add_option("--seed", g.seed, "Override every seed in the config");
  cli.add_flag("--compare-baseline", g.compare_baseline, "Also run the greedy baseline planner");
  cli.add_flag("--reproducible", g.reproducible, "Byte-identical outputs: no timings in reports");
  cli.add_option("--out", g.out, "Output directory (default from config, else ./out)");
  cli.add_flag("-q,--quiet", g.quiet, "Only warnings and errors");

  auto* config_cmd = cli.add_subcommand("config", "Print the resolved run config as JSON");

  auto* scene_cmd = cli.add_subcommand("scene", "Write the configured scene as occupancy JSON");
  bool list_presets = false;
  scene_cmd->add_flag("--list", list_presets, "List preset names");

  auto* part_cmd = cli.add_subcommand("partition", "Partition the scene into mutually non-visible regions");

  auto* plan_cmd = cli.add_subcommand("plan", "Plan robot configurations covering every region pair");
  std::string partition_file;
  plan_cmd->add_option("--partition", partition_file, "Partition JSON (default <out>/partition.json)");

  auto* collect_cmd = cli.add_subcommand("collect", "Execute a plan against the simulated field");
  std::string plan_file;
  collect_cmd->add_option("--plan", plan_file, "Plan JSON (default <out>/plan.json)");
  collect_cmd->add_option("--partition", partition_file, "Partition JSON (default <out>/partition.json)");

  auto* survey_cmd = cli.add_subcommand("survey", "Simulated readings from fixed transmitters on a free lattice");
  std::vector<std::string> tx_list;
  double spacing = 1.0;
  std::string survey_file;
  survey_cmd->add_option("--tx", tx_list, "Transmitter x,y,z (repeatable)")->required();
  survey_cmd->add_option("--spacing", spacing, "Receiver lattice spacing in meters");
  survey_cmd->add_option("--output", survey_file, "Dataset path (default <out>/survey.jsonl)");

  auto* split_cmd = cli.add_subcommand("split", "Seeded train/test split of a dataset");
  std::string dataset;
  split_cmd->add_option("--dataset", dataset, "Dataset JSONL")->required();

  auto* train_cmd = cli.add_subcommand("train", "Train the multipath network");
  std::string resume;
  train_cmd->add_option("--dataset", dataset, "Training dataset JSONL")->required();
  train_cmd->add_option("--resume", resume, "Continue from this checkpoint");

  auto* eval_cmd = cli.add_subcommand("eval", "Mean absolute error against both baselines");
  std::string checkpoint, train_set, test_set;
  eval_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--train", train_set, "Training dataset (baselines are fitted on it)")->required();
  eval_cmd->add_option("--test", test_set, "Test dataset")->required();

  auto* heat_cmd = cli.add_subcommand("heatmap", "Predicted signal strength over a horizontal slice");
  std::string tx_text;
  double z = 1.25;
  heat_cmd->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  heat_cmd->add_option("--tx", tx_text, "Transmitter x,y,z")->required();
  heat_cmd->add_option("--z", z, "Slice height in meters");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : kExitInput;
  }
  if (g.quiet) log::set_level(log::Level::kWarn);

  const auto c = resolve(g);
  if (config_cmd->parsed()) {
    std::cout << app::to_json(c).dump(2) << '\n';
  } else if (scene_cmd->parsed()) {
    if (list_presets) {
      for (const auto& n : scene::preset_names()) std::cout << n << '\n';
      return 0;
    }
    const auto grid = app::load_scene(c);
    const auto path = c.out / "scene.json";
    std::filesystem::create_directories(c.out);
    scene::save_scene(grid, path);
    const auto d = grid.dims();
    std::cout << "scene " << d[0] << "x" << d[1] << "x" << d[2] << " voxels at " << grid.resolution() << " m, "
              << grid.occupied_count() << " occupied -> " << path.string() << '\n';
  } else if (part_cmd->parsed()) {
    const auto s = app::cmd_partition(c);
    std::cout << "regions " << s.regions << " -> " << s.file.string() << '\n';
  } else if (plan_cmd->parsed()) {
    const auto r = app::cmd_plan(c, partition_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(partition_file));
    std::cout << "configurations " << r.plan.transition_count() << " cost " << r.plan.total_cost << " m";
    if (r.baseline) {
      std::cout << " | baseline configurations " << r.baseline->plan.transition_count() << " cost "
                << r.baseline->plan.total_cost << " m";
    }
    std::cout << " -> " << r.file.string() << '\n';
  } else if (collect_cmd->parsed()) {
    const auto r = app::cmd_collect(c, plan_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(plan_file),
                                    partition_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(partition_file));
    std::cout << "measurements " << r.dataset.size() << " replans " << r.execution.replans << " travel "
              << r.execution.total_travel << " m -> " << r.file.string() << '\n';
  } else if (survey_cmd->parsed()) {
    std::vector<Vec3> txs;
    for (const auto& t : tx_list) txs.push_back(parse_vec3(t));
    const auto file = survey_file.empty() ? c.out / "survey.jsonl" : std::filesystem::path(survey_file);
    const auto d = app::cmd_survey(c, txs, spacing, file);
    std::cout << "measurements " << d.size() << " -> " << file.string() << '\n';
  } else if (split_cmd->parsed()) {
    const auto [a, b] = app::cmd_split(c, dataset);
    std::cout << "train " << a.size() << " test " << b.size() << '\n';
  } else if (train_cmd->parsed()) {
    const auto r = app::cmd_train(c, dataset, resume.empty() ? std::nullopt : std::optional<std::filesystem::path>(resume));
    const auto& h = r.result.history;
    std::cout << "epochs " << h.size();
    if (!h.empty()) std::cout << " final loss " << h.back().loss.total;
    std::cout << " -> " << r.checkpoint.string() << '\n';
  } else if (eval_cmd->parsed()) {
    const auto r = app::cmd_eval(c, checkpoint, train_set, test_set);
    std::printf("MAE %.3f dBm (log-distance %.3f, nearest neighbor %.3f) over %zu records\n", r.mae,
                r.mae_log_distance, r.mae_nearest_neighbor, r.count);
  } else if (heat_cmd->parsed()) {
    const auto map = app::cmd_heatmap(c, checkpoint, parse_vec3(tx_text), z);
    std::cout << "heatmap " << map.nx << "x" << map.ny << " -> " << (c.out / "heatmap.csv").string() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const NumericFault& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const MalformedInput& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const StructuralError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const IncompatibleCheckpoint& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DegenerateScene& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const EmptyRegion& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const ConflictError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
