#include <algorithm>
#include <deque>
#include <map>

#include "radiomap/errors.hpp"
#include "radiomap/fieldsim.hpp"
#include "radiomap/log.hpp"

namespace radiomap::fieldsim {
namespace {

using planner::Configuration;

/// 26-connected free-space component label per voxel (-1 for occupied).
std::vector<int> free_components(const scene::OccupancyGrid& grid) {
  const auto& d = grid.dims();
  std::vector<int> label(grid.voxel_count(), -1);
  int next = 0;
  for (std::size_t s = 0; s < label.size(); ++s) {
    if (label[s] >= 0 || grid.occupied(grid.unlinear(s))) continue;
    std::deque<std::size_t> queue{s};
    label[s] = next;
    while (!queue.empty()) {
      const VoxelIndex v = grid.unlinear(queue.front());
      queue.pop_front();
      for (int dk = -1; dk <= 1; ++dk)
        for (int dj = -1; dj <= 1; ++dj)
          for (int di = -1; di <= 1; ++di) {
            const VoxelIndex w{v.i + di, v.j + dj, v.k + dk};
            if (w.i < 0 || w.j < 0 || w.k < 0 || w.i >= d[0] || w.j >= d[1] || w.k >= d[2]) continue;
            const std::size_t lw = grid.linear(w);
            if (label[lw] >= 0 || grid.occupied(w)) continue;
            label[lw] = next;
            queue.push_back(lw);
          }
    }
    ++next;
  }
  return label;
}

double nearest_neighbor_tour(const Vec3& from, const std::vector<Vec3>& points) {
  std::vector<char> used(points.size(), 0);
  Vec3 cur = from;
  double total = 0.0;
  for (std::size_t step = 0; step < points.size(); ++step) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (used[k]) continue;
      const double dd = distance(cur, points[k]);
      if (dd < best_d) {
        best_d = dd;
        best = k;
      }
    }
    used[best] = 1;
    total += best_d;
    cur = points[best];
  }
  return total;
}

}  // namespace

ExecutionResult execute_plan(const planner::Plan& plan, planner::CollectionMatrix matrix,
                             const partition::Partition& partition, const scene::OccupancyGrid& grid,
                             const planner::CostMatrix& travel, const OracleParams& oracle,
                             const ExecutionOptions& options) {
  validate(oracle);
  ExecutionResult result{{}, matrix, 0.0, 0, {}, {}};
  result.dataset.meta["source"] = "execute_plan";
  result.dataset.meta["oracle"] = to_json(oracle);
  if (plan.empty()) return result;
  if (matrix.size() != static_cast<int>(partition.size())) {
    throw DomainError("execute_plan: matrix size does not match partition");
  }

  const auto all_waypoints = partition::all_region_waypoints(
      partition, grid, {options.waypoint_spacing, options.waypoint_height});
  const auto anchors = planner::region_anchors(partition, all_waypoints);
  const auto labels = free_components(grid);
  std::vector<std::vector<Vec3>> waypoints(partition.size());
  for (std::size_t r = 0; r < partition.size(); ++r) {
    const int home = labels[grid.linear(grid.voxel_of(anchors[r]))];
    for (const auto& w : all_waypoints[r]) {
      if (labels[grid.linear(grid.voxel_of(w))] == home) {
        waypoints[r].push_back(w);
      } else {
        log::warn("execute_plan: waypoint (", w.x, ", ", w.y, ", ", w.z, ") of region ", r,
                  " is unreachable; skipped");
      }
    }
  }
  std::vector<double> tour_len(partition.size());
  for (std::size_t r = 0; r < partition.size(); ++r) tour_len[r] = nearest_neighbor_tour(anchors[r], waypoints[r]);

  // Tracing is the expensive part; keep ray trees per transmitter waypoint.
  std::map<std::pair<int, std::size_t>, OracleField> fields;
  const auto field_for = [&](int region, std::size_t k) -> const OracleField& {
    const auto key = std::make_pair(region, k);
    auto it = fields.find(key);
    if (it == fields.end()) {
      if (fields.size() >= 512) fields.clear();
      it = fields.emplace(key, OracleField(grid, oracle, waypoints[static_cast<std::size_t>(region)][k])).first;
    }
    return it->second;
  };

  std::vector<Configuration> queue = plan.configs;
  Configuration current = plan.start;
  Configuration previous = plan.start;
  const int n = static_cast<int>(plan.start.size());
  std::size_t idx = 0;
  while (idx < queue.size()) {
    const Configuration cfg = queue[idx];
    for (int p = 0; p < n; ++p) result.total_travel += travel[current[p]][cfg[p]];
    for (int r : cfg) result.total_travel += tour_len[static_cast<std::size_t>(r)];
    result.visited.push_back(cfg);

    bool failed = false;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const auto pair = planner::make_region_pair(cfg[p], cfg[q]);
        if (result.matrix.at(pair.first, pair.second) != 0) continue;
        const int tx_region = pair.first;
        const int rx_region = pair.second;
        const auto& txw = waypoints[static_cast<std::size_t>(tx_region)];
        const auto& rxw = waypoints[static_cast<std::size_t>(rx_region)];
        const bool blocked = options.blocked_pairs.contains(pair);
        std::vector<Measurement> readings;
        bool any_signal = false;
        for (std::size_t a = 0; a < txw.size(); ++a) {
          for (const auto& rx : rxw) {
            if (rx == txw[a]) continue;
            const double v = blocked ? oracle.noise_floor_dbm : field_for(tx_region, a).rssi(rx);
            any_signal = any_signal || v > oracle.noise_floor_dbm;
            readings.push_back({txw[a], rx, v, pair});
          }
        }
        if (any_signal) {
          result.matrix.mark(pair, 1);
          result.dataset.measurements.insert(result.dataset.measurements.end(), readings.begin(), readings.end());
        } else {
          log::info("execute_plan: regions ", pair.first, " and ", pair.second, " cannot communicate");
          result.matrix.mark(pair, -1);
          failed = true;
          for (const auto& m : readings) result.fill_requests.push_back({m.tx, m.rx, pair});
        }
      }
    }

    if (failed && !result.matrix.complete()) {
      for (int p = 0; p < n; ++p) result.total_travel += travel[cfg[p]][previous[p]];
      current = previous;
      queue = planner::replan_on_failure(result.matrix, previous, n, travel).configs;
      idx = 0;
      ++result.replans;
      continue;
    }
    previous = cfg;
    current = cfg;
    ++idx;
  }
  return result;
}

}  // namespace radiomap::fieldsim
