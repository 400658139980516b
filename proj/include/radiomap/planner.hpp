#pragma once

#include <cstdint>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "radiomap/partition.hpp"
#include "radiomap/scene.hpp"

namespace radiomap::planner {

/// Unordered region pair in canonical form (first < second).
using RegionPair = std::pair<int, int>;
using PairSet = std::set<RegionPair>;

/// Canonical pair; throws DomainError for self-pairs.
RegionPair make_region_pair(int a, int b);

/// Symmetric m x m state matrix: 0 uncollected, 1 collected, -1 infeasible.
/// The diagonal is fixed at 1.
class CollectionMatrix {
 public:
  explicit CollectionMatrix(int m);

  [[nodiscard]] int size() const { return m_; }
  [[nodiscard]] int at(int i, int j) const;

  /// Sets both symmetric entries. 1 and -1 are terminal: re-marking with the same
  /// value is a no-op, with the other value a ConflictError.
  void mark(int i, int j, int value);
  void mark(const RegionPair& pair, int value) { mark(pair.first, pair.second, value); }

  /// Off-diagonal pairs (i < j) currently at `value`.
  [[nodiscard]] PairSet pairs_with(int value) const;
  [[nodiscard]] PairSet zeros() const { return pairs_with(0); }
  [[nodiscard]] bool complete() const { return zeros().empty(); }

  bool operator==(const CollectionMatrix&) const = default;

 private:
  int m_;
  std::vector<std::int8_t> state_;
};

/// Fresh matrix; throws DomainError for m < 2.
CollectionMatrix init_matrix(int m);

/// regions[p] is the region occupied by robot p.
using Configuration = std::vector<int>;

/// Throws DomainError unless the configuration has >= 2 distinct ids in [0, m).
void validate_configuration(const Configuration& config, int m);

PairSet pairs_of(const Configuration& config);

/// m x m travel costs in meters. kUnreachable marks disconnected regions.
using CostMatrix = std::vector<std::vector<double>>;
inline constexpr double kUnreachable = 1e9;

struct Transition {
  double cost = 0.0;
  /// assignment[p] is the region robot p moves to.
  Configuration assignment;
};

/// Minimum-cost matching of a's robots onto b's regions (Hungarian algorithm).
/// The cost is summed in robot order.
Transition transition_cost(const Configuration& a, const Configuration& b, const CostMatrix& travel);

struct Plan {
  Configuration start;
  /// Visited configurations in robot order: configs[t][p] is robot p's region.
  std::vector<Configuration> configs;
  /// Cost of reaching configs[t] from the previous configuration (or start).
  std::vector<double> step_costs;
  double total_cost = 0.0;
  PairSet covered_pairs;

  [[nodiscard]] bool empty() const { return configs.empty(); }
  /// Number of inter-configuration moves, start excluded.
  [[nodiscard]] std::size_t transition_count() const { return configs.size(); }
};

/// Greedy cover of U by n-region configurations built by region growth.
std::vector<Configuration> greedy_set_cover(const PairSet& U, int m, int n);

/// Open-path TSP from start through every config. Exact for small inputs,
/// nearest-neighbor plus 2-opt otherwise. Throws DomainError on duplicate configs.
Plan order_configs_tsp(const std::vector<Configuration>& configs, const Configuration& start,
                       const CostMatrix& travel);

Plan plan_two_robots(const CollectionMatrix& matrix, const Configuration& start, const CostMatrix& travel);
Plan plan_multi(const CollectionMatrix& matrix, int n, const Configuration& start, const CostMatrix& travel);
/// plan_two_robots for n == 2, plan_multi otherwise.
Plan plan_collection(const CollectionMatrix& matrix, int n, const Configuration& start,
                     const CostMatrix& travel);
/// Re-plans the remaining zeros starting from the configuration the team reverted to.
Plan replan_on_failure(const CollectionMatrix& matrix, const Configuration& previous, int n,
                       const CostMatrix& travel);

enum class BaselineObjective {
  /// Lowest transition cost among configurations adding at least one pair,
  /// ties by most newly covered pairs.
  kCostThenCoverage,
  /// Most newly covered pairs, ties by lowest transition cost.
  kCoverageThenCost,
};

struct BaselineOptions {
  BaselineObjective objective = BaselineObjective::kCostThenCoverage;
  /// Maximum n-subsets scored per step.
  std::uint64_t candidate_cap = 5'000'000;
};

struct BaselineResult {
  Plan plan;
  bool truncated = false;
};

/// Step-wise greedy over all n-subsets (m <= 63).
BaselineResult baseline_greedy(const CollectionMatrix& matrix, int n, const Configuration& start,
                               const CostMatrix& travel, const BaselineOptions& options = {});

/// Shortest 26-connected free-space path lengths between each region's anchor: the
/// waypoint nearest its center.
CostMatrix travel_cost_matrix(const partition::Partition& partition,
                              const std::vector<std::vector<Vec3>>& waypoints,
                              const scene::OccupancyGrid& grid);
CostMatrix travel_cost_matrix(const partition::Partition& partition, const scene::OccupancyGrid& grid,
                              const partition::WaypointParams& params = {});

/// Anchor waypoint per region used by travel_cost_matrix.
std::vector<Vec3> region_anchors(const partition::Partition& partition,
                                 const std::vector<std::vector<Vec3>>& waypoints);

/// Shortest 26-connected free-space path lengths from `source` to every voxel
/// (infinity where unreachable). Steps have Euclidean length.
std::vector<double> free_space_distances(const scene::OccupancyGrid& grid, const Vec3& source);

}  // namespace radiomap::planner
