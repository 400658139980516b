#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radiomap/partition.hpp"
#include "radiomap/planner.hpp"
#include "radiomap/scene.hpp"

namespace radiomap::fieldsim {

struct OracleParams {
  double ref_power_dbm = -30.0;
  double d0 = 1.0;
  double path_loss_exp = 2.0;
  double reflection_coeff = 0.6;
  int max_bounces = 3;
  double noise_floor_dbm = -80.0;
  double noise_sigma_dbm = 0.0;
  /// Minimum capture sphere radius; widened with path length so that a path is hit
  /// by a few rays on average.
  double capture_radius = 0.3;
  int ray_count = 4096;
  std::uint64_t seed = 1;
};

/// Throws DomainError when the parameters violate their invariants.
void validate(const OracleParams& params);

nlohmann::json to_json(const OracleParams& params);
OracleParams oracle_params_from_json(const nlohmann::json& j);

/// Ray tree launched from one transmitter, reusable for any number of receivers.
class OracleField {
 public:
  OracleField(const scene::OccupancyGrid& grid, const OracleParams& params, const Vec3& tx);

  /// Received power in dBm at rx, clamped to the noise floor, plus seeded noise.
  [[nodiscard]] double rssi(const Vec3& rx) const;
  /// Noise-free received power in mW (0 when nothing arrives).
  [[nodiscard]] double power_mw(const Vec3& rx) const;

  [[nodiscard]] const Vec3& tx() const { return tx_; }
  [[nodiscard]] std::size_t segment_count() const { return segments_.size(); }

 private:
  struct Segment {
    Vec3 origin;
    Vec3 dir;
    double length;
    /// Path length travelled before this segment starts.
    double offset;
    int bounces;
  };

  const scene::OccupancyGrid* grid_;
  OracleParams params_;
  Vec3 tx_;
  std::vector<Segment> segments_;
};

/// One-shot oracle query. Throws DomainError if tx or rx is not in free space.
double oracle_rssi(const scene::OccupancyGrid& grid, const OracleParams& params, const Vec3& tx,
                   const Vec3& rx);

struct Measurement {
  Vec3 tx;
  Vec3 rx;
  double rssi_dbm = 0.0;
  std::optional<planner::RegionPair> pair;
};

struct Dataset {
  std::vector<Measurement> measurements;
  nlohmann::json meta = nlohmann::json::object();

  [[nodiscard]] std::size_t size() const { return measurements.size(); }
};

inline constexpr int kDatasetSchemaVersion = 1;

/// JSONL: a {"meta": ...} header line, then one record per line.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
/// Throws MalformedInput naming the offending line.
Dataset load_dataset(const std::filesystem::path& path);

/// Free voxel-aligned lattice points at z = height, spacing apart, x/y = (i + 0.5) * spacing.
std::vector<Vec3> free_lattice(const scene::OccupancyGrid& grid, double spacing, double height);

/// Oracle readings for every (tx, rx) combination with tx != rx.
Dataset survey(const scene::OccupancyGrid& grid, const OracleParams& params, const std::vector<Vec3>& txs,
               const std::vector<Vec3>& rxs);

struct FillRequest {
  Vec3 tx;
  Vec3 rx;
  std::optional<planner::RegionPair> pair;
};

struct ExecutionOptions {
  double waypoint_spacing = 1.0;
  double waypoint_height = 1.25;
  /// Region pairs whose link is forced down (fault injection).
  planner::PairSet blocked_pairs;
};

struct ExecutionResult {
  Dataset dataset;
  planner::CollectionMatrix matrix;
  double total_travel = 0.0;
  int replans = 0;
  /// Waypoint pairs of failed region pairs, to be filled by preprocess.
  std::vector<FillRequest> fill_requests;
  /// Every configuration actually visited, in order.
  std::vector<planner::Configuration> visited;
};

/// Runs a plan against the oracle. `matrix` is the state before execution.
ExecutionResult execute_plan(const planner::Plan& plan, planner::CollectionMatrix matrix,
                             const partition::Partition& partition, const scene::OccupancyGrid& grid,
                             const planner::CostMatrix& travel, const OracleParams& oracle,
                             const ExecutionOptions& options = {});

/// Median filter over measurements whose tx and rx both lie within filter_radius,
/// duplicate (tx, rx) records collapsed, then fill requests appended at floor_dbm.
Dataset preprocess(const Dataset& dataset, double filter_radius, double floor_dbm,
                   const std::vector<FillRequest>& fills = {});

}  // namespace radiomap::fieldsim
