#pragma once

#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "radiomap/fieldsim.hpp"
#include "radiomap/scene.hpp"

namespace radiomap::eval {

/// rssi(d) = intercept - 10 * exponent * log10(max(d, d0) / d0), never below floor_dbm.
struct LogDistanceModel {
  double intercept = 0.0;
  double exponent = 0.0;
  double d0 = 1.0;
  double floor_dbm = -80.0;

  [[nodiscard]] double predict(const Vec3& tx, const Vec3& rx) const;
};

/// Least-squares fit of both parameters. Falls back to the mean (exponent 0) when all
/// distances coincide. Throws DomainError on an empty dataset.
LogDistanceModel fit_log_distance(const fieldsim::Dataset& train, double d0 = 1.0, double floor_dbm = -80.0);

/// Lookup of the training record closest in the concatenated (tx, rx) position.
class NearestNeighbor {
 public:
  /// Throws DomainError on an empty dataset.
  explicit NearestNeighbor(const fieldsim::Dataset& train);
  [[nodiscard]] double predict(const Vec3& tx, const Vec3& rx) const;

 private:
  std::vector<fieldsim::Measurement> records_;
};

/// Throws DomainError on size mismatch or empty input.
double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth);

using Predictor = std::function<double(const Vec3& tx, const Vec3& rx)>;

struct EvalReport {
  std::vector<double> abs_errors;
  double mae = 0.0;
  double mae_log_distance = 0.0;
  double mae_nearest_neighbor = 0.0;
  std::size_t count = 0;
  /// Subset where tx and rx see each other.
  std::size_t los_count = 0;
  double mae_los = 0.0;
  double seconds = 0.0;
};

nlohmann::json to_json(const EvalReport& report);

/// Scores `predict` on `test` next to both baselines fitted on `train`.
EvalReport evaluate(const Predictor& predict, const fieldsim::Dataset& train, const fieldsim::Dataset& test,
                    const scene::OccupancyGrid& grid, double d0 = 1.0, double floor_dbm = -80.0);

/// Seeded shuffle then split; the first `train_fraction` of records (rounded) go to train.
std::pair<fieldsim::Dataset, fieldsim::Dataset> split_dataset(const fieldsim::Dataset& all, double train_fraction,
                                                              std::uint64_t seed);

/// Seeded subsample keeping round(fraction * size) records, in original order.
fieldsim::Dataset subsample(const fieldsim::Dataset& all, double fraction, std::uint64_t seed);

}  // namespace radiomap::eval
