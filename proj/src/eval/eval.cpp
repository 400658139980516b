#include "radiomap/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "radiomap/errors.hpp"
#include "radiomap/random.hpp"

namespace radiomap::eval {
namespace {

double log_term(const Vec3& tx, const Vec3& rx, double d0) {
  return -10.0 * std::log10(std::max((rx - tx).norm(), d0) / d0);
}

}  // namespace

double LogDistanceModel::predict(const Vec3& tx, const Vec3& rx) const {
  return std::max(floor_dbm, intercept + exponent * log_term(tx, rx, d0));
}

LogDistanceModel fit_log_distance(const fieldsim::Dataset& train, double d0, double floor_dbm) {
  if (train.measurements.empty()) throw DomainError("log-distance fit: empty training set");
  if (!(d0 > 0.0)) throw DomainError("log-distance fit: d0 must be positive");
  const double n = static_cast<double>(train.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& m : train.measurements) {
    sx += log_term(m.tx, m.rx, d0);
    sy += m.rssi_dbm;
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& m : train.measurements) {
    const double x = log_term(m.tx, m.rx, d0) - mx;
    sxx += x * x;
    sxy += x * (m.rssi_dbm - my);
  }
  LogDistanceModel model;
  model.d0 = d0;
  model.floor_dbm = floor_dbm;
  model.exponent = sxx > 1e-12 ? sxy / sxx : 0.0;
  model.intercept = my - model.exponent * mx;
  return model;
}

NearestNeighbor::NearestNeighbor(const fieldsim::Dataset& train) : records_(train.measurements) {
  if (records_.empty()) throw DomainError("nearest neighbor: empty training set");
}

double NearestNeighbor::predict(const Vec3& tx, const Vec3& rx) const {
  double best = std::numeric_limits<double>::infinity();
  double value = 0.0;
  for (const auto& m : records_) {
    const double d = (m.tx - tx).squared_norm() + (m.rx - rx).squared_norm();
    if (d < best) {
      best = d;
      value = m.rssi_dbm;
    }
  }
  return value;
}

double mean_absolute_error(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw DomainError("MAE: size mismatch");
  if (predicted.empty()) throw DomainError("MAE: no values");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - truth[i]);
  return s / static_cast<double>(predicted.size());
}

nlohmann::json to_json(const EvalReport& r) {
  return {{"mae_dbm", r.mae},
          {"baselines", {{"log_distance_mae_dbm", r.mae_log_distance}, {"nearest_neighbor_mae_dbm", r.mae_nearest_neighbor}}},
          {"count", r.count},
          {"los_count", r.los_count},
          {"los_mae_dbm", r.mae_los},
          {"abs_errors_dbm", r.abs_errors},
          {"seconds", r.seconds}};
}

EvalReport evaluate(const Predictor& predict, const fieldsim::Dataset& train, const fieldsim::Dataset& test,
                    const scene::OccupancyGrid& grid, double d0, double floor_dbm) {
  if (test.measurements.empty()) throw DomainError("evaluate: empty test set");
  const auto t0 = std::chrono::steady_clock::now();
  const auto log_model = fit_log_distance(train, d0, floor_dbm);
  const NearestNeighbor nn(train);
  EvalReport r;
  r.count = test.size();
  std::vector<double> truth, ours, logd, near;
  double los_sum = 0.0;
  for (const auto& m : test.measurements) {
    truth.push_back(m.rssi_dbm);
    ours.push_back(predict(m.tx, m.rx));
    logd.push_back(log_model.predict(m.tx, m.rx));
    near.push_back(nn.predict(m.tx, m.rx));
    r.abs_errors.push_back(std::abs(ours.back() - m.rssi_dbm));
    if (scene::mutually_visible(grid, m.tx, m.rx)) {
      ++r.los_count;
      los_sum += r.abs_errors.back();
    }
  }
  r.mae = mean_absolute_error(ours, truth);
  r.mae_log_distance = mean_absolute_error(logd, truth);
  r.mae_nearest_neighbor = mean_absolute_error(near, truth);
  r.mae_los = r.los_count ? los_sum / static_cast<double>(r.los_count) : 0.0;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::pair<fieldsim::Dataset, fieldsim::Dataset> split_dataset(const fieldsim::Dataset& all, double train_fraction,
                                                              std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw DomainError("split: fraction must lie in [0, 1]");
  std::vector<std::size_t> order(all.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(all.size())));
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  fieldsim::Dataset a, b;
  a.meta = b.meta = all.meta;
  for (std::size_t i = 0; i < order.size(); ++i) (i < cut ? a : b).measurements.push_back(all.measurements[order[i]]);
  return {a, b};
}

fieldsim::Dataset subsample(const fieldsim::Dataset& all, double fraction, std::uint64_t seed) {
  return split_dataset(all, fraction, seed).first;
}

}  // namespace radiomap::eval
