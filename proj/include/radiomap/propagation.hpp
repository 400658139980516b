#pragma once

#include <complex>
#include <filesystem>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "radiomap/scene.hpp"

namespace radiomap::propagation {

using ComplexSignal = std::complex<double>;

struct RenderConfig {
  int k_tx = 64;
  int k_rx = 64;
  /// Sub-samples per Rx ray.
  int s = 4;
  double sub_range = 0.5;
  double d0 = 1.0;
  double ref_power_dbm = -30.0;
  double noise_floor_dbm = -80.0;
  double path_loss_exp = 2.0;
  /// G(w_k) per Fibonacci direction; empty means omnidirectional (1 / k_rx each).
  std::vector<double> gain;
  /// Adds the direct-path term to the rendered multipath magnitude.
  bool los_compensation = true;

  /// Gain of direction k, resolving the omnidirectional default.
  [[nodiscard]] double gain_at(int k) const;
};

/// Throws DomainError when counts are < 1, sub_range <= 0, ref <= floor, or the gain
/// table has the wrong size or does not sum to 1.
void validate(const RenderConfig& cfg);

nlohmann::json to_json(const RenderConfig& cfg);
RenderConfig render_config_from_json(const nlohmann::json& j);

enum class Role { kTx, kRx };

struct TxPoint {
  Vec3 pos;
  double alpha = 0.0;
};

struct RxSample {
  Vec3 pos;
  /// Spacing to the next sample along the ray.
  double sigma = 0.0;
};

struct RxRay {
  Vec3 dir;
  /// Index into the Fibonacci direction set, used for the gain lookup.
  int direction = 0;
  std::vector<RxSample> samples;
};

struct LosPointSet {
  Role role = Role::kTx;
  Vec3 anchor;
  std::vector<TxPoint> tx_points;
  std::vector<RxRay> rays;

  [[nodiscard]] std::size_t rx_sample_count() const;
};

/// First surface hits around `pos`. Tx points carry direct-path weights and are
/// sorted lexicographically; Rx rays carry s samples over [hit, hit + sub_range].
/// Throws DomainError if pos is not free, DegenerateScene if no ray hits anything.
LosPointSet sample_los_points(const scene::OccupancyGrid& grid, const Vec3& pos, Role role,
                              const RenderConfig& cfg);

/// alpha_j = e_j / sum(e), e_j = (d0 / max(d_j, d0))^exp.
std::vector<double> direct_path_weights(const Vec3& tx, std::span<const Vec3> points, const RenderConfig& cfg);

/// Volume-rendering weights along one ray.
struct RayWeights {
  std::vector<double> transmittance;
  std::vector<double> weight;
};
RayWeights ray_weights(std::span<const double> sigma, std::span<const double> delta);

/// What the renderer needs from a multipath model.
class MultipathModel {
 public:
  virtual ~MultipathModel() = default;
  /// delta at rx_point, and S(tx_points[j], rx_point) for every j into `signals`.
  virtual void evaluate(std::span<const Vec3> tx_points, const Vec3& rx_point, double& delta,
                        std::vector<ComplexSignal>& signals) const = 0;
};

/// Permutation of tx points in lexicographic position order; sums over Tx points
/// always run in this order.
std::vector<std::size_t> canonical_order(std::span<const TxPoint> points);

struct RenderResult {
  ComplexSignal received;
  double magnitude = 0.0;
  /// h(w_k) per surviving ray, in ray order.
  std::vector<ComplexSignal> per_ray;
};

/// Throws NumericFault naming the sample when the model returns NaN or Inf.
RenderResult render_rx(const LosPointSet& tx_set, const LosPointSet& rx_set, const MultipathModel& model,
                       const RenderConfig& cfg);

/// Direct-path factor: 0 without line of sight, else (d0 / max(d, d0))^exp.
double los_alpha(const Vec3& tx, const Vec3& rx, const scene::OccupancyGrid& grid, const RenderConfig& cfg);

/// Normalized received level in [0, 1].
double compensated_level(double multipath_mag, double alpha_los);
double level_to_dbm(double level, const RenderConfig& cfg);
double dbm_to_level(double dbm, const RenderConfig& cfg);

/// level_to_dbm(compensated_level(mag, alpha_los)); alpha_los is 0 when compensation is off.
double los_compensate(double multipath_mag, const Vec3& tx, const Vec3& rx, const scene::OccupancyGrid& grid,
                      const RenderConfig& cfg);

double predict_rssi(const MultipathModel& model, const scene::OccupancyGrid& grid, const Vec3& tx, const Vec3& rx,
                    const RenderConfig& cfg);

/// Predicted dBm over a z-slice; NaN where the cell is occupied or coincides with tx.
struct Heatmap {
  double x0 = 0.0;
  double y0 = 0.0;
  double z = 0.0;
  double spacing = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> dbm;

  [[nodiscard]] double at(int ix, int iy) const { return dbm[static_cast<std::size_t>(iy) * nx + ix]; }
};

Heatmap render_heatmap(const MultipathModel& model, const scene::OccupancyGrid& grid, const Vec3& tx, double z,
                       double spacing, const RenderConfig& cfg);
/// Rows of "x,y,dbm"; occupied cells are written as "nan".
void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path);
/// 8-bit binary PGM, floor -> 0 and ref -> 255, top row at max y.
void write_heatmap_pgm(const Heatmap& map, const RenderConfig& cfg, const std::filesystem::path& path);

}  // namespace radiomap::propagation
