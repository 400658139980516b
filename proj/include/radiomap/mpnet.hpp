#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "radiomap/fieldsim.hpp"
#include "radiomap/propagation.hpp"
#include "radiomap/scene.hpp"

namespace radiomap::mpnet {

using propagation::ComplexSignal;

struct HashEncodingParams {
  int levels = 8;
  /// Entries per level; a power of two.
  int table_size = 1 << 14;
  int features_per_level = 2;
  int base_resolution = 16;
  int finest_resolution = 512;
  /// Positions are normalized by the largest extent of this box, so cells are cubes.
  Vec3 bounds_lo{0, 0, 0};
  Vec3 bounds_hi{1, 1, 1};

  [[nodiscard]] int output_dim() const { return levels * features_per_level; }
  /// Grid resolution of a level, geometric from base to finest.
  [[nodiscard]] int resolution(int level) const;
  [[nodiscard]] bool dense(int level) const;
};

void validate(const HashEncodingParams& p);

/// Entry index of a lattice corner within one level's table.
std::size_t hash_index(const HashEncodingParams& p, int level, const std::array<int, 3>& corner);

/// Lattice coordinates of p at a level (before flooring), after normalization.
Vec3 lattice_position(const HashEncodingParams& p, int level, const Vec3& pos);

/// Interpolation record of one encoding: per level, 8 corners (entry index into the
/// whole table, trilinear weight).
struct EncodeTrace {
  std::vector<std::uint32_t> index;
  std::vector<double> weight;
};

/// Trilinear interpolation of the 8 hashed corners per level. `table` holds
/// levels * table_size * features_per_level values; out has output_dim() entries.
/// Positions outside the bounds are clamped (warned once per process).
void encode_position(const HashEncodingParams& p, std::span<const double> table, const Vec3& pos,
                     std::span<double> out, EncodeTrace* trace = nullptr);

struct NetConfig {
  HashEncodingParams tx_encoder;
  HashEncodingParams rx_encoder;
  std::vector<int> attenuation_hidden{128, 128, 128, 128};
  int feature_dim = 64;
  std::vector<int> radiance_hidden{64};
  /// Output biases at initialization.
  double init_delta = 2.0;
  double init_amplitude = 0.5;
  /// Hash entries start uniform in [-init_table_scale, init_table_scale].
  double init_table_scale = 1e-4;
  std::uint64_t seed = 1;
};

void validate(const NetConfig& cfg);
nlohmann::json to_json(const NetConfig& cfg);
NetConfig net_config_from_json(const nlohmann::json& j);

/// Encoder bounds set to the grid box padded by the Rx sub-sampling range.
void fit_bounds(NetConfig& cfg, const scene::OccupancyGrid& grid, double padding);

/// Named slice of the flat parameter vector; matrices are row-major (rows = outputs).
struct Tensor {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;

  [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct NetOutput {
  double delta = 0.0;
  ComplexSignal signal;
  double amplitude = 0.0;
  /// Wrapped to (-pi, pi].
  double phase = 0.0;
};

/// Hash encoders for both ends, an attenuation MLP on the Rx point producing delta and
/// a feature vector, and a radiance MLP on feature + encoded Tx point producing
/// amplitude and phase. delta and amplitude use ReLU output maps.
class MultipathNet : public propagation::MultipathModel {
 public:
  /// Randomly initialized from cfg.seed.
  explicit MultipathNet(const NetConfig& cfg);

  [[nodiscard]] const NetConfig& config() const { return cfg_; }
  [[nodiscard]] const std::vector<Tensor>& tensors() const { return tensors_; }
  [[nodiscard]] const Tensor& tensor(const std::string& name) const;
  [[nodiscard]] std::vector<double>& params() { return params_; }
  [[nodiscard]] const std::vector<double>& params() const { return params_; }
  [[nodiscard]] std::span<const double> values(const Tensor& t) const {
    return std::span<const double>(params_).subspan(t.offset, t.size());
  }

  /// Sets the output layers of both MLPs to zero, so delta = 0 and S = 0 everywhere.
  void zero_output_layers();
  /// Rounds every parameter to the nearest float, the precision stored in checkpoints.
  void round_to_float();

  [[nodiscard]] std::vector<double> encode_tx(const Vec3& p) const;
  [[nodiscard]] std::vector<double> encode_rx(const Vec3& p) const;

  /// Throws NumericFault on a non-finite activation.
  [[nodiscard]] NetOutput forward(const Vec3& p_tx, const Vec3& p_rx) const;

  void evaluate(std::span<const Vec3> tx_points, const Vec3& rx_point, double& delta,
                std::vector<ComplexSignal>& signals) const override;

  [[nodiscard]] int attenuation_layers() const { return static_cast<int>(cfg_.attenuation_hidden.size()) + 1; }
  [[nodiscard]] int radiance_layers() const { return static_cast<int>(cfg_.radiance_hidden.size()) + 1; }

 private:
  void add_tensor(const std::string& name, int rows, int cols);
  void initialize();

  NetConfig cfg_;
  std::vector<Tensor> tensors_;
  std::vector<double> params_;
};

/// Versioned little-endian binary: magic, version, config JSON, then float32 tensors
/// in declaration order.
void save_checkpoint(const MultipathNet& net, const std::filesystem::path& path);
/// Throws IncompatibleCheckpoint for bad magic, version, truncation, or layout.
MultipathNet load_checkpoint(const std::filesystem::path& path);
/// Also requires the stored architecture to match `expected`, naming the first differing field.
MultipathNet load_checkpoint(const std::filesystem::path& path, const NetConfig& expected);

struct TrainConfig {
  double lambda1 = 1.0;
  double lambda2 = 1e-4;
  double learning_rate = 5e-4;
  /// Cosine decay ends at learning_rate * final_lr_fraction.
  double final_lr_fraction = 0.05;
  int epochs = 200;
  int batch_size = 16;
  std::uint64_t seed = 1;
  /// Global gradient norm clip; <= 0 disables.
  double clip_norm = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-10;
  /// Training aborts when the batch-mean |S| exceeds this.
  double max_mean_signal = 1e3;
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct LossParts {
  double energy = 0.0;
  double decay = 0.0;
  double total = 0.0;
};

/// Single-measurement loss in the normalized scale; decay is the mean |S|.
LossParts loss(double pred_level, double measured_level, std::span<const ComplexSignal> signals,
               const TrainConfig& cfg);

/// A measurement with its endpoint LOS sets resolved.
struct PreparedSample {
  const propagation::LosPointSet* tx = nullptr;
  const propagation::LosPointSet* rx = nullptr;
  double alpha_los = 0.0;
  double target_level = 0.0;
};

/// Backward-pass corruptions used to prove the gradient check can fail.
enum class BackwardFault { kNone, kDropAlpha, kDropTransmittanceCoupling };

struct BatchResult {
  LossParts loss;
  std::vector<double> levels;
  double mean_signal = 0.0;
  std::size_t pair_count = 0;
};

/// Batch loss: lambda1 * mean energy + lambda2 * mean |S| over every evaluated
/// (Tx point, Rx sample) pair. Adds dL/dparams into *grad when grad is not null.
BatchResult evaluate_batch(const MultipathNet& net, std::span<const PreparedSample> batch, const TrainConfig& cfg,
                           const propagation::RenderConfig& render, std::vector<double>* grad,
                           BackwardFault fault = BackwardFault::kNone);

/// Compensated normalized level for one measurement, through the batched kernel.
double predict_level(const MultipathNet& net, const propagation::LosPointSet& tx_set,
                     const propagation::LosPointSet& rx_set, double alpha_los,
                     const propagation::RenderConfig& render);

/// LOS point sets keyed by exact position; built on first use.
class LosCache {
 public:
  LosCache(const scene::OccupancyGrid& grid, propagation::RenderConfig render)
      : grid_(&grid), render_(std::move(render)) {}

  const propagation::LosPointSet& tx(const Vec3& p);
  const propagation::LosPointSet& rx(const Vec3& p);
  [[nodiscard]] std::size_t size() const { return tx_.size() + rx_.size(); }

 private:
  using Key = std::array<double, 3>;
  const scene::OccupancyGrid* grid_;
  propagation::RenderConfig render_;
  std::map<Key, propagation::LosPointSet> tx_;
  std::map<Key, propagation::LosPointSet> rx_;
};

/// predict_rssi through the batched kernel, caching LOS sets.
double predict_dbm(const MultipathNet& net, LosCache& cache, const scene::OccupancyGrid& grid, const Vec3& tx,
                   const Vec3& rx, const propagation::RenderConfig& render);

struct EpochStats {
  int epoch = 0;
  LossParts loss;
  double mean_signal = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> history;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Adam with cosine decay over minibatches. Deterministic for a fixed seed.
/// Throws DomainError on an empty dataset; on divergence restores the parameters of
/// the last completed epoch and throws NumericFault.
TrainResult train(MultipathNet& net, const fieldsim::Dataset& dataset, const scene::OccupancyGrid& grid,
                  const propagation::RenderConfig& render, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct GradCheckReport {
  double max_rel_error = 0.0;
  int probes = 0;
  /// Probes where both gradients vanish.
  int skipped = 0;
  /// Probes re-drawn because the loss has a kink within the step.
  int redrawn = 0;
};

/// Analytic gradient against central differences (step 1e-5) on a tiny built-in
/// scene, at randomly chosen parameters including hash-table entries.
GradCheckReport grad_check(const MultipathNet& net, const propagation::RenderConfig& render, int trial_count,
                           std::uint64_t seed = 1, BackwardFault fault = BackwardFault::kNone);

/// Network sized for grad_check: widths <= 16, small tables.
NetConfig tiny_net_config();

}  // namespace radiomap::mpnet
