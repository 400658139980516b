#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "detail.hpp"
#include "radiomap/errors.hpp"
#include "radiomap/log.hpp"
#include "radiomap/random.hpp"
#include "radiomap/scenes.hpp"

namespace radiomap::mpnet {

void validate(const TrainConfig& c) {
  if (!(c.lambda1 > 0.0)) throw DomainError("train config: lambda1 must be positive");
  if (!(c.lambda2 >= 0.0)) throw DomainError("train config: lambda2 must be non-negative");
  if (!(c.learning_rate > 0.0)) throw DomainError("train config: learning_rate must be positive");
  if (!(c.final_lr_fraction >= 0.0 && c.final_lr_fraction <= 1.0)) {
    throw DomainError("train config: final_lr_fraction must lie in [0, 1]");
  }
  if (c.epochs < 0) throw DomainError("train config: epochs must be non-negative");
  if (c.batch_size < 1) throw DomainError("train config: batch_size must be >= 1");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"learning_rate", c.learning_rate},
          {"final_lr_fraction", c.final_lr_fraction},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"clip_norm", c.clip_norm},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"max_mean_signal", c.max_mean_signal}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.lambda1 = j.value("lambda1", c.lambda1);
    c.lambda2 = j.value("lambda2", c.lambda2);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.final_lr_fraction = j.value("final_lr_fraction", c.final_lr_fraction);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.max_mean_signal = j.value("max_mean_signal", c.max_mean_signal);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("train config: ") + e.what());
  }
  validate(c);
  return c;
}

LossParts loss(double pred_level, double measured_level, std::span<const ComplexSignal> signals,
               const TrainConfig& cfg) {
  LossParts l;
  l.energy = (pred_level - measured_level) * (pred_level - measured_level);
  if (!signals.empty()) {
    double sum = 0.0;
    for (const auto& s : signals) sum += std::abs(s);
    l.decay = sum / static_cast<double>(signals.size());
  }
  l.total = cfg.lambda1 * l.energy + cfg.lambda2 * l.decay;
  return l;
}

const propagation::LosPointSet& LosCache::tx(const Vec3& p) {
  const Key k{p.x, p.y, p.z};
  auto it = tx_.find(k);
  if (it == tx_.end()) it = tx_.emplace(k, propagation::sample_los_points(*grid_, p, propagation::Role::kTx, render_)).first;
  return it->second;
}

const propagation::LosPointSet& LosCache::rx(const Vec3& p) {
  const Key k{p.x, p.y, p.z};
  auto it = rx_.find(k);
  if (it == rx_.end()) it = rx_.emplace(k, propagation::sample_los_points(*grid_, p, propagation::Role::kRx, render_)).first;
  return it->second;
}

double predict_dbm(const MultipathNet& net, LosCache& cache, const scene::OccupancyGrid& grid, const Vec3& tx,
                   const Vec3& rx, const propagation::RenderConfig& render) {
  const double a = render.los_compensation ? propagation::los_alpha(tx, rx, grid, render) : 0.0;
  return propagation::level_to_dbm(predict_level(net, cache.tx(tx), cache.rx(rx), a, render), render);
}

namespace {

struct Adam {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

TrainResult train(MultipathNet& net, const fieldsim::Dataset& dataset, const scene::OccupancyGrid& grid,
                  const propagation::RenderConfig& render, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  propagation::validate(render);
  if (dataset.measurements.empty()) throw DomainError("train: dataset is empty");

  LosCache cache(grid, render);
  std::vector<PreparedSample> samples;
  samples.reserve(dataset.size());
  for (const auto& m : dataset.measurements) {
    PreparedSample s;
    s.tx = &cache.tx(m.tx);
    s.rx = &cache.rx(m.rx);
    s.alpha_los = render.los_compensation ? propagation::los_alpha(m.tx, m.rx, grid, render) : 0.0;
    s.target_level = std::clamp(propagation::dbm_to_level(m.rssi_dbm, render), 0.0, 1.0);
    samples.push_back(s);
  }

  const std::size_t n = samples.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
  const long steps_per_epoch = static_cast<long>((n + bs - 1) / bs);
  const long total_steps = std::max(1L, steps_per_epoch * cfg.epochs);
  auto& params = net.params();
  Adam adam{std::vector<double>(params.size(), 0.0), std::vector<double>(params.size(), 0.0), 0};
  std::vector<double> last_good = params;
  std::vector<double> grad(params.size(), 0.0);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(cfg.seed, 0x7261696eULL));

  TrainResult result;
  std::vector<PreparedSample> batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order.begin(), order.end());
    EpochStats stats;
    stats.epoch = epoch;
    double signal_sum = 0.0;
    std::size_t pair_sum = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      batch.clear();
      for (std::size_t k = start; k < std::min(n, start + bs); ++k) batch.push_back(samples[order[k]]);
      std::fill(grad.begin(), grad.end(), 0.0);
      BatchResult r;
      try {
        r = evaluate_batch(net, batch, cfg, render, &grad);
      } catch (const NumericFault&) {
        params = last_good;
        throw NumericFault("train: non-finite forward pass in epoch " + std::to_string(epoch) +
                           "; parameters restored to the last completed epoch");
      }
      if (!std::isfinite(r.loss.total) || !all_finite(grad)) {
        params = last_good;
        throw NumericFault("train: loss diverged in epoch " + std::to_string(epoch) +
                           "; parameters restored to the last completed epoch");
      }
      const double w = static_cast<double>(batch.size()) / static_cast<double>(n);
      stats.loss.energy += w * r.loss.energy;
      stats.loss.decay += w * r.loss.decay;
      stats.loss.total += w * r.loss.total;
      signal_sum += r.mean_signal * static_cast<double>(r.pair_count);
      pair_sum += r.pair_count;

      if (cfg.clip_norm > 0.0) {
        double norm2 = 0.0;
        for (double g : grad) norm2 += g * g;
        const double norm = std::sqrt(norm2);
        if (norm > cfg.clip_norm) {
          const double scale = cfg.clip_norm / norm;
          for (auto& g : grad) g *= scale;
        }
      }
      ++adam.step;
      const double progress = static_cast<double>(adam.step - 1) / static_cast<double>(total_steps);
      const double floor_lr = cfg.learning_rate * cfg.final_lr_fraction;
      const double lr = floor_lr + 0.5 * (cfg.learning_rate - floor_lr) * (1.0 + std::cos(std::numbers::pi * progress));
      const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(adam.step));
      const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(adam.step));
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grad[k];
        adam.m[k] = cfg.adam_beta1 * adam.m[k] + (1.0 - cfg.adam_beta1) * g;
        adam.v[k] = cfg.adam_beta2 * adam.v[k] + (1.0 - cfg.adam_beta2) * g * g;
        if (adam.m[k] == 0.0) continue;
        params[k] = detail::to_float(params[k] - lr * (adam.m[k] / c1) / (std::sqrt(adam.v[k] / c2) + cfg.adam_eps));
      }
    }
    stats.mean_signal = pair_sum ? signal_sum / static_cast<double>(pair_sum) : 0.0;
    stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!all_finite(params)) {
      params = last_good;
      throw NumericFault("train: parameters diverged in epoch " + std::to_string(epoch) +
                         "; restored to the last completed epoch");
    }
    if (stats.mean_signal > cfg.max_mean_signal) {
      params = last_good;
      throw NumericFault("train: mean |S| exceeded " + std::to_string(cfg.max_mean_signal) + " in epoch " +
                         std::to_string(epoch));
    }
    last_good = params;
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

NetConfig tiny_net_config() {
  NetConfig c;
  for (auto* e : {&c.tx_encoder, &c.rx_encoder}) {
    e->levels = 2;
    e->table_size = 1 << 8;
    e->features_per_level = 2;
    e->base_resolution = 4;
    e->finest_resolution = 16;
    // The grad_check scene padded by the default sub-range.
    e->bounds_lo = {-0.5, -0.5, -0.5};
    e->bounds_hi = {3.5, 3.0, 2.5};
  }
  c.attenuation_hidden = {16, 16};
  c.feature_dim = 8;
  c.radiance_hidden = {16};
  // Entries well above the probe step, so few ReLUs sit within reach of a kink.
  c.init_table_scale = 0.5;
  return c;
}

GradCheckReport grad_check(const MultipathNet& net_in, const propagation::RenderConfig& render, int trial_count,
                           std::uint64_t seed, BackwardFault fault) {
  const auto grid = scene::SceneBuilder({3.0, 2.5, 2.0}, 0.25).block({1.4, 0.0, 0.0}, {1.6, 1.2, 2.0}).build();
  MultipathNet net = net_in;
  TrainConfig cfg;
  cfg.lambda2 = 1e-2;
  propagation::RenderConfig r = render;
  LosCache cache(grid, r);
  const std::vector<std::pair<Vec3, Vec3>> links{
      {{0.6, 0.6, 1.0}, {2.4, 0.6, 1.1}}, {{0.6, 1.9, 1.2}, {2.3, 0.5, 0.9}}, {{2.5, 2.0, 1.0}, {2.2, 1.6, 1.3}}};
  Rng rng(seed);
  std::vector<PreparedSample> batch;
  for (const auto& [t, x] : links) {
    batch.push_back({&cache.tx(t), &cache.rx(x), r.los_compensation ? propagation::los_alpha(t, x, grid, r) : 0.0,
                     rng.uniform(0.2, 0.8)});
  }

  std::vector<double> analytic(net.params().size(), 0.0);
  evaluate_batch(net, batch, cfg, r, &analytic, fault);
  const auto f = [&]() { return evaluate_batch(net, batch, cfg, r, nullptr).loss.total; };

  // Half the probes hit table entries that take part in the batch.
  const auto L = detail::layout_of(net);
  std::vector<std::size_t> table_live;
  std::vector<std::size_t> mlp_all;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const bool in_table = (k >= L.tx_table->offset && k < L.tx_table->offset + L.tx_table->size()) ||
                          (k >= L.rx_table->offset && k < L.rx_table->offset + L.rx_table->size());
    if (in_table) {
      if (analytic[k] != 0.0) table_live.push_back(k);
    } else {
      mlp_all.push_back(k);
    }
  }

  const double h = 1e-5;
  GradCheckReport rep;
  int attempts = 0;
  while (rep.probes < trial_count && attempts < 20 * trial_count) {
    ++attempts;
    const bool use_table = !table_live.empty() && (rep.probes % 2 == 0);
    const auto& pool = use_table ? table_live : mlp_all;
    const std::size_t k = pool[rng.below(pool.size())];
    const double saved = net.params()[k];
    const double f0 = f();
    net.params()[k] = saved + h;
    const double fp = f();
    net.params()[k] = saved - h;
    const double fm = f();
    net.params()[k] = saved;
    const double numeric = (fp - fm) / (2.0 * h);
    // A ReLU or clamp kink inside [-h, h] makes the one-sided slopes disagree.
    const double right = (fp - f0) / h;
    const double left = (f0 - fm) / h;
    if (std::abs(right - left) > 0.1 * std::max({std::abs(right), std::abs(left), 1e-6})) {
      ++rep.redrawn;
      continue;
    }
    ++rep.probes;
    const double a = analytic[k];
    if (std::abs(a) < 1e-12 && std::abs(numeric) < 1e-12) {
      ++rep.skipped;
      continue;
    }
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    rep.max_rel_error = std::max(rep.max_rel_error, rel);
  }
  return rep;
}

}  // namespace radiomap::mpnet
