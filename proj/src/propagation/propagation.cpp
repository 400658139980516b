#include "radiomap/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "radiomap/errors.hpp"

namespace radiomap::propagation {

double RenderConfig::gain_at(int k) const {
  return gain.empty() ? 1.0 / k_rx : gain[static_cast<std::size_t>(k)];
}

void validate(const RenderConfig& cfg) {
  if (cfg.k_tx < 1 || cfg.k_rx < 1 || cfg.s < 1) throw DomainError("render config: ray counts must be >= 1");
  if (!(cfg.sub_range > 0.0)) throw DomainError("render config: sub_range must be positive");
  if (!(cfg.d0 > 0.0)) throw DomainError("render config: d0 must be positive");
  if (!(cfg.ref_power_dbm > cfg.noise_floor_dbm)) {
    throw DomainError("render config: ref_power_dbm must exceed noise_floor_dbm");
  }
  if (!cfg.gain.empty()) {
    if (cfg.gain.size() != static_cast<std::size_t>(cfg.k_rx)) {
      throw DomainError("render config: gain table needs k_rx entries");
    }
    double sum = 0.0;
    for (double g : cfg.gain) {
      if (!(g >= 0.0)) throw DomainError("render config: gains must be non-negative");
      sum += g;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("render config: gains must sum to 1");
  }
}

nlohmann::json to_json(const RenderConfig& cfg) {
  nlohmann::json j{{"k_tx", cfg.k_tx},
                   {"k_rx", cfg.k_rx},
                   {"s", cfg.s},
                   {"sub_range", cfg.sub_range},
                   {"d0", cfg.d0},
                   {"ref_power_dbm", cfg.ref_power_dbm},
                   {"noise_floor_dbm", cfg.noise_floor_dbm},
                   {"path_loss_exp", cfg.path_loss_exp},
                   {"los_compensation", cfg.los_compensation}};
  if (!cfg.gain.empty()) j["gain"] = cfg.gain;
  return j;
}

RenderConfig render_config_from_json(const nlohmann::json& j) {
  RenderConfig c;
  try {
    c.k_tx = j.value("k_tx", c.k_tx);
    c.k_rx = j.value("k_rx", c.k_rx);
    c.s = j.value("s", c.s);
    c.sub_range = j.value("sub_range", c.sub_range);
    c.d0 = j.value("d0", c.d0);
    c.ref_power_dbm = j.value("ref_power_dbm", c.ref_power_dbm);
    c.noise_floor_dbm = j.value("noise_floor_dbm", c.noise_floor_dbm);
    c.path_loss_exp = j.value("path_loss_exp", c.path_loss_exp);
    c.los_compensation = j.value("los_compensation", c.los_compensation);
    if (j.contains("gain")) c.gain = j["gain"].get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("render config: ") + e.what());
  }
  validate(c);
  return c;
}

std::size_t LosPointSet::rx_sample_count() const {
  std::size_t n = 0;
  for (const auto& r : rays) n += r.samples.size();
  return n;
}

LosPointSet sample_los_points(const scene::OccupancyGrid& grid, const Vec3& pos, Role role,
                              const RenderConfig& cfg) {
  validate(cfg);
  if (!grid.free_at(pos)) throw DomainError("sample_los_points: position is not in free space");
  const double max_range = (grid.upper_corner() - grid.origin()).norm();
  LosPointSet set;
  set.role = role;
  set.anchor = pos;
  const auto dirs = fibonacci_sphere(role == Role::kTx ? cfg.k_tx : cfg.k_rx);
  if (role == Role::kTx) {
    std::vector<Vec3> pts;
    for (const auto& d : dirs) {
      if (const auto hit = scene::raycast(grid, pos, d, max_range)) pts.push_back(hit->point);
    }
    if (pts.empty()) throw DegenerateScene("sample_los_points: no Tx ray hits a surface");
    std::sort(pts.begin(), pts.end(), lex_less);
    const auto alpha = direct_path_weights(pos, pts, cfg);
    for (std::size_t j = 0; j < pts.size(); ++j) set.tx_points.push_back({pts[j], alpha[j]});
    return set;
  }
  const double step = cfg.s > 1 ? cfg.sub_range / (cfg.s - 1) : cfg.sub_range;
  for (int k = 0; k < static_cast<int>(dirs.size()); ++k) {
    const auto hit = scene::raycast(grid, pos, dirs[k], max_range);
    if (!hit) continue;
    RxRay ray{dirs[k], k, {}};
    for (int i = 0; i < cfg.s; ++i) ray.samples.push_back({pos + dirs[k] * (hit->distance + step * i), step});
    set.rays.push_back(std::move(ray));
  }
  if (set.rays.empty()) throw DegenerateScene("sample_los_points: no Rx ray hits a surface");
  return set;
}

std::vector<double> direct_path_weights(const Vec3& tx, std::span<const Vec3> points, const RenderConfig& cfg) {
  if (points.empty()) throw DomainError("direct_path_weights: no points");
  std::vector<double> e(points.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    e[j] = std::pow(cfg.d0 / std::max(distance(tx, points[j]), cfg.d0), cfg.path_loss_exp);
    sum += e[j];
  }
  for (auto& v : e) v /= sum;
  return e;
}

RayWeights ray_weights(std::span<const double> sigma, std::span<const double> delta) {
  if (sigma.size() != delta.size()) throw DomainError("ray_weights: size mismatch");
  RayWeights w;
  w.transmittance.resize(sigma.size());
  w.weight.resize(sigma.size());
  double optical = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    w.transmittance[i] = std::exp(-optical);
    const double tau = sigma[i] * delta[i];
    w.weight[i] = w.transmittance[i] * -std::expm1(-tau);
    optical += tau;
  }
  return w;
}

std::vector<std::size_t> canonical_order(std::span<const TxPoint> points) {
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].pos != points[b].pos) return lex_less(points[a].pos, points[b].pos);
    return points[a].alpha < points[b].alpha;
  });
  return idx;
}

RenderResult render_rx(const LosPointSet& tx_set, const LosPointSet& rx_set, const MultipathModel& model,
                       const RenderConfig& cfg) {
  if (tx_set.tx_points.empty() || rx_set.rays.empty()) throw DomainError("render_rx: empty LOS point set");
  const auto order = canonical_order(tx_set.tx_points);
  std::vector<Vec3> tx_pos;
  std::vector<double> alpha;
  for (auto j : order) {
    tx_pos.push_back(tx_set.tx_points[j].pos);
    alpha.push_back(tx_set.tx_points[j].alpha);
  }

  RenderResult out;
  std::vector<ComplexSignal> signals;
  for (std::size_t k = 0; k < rx_set.rays.size(); ++k) {
    const auto& ray = rx_set.rays[k];
    std::vector<double> sigma;
    std::vector<double> delta;
    std::vector<ComplexSignal> s_at;
    for (std::size_t i = 0; i < ray.samples.size(); ++i) {
      const auto& smp = ray.samples[i];
      double d = 0.0;
      model.evaluate(tx_pos, smp.pos, d, signals);
      ComplexSignal acc{0.0, 0.0};
      for (std::size_t j = 0; j < signals.size(); ++j) acc += alpha[j] * signals[j];
      if (!std::isfinite(d) || !std::isfinite(acc.real()) || !std::isfinite(acc.imag())) {
        throw NumericFault("render_rx: non-finite model output at ray " + std::to_string(k) + " sample " +
                           std::to_string(i));
      }
      sigma.push_back(smp.sigma);
      delta.push_back(d);
      s_at.push_back(acc);
    }
    const auto w = ray_weights(sigma, delta);
    ComplexSignal h{0.0, 0.0};
    for (std::size_t i = 0; i < s_at.size(); ++i) h += w.weight[i] * s_at[i];
    out.per_ray.push_back(h);
    out.received += cfg.gain_at(ray.direction) * h;
  }
  out.magnitude = std::abs(out.received);
  return out;
}

double los_alpha(const Vec3& tx, const Vec3& rx, const scene::OccupancyGrid& grid, const RenderConfig& cfg) {
  if (!scene::mutually_visible(grid, tx, rx)) return 0.0;
  const double a = std::pow(cfg.d0 / std::max(distance(tx, rx), cfg.d0), cfg.path_loss_exp);
  return std::clamp(a, 0.0, 1.0);
}

double compensated_level(double multipath_mag, double alpha_los) {
  return alpha_los + (1.0 - alpha_los) * std::clamp(multipath_mag, 0.0, 1.0);
}

double level_to_dbm(double level, const RenderConfig& cfg) {
  return cfg.noise_floor_dbm + (cfg.ref_power_dbm - cfg.noise_floor_dbm) * level;
}

double dbm_to_level(double dbm, const RenderConfig& cfg) {
  return (dbm - cfg.noise_floor_dbm) / (cfg.ref_power_dbm - cfg.noise_floor_dbm);
}

double los_compensate(double multipath_mag, const Vec3& tx, const Vec3& rx, const scene::OccupancyGrid& grid,
                      const RenderConfig& cfg) {
  const double a = cfg.los_compensation ? los_alpha(tx, rx, grid, cfg) : 0.0;
  return level_to_dbm(compensated_level(multipath_mag, a), cfg);
}

double predict_rssi(const MultipathModel& model, const scene::OccupancyGrid& grid, const Vec3& tx, const Vec3& rx,
                    const RenderConfig& cfg) {
  const auto tx_set = sample_los_points(grid, tx, Role::kTx, cfg);
  const auto rx_set = sample_los_points(grid, rx, Role::kRx, cfg);
  const auto r = render_rx(tx_set, rx_set, model, cfg);
  return los_compensate(r.magnitude, tx, rx, grid, cfg);
}

Heatmap render_heatmap(const MultipathModel& model, const scene::OccupancyGrid& grid, const Vec3& tx, double z,
                       double spacing, const RenderConfig& cfg) {
  if (!(spacing > 0.0)) throw DomainError("heatmap: spacing must be positive");
  const auto tx_set = sample_los_points(grid, tx, Role::kTx, cfg);
  Heatmap map;
  const Vec3 lo = grid.origin();
  const Vec3 hi = grid.upper_corner();
  // Cell centers at (i + 0.5) * spacing, the same lattice as the survey points.
  const auto first = [&](double v) { return std::ceil(v / spacing - 0.5); };
  const auto last = [&](double v) { return std::floor(v / spacing - 0.5); };
  map.x0 = (first(lo.x) + 0.5) * spacing;
  map.y0 = (first(lo.y) + 0.5) * spacing;
  map.z = z;
  map.spacing = spacing;
  map.nx = std::max(0, static_cast<int>(last(hi.x) - first(lo.x)) + 1);
  map.ny = std::max(0, static_cast<int>(last(hi.y) - first(lo.y)) + 1);
  map.dbm.assign(static_cast<std::size_t>(map.nx) * map.ny, std::nan(""));
  for (int iy = 0; iy < map.ny; ++iy)
    for (int ix = 0; ix < map.nx; ++ix) {
      const Vec3 rx{map.x0 + ix * spacing, map.y0 + iy * spacing, z};
      if (!grid.free_at(rx) || rx == tx) continue;
      const auto rx_set = sample_los_points(grid, rx, Role::kRx, cfg);
      const auto r = render_rx(tx_set, rx_set, model, cfg);
      map.dbm[static_cast<std::size_t>(iy) * map.nx + ix] = los_compensate(r.magnitude, tx, rx, grid, cfg);
    }
  return map;
}

void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write heatmap: " + path.string());
  out << "x,y,dbm\n";
  for (int iy = 0; iy < map.ny; ++iy)
    for (int ix = 0; ix < map.nx; ++ix) {
      const double v = map.at(ix, iy);
      out << map.x0 + ix * map.spacing << ',' << map.y0 + iy * map.spacing << ',';
      if (std::isnan(v)) {
        out << "nan\n";
      } else {
        out << v << '\n';
      }
    }
}

void write_heatmap_pgm(const Heatmap& map, const RenderConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write heatmap: " + path.string());
  out << "P5\n" << map.nx << ' ' << map.ny << "\n255\n";
  for (int iy = map.ny - 1; iy >= 0; --iy)
    for (int ix = 0; ix < map.nx; ++ix) {
      const double v = map.at(ix, iy);
      const double level = std::isnan(v) ? 0.0 : std::clamp(dbm_to_level(v, cfg), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(level * 255.0))));
    }
}

}  // namespace radiomap::propagation
