#include <bit>
#include <cmath>
#include <numbers>

#include "radiomap/errors.hpp"
#include "radiomap/fieldsim.hpp"
#include "radiomap/random.hpp"

namespace radiomap::fieldsim {
namespace {

std::uint64_t hash_point(std::uint64_t seed, const Vec3& p) {
  std::uint64_t h = seed;
  for (int a = 0; a < 3; ++a) h = mix_seed(h, std::bit_cast<std::uint64_t>(p[a] + 0.0));
  return h;
}

}  // namespace

void validate(const OracleParams& p) {
  if (!(p.ref_power_dbm > p.noise_floor_dbm)) throw DomainError("oracle: ref_power_dbm must exceed noise_floor_dbm");
  if (!(p.d0 > 0.0)) throw DomainError("oracle: d0 must be positive");
  if (!(p.reflection_coeff > 0.0 && p.reflection_coeff <= 1.0)) {
    throw DomainError("oracle: reflection_coeff must lie in (0, 1]");
  }
  if (p.max_bounces < 0) throw DomainError("oracle: max_bounces must be non-negative");
  if (p.ray_count < 1) throw DomainError("oracle: ray_count must be positive");
  if (!(p.capture_radius > 0.0)) throw DomainError("oracle: capture_radius must be positive");
  if (!(p.noise_sigma_dbm >= 0.0)) throw DomainError("oracle: noise_sigma_dbm must be non-negative");
}

nlohmann::json to_json(const OracleParams& p) {
  return {{"ref_power_dbm", p.ref_power_dbm},       {"d0", p.d0},
          {"path_loss_exp", p.path_loss_exp},       {"reflection_coeff", p.reflection_coeff},
          {"max_bounces", p.max_bounces},           {"noise_floor_dbm", p.noise_floor_dbm},
          {"noise_sigma_dbm", p.noise_sigma_dbm},   {"capture_radius", p.capture_radius},
          {"ray_count", p.ray_count},               {"seed", p.seed}};
}

OracleParams oracle_params_from_json(const nlohmann::json& j) {
  OracleParams p;
  try {
    p.ref_power_dbm = j.value("ref_power_dbm", p.ref_power_dbm);
    p.d0 = j.value("d0", p.d0);
    p.path_loss_exp = j.value("path_loss_exp", p.path_loss_exp);
    p.reflection_coeff = j.value("reflection_coeff", p.reflection_coeff);
    p.max_bounces = j.value("max_bounces", p.max_bounces);
    p.noise_floor_dbm = j.value("noise_floor_dbm", p.noise_floor_dbm);
    p.noise_sigma_dbm = j.value("noise_sigma_dbm", p.noise_sigma_dbm);
    p.capture_radius = j.value("capture_radius", p.capture_radius);
    p.ray_count = j.value("ray_count", p.ray_count);
    p.seed = j.value("seed", p.seed);
  } catch (const nlohmann::json::exception& e) {
    throw MalformedInput(std::string("oracle parameters: ") + e.what());
  }
  validate(p);
  return p;
}

OracleField::OracleField(const scene::OccupancyGrid& grid, const OracleParams& params, const Vec3& tx)
    : grid_(&grid), params_(params), tx_(tx) {
  validate(params);
  if (!grid.free_at(tx)) throw DomainError("oracle: tx is not in free space");
  if (params.max_bounces == 0) return;
  const Vec3 span = grid.upper_corner() - grid.origin();
  const double max_dist = span.norm() + grid.resolution();
  const double nudge = 1e-6 * grid.resolution();
  for (const Vec3& d0 : fibonacci_sphere(params.ray_count)) {
    Vec3 origin = tx;
    Vec3 dir = d0;
    double offset = 0.0;
    for (int b = 0; b <= params.max_bounces; ++b) {
      const auto hit = scene::raycast(grid, origin, dir, max_dist);
      const double len = hit ? hit->distance : max_dist;
      // The unreflected leg is the direct path, which is added analytically.
      if (b > 0) segments_.push_back({origin, dir, len, offset, b});
      if (!hit || hit->face_normal.squared_norm() == 0.0) break;
      const Vec3& n = hit->face_normal;
      dir = (dir - n * (2.0 * dir.dot(n))).normalized();
      origin = hit->point + n * nudge;
      offset += len;
      if (!grid.contains(origin) || grid.occupied_at(origin)) break;
    }
  }
}

double OracleField::power_mw(const Vec3& rx) const {
  const double p0 = std::pow(10.0, params_.ref_power_dbm / 10.0);
  const auto path_power = [&](double len) {
    return p0 * std::pow(params_.d0 / std::max(len, 1e-3 * params_.d0), params_.path_loss_exp);
  };
  double total = 0.0;
  if (scene::segment_clear(*grid_, tx_, rx)) total += path_power(distance(tx_, rx));

  const double spread = std::sqrt(4.0 * std::numbers::pi / params_.ray_count);
  const double rho2 = params_.reflection_coeff * params_.reflection_coeff;
  for (const auto& s : segments_) {
    const double t = (rx - s.origin).dot(s.dir);
    if (t < 0.0 || t > s.length) continue;
    const double len = s.offset + t;
    const double r_eff = std::max(params_.capture_radius, len * spread);
    const Vec3 closest = s.origin + s.dir * t;
    if ((rx - closest).squared_norm() > r_eff * r_eff) continue;
    // Each captured ray stands for the fraction of the wavefront within r_eff.
    const double weight = 4.0 * len * len / (params_.ray_count * r_eff * r_eff);
    total += weight * path_power(len) * std::pow(rho2, s.bounces);
  }
  return total;
}

double OracleField::rssi(const Vec3& rx) const {
  if (!grid_->free_at(rx)) throw DomainError("oracle: rx is not in free space");
  if (rx == tx_) throw DomainError("oracle: rx coincides with tx");
  const double mw = power_mw(rx);
  double dbm = mw > 0.0 ? 10.0 * std::log10(mw) : params_.noise_floor_dbm;
  if (params_.noise_sigma_dbm > 0.0) {
    Rng rng(hash_point(hash_point(params_.seed, tx_), rx));
    dbm += params_.noise_sigma_dbm * rng.normal();
  }
  return std::max(dbm, params_.noise_floor_dbm);
}

double oracle_rssi(const scene::OccupancyGrid& grid, const OracleParams& params, const Vec3& tx,
                   const Vec3& rx) {
  if (!grid.free_at(rx)) throw DomainError("oracle: rx is not in free space");
  return OracleField(grid, params, tx).rssi(rx);
}

}  // namespace radiomap::fieldsim
