#include <algorithm>
#include <atomic>
#include <cmath>

#include "radiomap/errors.hpp"
#include "radiomap/log.hpp"
#include "radiomap/mpnet.hpp"

namespace radiomap::mpnet {
namespace {

std::atomic<bool> g_clamp_warned{false};

}  // namespace

int HashEncodingParams::resolution(int level) const {
  if (levels <= 1) return base_resolution;
  const double growth = std::exp((std::log(finest_resolution) - std::log(base_resolution)) / (levels - 1));
  return static_cast<int>(std::floor(base_resolution * std::pow(growth, level) + 1e-9));
}

bool HashEncodingParams::dense(int level) const {
  const double side = resolution(level) + 1.0;
  return side * side * side <= table_size;
}

void validate(const HashEncodingParams& p) {
  if (p.levels < 1) throw DomainError("hash encoding: levels must be >= 1");
  if (p.table_size < 1 || (p.table_size & (p.table_size - 1)) != 0) {
    throw DomainError("hash encoding: table_size must be a power of two");
  }
  if (p.features_per_level < 1) throw DomainError("hash encoding: features_per_level must be >= 1");
  if (p.base_resolution < 1 || p.finest_resolution < p.base_resolution) {
    throw DomainError("hash encoding: need 1 <= base_resolution <= finest_resolution");
  }
  for (int a = 0; a < 3; ++a) {
    if (!(p.bounds_hi[a] > p.bounds_lo[a])) throw DomainError("hash encoding: empty bounds");
  }
}

std::size_t hash_index(const HashEncodingParams& p, int level, const std::array<int, 3>& c) {
  if (p.dense(level)) {
    const std::size_t side = static_cast<std::size_t>(p.resolution(level)) + 1;
    return static_cast<std::size_t>(c[0]) + side * (static_cast<std::size_t>(c[1]) + side * c[2]);
  }
  const std::uint32_t h = static_cast<std::uint32_t>(c[0]) ^ (static_cast<std::uint32_t>(c[1]) * 2654435761u) ^
                          (static_cast<std::uint32_t>(c[2]) * 805459861u);
  return h & static_cast<std::uint32_t>(p.table_size - 1);
}

Vec3 lattice_position(const HashEncodingParams& p, int level, const Vec3& pos) {
  const Vec3 span = p.bounds_hi - p.bounds_lo;
  const double scale = std::max({span.x, span.y, span.z});
  const double res = p.resolution(level);
  Vec3 u;
  bool clamped = false;
  for (int a = 0; a < 3; ++a) {
    double v = (pos[a] - p.bounds_lo[a]) / scale;
    const double hi = span[a] / scale;
    if (v < 0.0 || v > hi) {
      clamped = true;
      v = std::clamp(v, 0.0, hi);
    }
    u[a] = v * res;
  }
  if (clamped && !g_clamp_warned.exchange(true)) {
    log::warn("hash encoding: position (", pos.x, ", ", pos.y, ", ", pos.z, ") outside bounds; clamped");
  }
  return u;
}

void encode_position(const HashEncodingParams& p, std::span<const double> table, const Vec3& pos,
                     std::span<double> out, EncodeTrace* trace) {
  const int F = p.features_per_level;
  if (trace) {
    trace->index.resize(static_cast<std::size_t>(p.levels) * 8);
    trace->weight.resize(static_cast<std::size_t>(p.levels) * 8);
  }
  for (int l = 0; l < p.levels; ++l) {
    const Vec3 u = lattice_position(p, l, pos);
    const int res = p.resolution(l);
    std::array<int, 3> base{};
    std::array<double, 3> frac{};
    for (int a = 0; a < 3; ++a) {
      int c = static_cast<int>(std::floor(u[a]));
      c = std::clamp(c, 0, std::max(0, res - 1));
      base[a] = c;
      frac[a] = u[a] - c;
    }
    double* o = out.data() + static_cast<std::ptrdiff_t>(l) * F;
    for (int f = 0; f < F; ++f) o[f] = 0.0;
    const std::size_t level_offset = static_cast<std::size_t>(l) * p.table_size;
    for (int corner = 0; corner < 8; ++corner) {
      std::array<int, 3> c{};
      double w = 1.0;
      for (int a = 0; a < 3; ++a) {
        const int bit = (corner >> a) & 1;
        c[a] = base[a] + bit;
        w *= bit ? frac[a] : 1.0 - frac[a];
      }
      const std::size_t entry = level_offset + hash_index(p, l, c);
      const double* t = table.data() + entry * F;
      for (int f = 0; f < F; ++f) o[f] += w * t[f];
      if (trace) {
        trace->index[static_cast<std::size_t>(l) * 8 + corner] = static_cast<std::uint32_t>(entry);
        trace->weight[static_cast<std::size_t>(l) * 8 + corner] = w;
      }
    }
  }
}

}  // namespace radiomap::mpnet
