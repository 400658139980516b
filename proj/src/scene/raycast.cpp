#include <algorithm>
#include <cmath>
#include <limits>

#include "radiomap/errors.hpp"
#include "radiomap/scene.hpp"

namespace radiomap::scene {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Incremental voxel walk along origin + t*dir. `visit(voxel, t_enter, axis, step)` is
/// called for every voxel entered (the start voxel with axis = -1) and returns true to stop.
template <typename Visit>
void traverse(const OccupancyGrid& grid, const Vec3& origin, const Vec3& dir, double max_t,
              Visit&& visit) {
  const double res = grid.resolution();
  const Vec3& o = grid.origin();
  VoxelIndex v = grid.voxel_of(origin);
  int cur[3] = {v.i, v.j, v.k};
  int step[3];
  double t_max[3];
  double t_delta[3];
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 0.0) {
      step[a] = 1;
      t_max[a] = (o[a] + (cur[a] + 1) * res - origin[a]) / dir[a];
      t_delta[a] = res / dir[a];
    } else if (dir[a] < 0.0) {
      step[a] = -1;
      t_max[a] = (o[a] + cur[a] * res - origin[a]) / dir[a];
      t_delta[a] = -res / dir[a];
    } else {
      step[a] = 0;
      t_max[a] = kInf;
      t_delta[a] = kInf;
    }
    t_max[a] = std::max(t_max[a], 0.0);
  }
  if (visit(VoxelIndex{cur[0], cur[1], cur[2]}, 0.0, -1, 0)) return;
  while (true) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    const double t = t_max[axis];
    if (!(t <= max_t)) return;
    cur[axis] += step[axis];
    const VoxelIndex next{cur[0], cur[1], cur[2]};
    if (!grid.in_bounds(next)) return;
    t_max[axis] += t_delta[axis];
    if (visit(next, t, axis, step[axis])) return;
  }
}

void check_direction(const Vec3& dir) {
  if (!dir.is_finite() || std::abs(dir.norm() - 1.0) > 1e-9) {
    throw DomainError("raycast: direction must be unit length");
  }
}

}  // namespace

std::optional<Hit> raycast(const OccupancyGrid& grid, const Vec3& origin, const Vec3& dir,
                           double max_dist) {
  check_direction(dir);
  if (!grid.contains(origin)) throw DomainError("raycast: origin outside grid bounds");
  std::optional<Hit> hit;
  traverse(grid, origin, dir, max_dist, [&](const VoxelIndex& v, double t, int axis, int step) {
    if (!grid.occupied(v)) return false;
    Vec3 normal;
    if (axis >= 0) normal[axis] = -static_cast<double>(step);
    hit = Hit{origin + dir * t, t, v, normal};
    return true;
  });
  return hit;
}

bool segment_clear(const OccupancyGrid& grid, const Vec3& a, const Vec3& b,
                   std::span<const VoxelIndex> ignore) {
  if (!grid.contains(a) || !grid.contains(b)) {
    throw DomainError("visibility: endpoint outside grid bounds");
  }
  // Walk from the lexicographically smaller endpoint so the answer is symmetric.
  const bool swap = lex_less(b, a);
  const Vec3& from = swap ? b : a;
  const Vec3& to = swap ? a : b;
  const Vec3 delta = to - from;
  const double len = delta.norm();
  const auto ignored = [&](const VoxelIndex& v) {
    return std::find(ignore.begin(), ignore.end(), v) != ignore.end();
  };
  if (len == 0.0) {
    const VoxelIndex v = grid.voxel_of(from);
    return !grid.occupied(v) || ignored(v);
  }
  const Vec3 dir = delta / len;
  bool clear = true;
  traverse(grid, from, dir, len, [&](const VoxelIndex& v, double t, int, int) {
    if (t >= len) return true;
    if (grid.occupied(v) && !ignored(v)) {
      clear = false;
      return true;
    }
    return false;
  });
  return clear;
}

bool mutually_visible(const OccupancyGrid& grid, const Vec3& a, const Vec3& b) {
  if (!grid.contains(a) || !grid.contains(b)) {
    throw DomainError("visibility: endpoint outside grid bounds");
  }
  if (a == b) return true;
  VoxelIndex ignore[2];
  std::size_t n_ignore = 0;
  const double offset = 0.5 * grid.resolution() + 1e-6;
  // An endpoint's own voxel is ignored only when the offset does not leave it
  // (interior voxels, or edge voxels whose diagonal normal stays inside).
  const auto lift = [&](const Vec3& p) {
    const VoxelIndex v = grid.voxel_of(p);
    if (!grid.occupied(v)) return p;
    const Vec3 n = grid.outward_normal(v);
    Vec3 q = p + n * offset;
    if (!grid.contains(q)) q = p;
    if (grid.voxel_of(q) == v) ignore[n_ignore++] = v;
    return q;
  };
  const Vec3 pa = lift(a);
  const Vec3 pb = lift(b);
  return segment_clear(grid, pa, pb, std::span<const VoxelIndex>(ignore, n_ignore));
}

}  // namespace radiomap::scene
