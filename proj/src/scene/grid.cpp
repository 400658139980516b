#include <algorithm>
#include <cmath>

#include "radiomap/errors.hpp"
#include "radiomap/scene.hpp"

namespace radiomap::scene {

OccupancyGrid::OccupancyGrid(std::array<int, 3> dims, double resolution, Vec3 origin)
    : OccupancyGrid(dims, resolution, origin, {}) {}

OccupancyGrid::OccupancyGrid(std::array<int, 3> dims, double resolution, Vec3 origin,
                             std::vector<std::uint8_t> occupancy)
    : dims_(dims), resolution_(resolution), origin_(origin), occupancy_(std::move(occupancy)) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw DomainError("grid resolution must be positive and finite");
  }
  if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) throw DomainError("grid dims must be >= 1");
  if (!origin.is_finite()) throw DomainError("grid origin must be finite");
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (occupancy_.empty()) {
    occupancy_.assign(n, 0);
  } else if (occupancy_.size() != n) {
    throw StructuralError("occupancy length " + std::to_string(occupancy_.size()) +
                          " does not match dims product " + std::to_string(n));
  }
}

Vec3 OccupancyGrid::upper_corner() const {
  return origin_ + Vec3{dims_[0] * resolution_, dims_[1] * resolution_, dims_[2] * resolution_};
}

bool OccupancyGrid::contains(const Vec3& p) const {
  if (!p.is_finite()) return false;
  return in_bounds(voxel_of(p));
}

VoxelIndex OccupancyGrid::unlinear(std::size_t idx) const {
  const auto nx = static_cast<std::size_t>(dims_[0]);
  const auto ny = static_cast<std::size_t>(dims_[1]);
  return {static_cast<int>(idx % nx), static_cast<int>((idx / nx) % ny),
          static_cast<int>(idx / (nx * ny))};
}

VoxelIndex OccupancyGrid::voxel_of(const Vec3& p) const {
  const auto cell = [&](double v, double o) {
    const double f = std::floor((v - o) / resolution_);
    return static_cast<int>(std::clamp(f, -1.0e9, 1.0e9));
  };
  return {cell(p.x, origin_.x), cell(p.y, origin_.y), cell(p.z, origin_.z)};
}

Vec3 OccupancyGrid::center_of(const VoxelIndex& v) const {
  return origin_ + Vec3{(v.i + 0.5) * resolution_, (v.j + 0.5) * resolution_,
                        (v.k + 0.5) * resolution_};
}

bool OccupancyGrid::occupied_at(const Vec3& p) const {
  return p.is_finite() && occupied(voxel_of(p));
}

bool OccupancyGrid::free_at(const Vec3& p) const {
  if (!p.is_finite()) return false;
  const auto v = voxel_of(p);
  return in_bounds(v) && occupancy_[linear(v)] == 0;
}

void OccupancyGrid::set(const VoxelIndex& v, bool value) {
  if (!in_bounds(v)) throw DomainError("voxel index out of bounds");
  occupancy_[linear(v)] = value ? 1 : 0;
}

void OccupancyGrid::fill_box(const Vec3& lo, const Vec3& hi, bool value) {
  for (int k = 0; k < dims_[2]; ++k) {
    for (int j = 0; j < dims_[1]; ++j) {
      for (int i = 0; i < dims_[0]; ++i) {
        const Vec3 c = center_of({i, j, k});
        if (c.x >= lo.x && c.x <= hi.x && c.y >= lo.y && c.y <= hi.y && c.z >= lo.z &&
            c.z <= hi.z) {
          occupancy_[linear({i, j, k})] = value ? 1 : 0;
        }
      }
    }
  }
}

std::size_t OccupancyGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupancy_.begin(), occupancy_.end(), 1));
}

Vec3 OccupancyGrid::outward_normal(const VoxelIndex& v) const {
  static constexpr int kOffsets[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  Vec3 n;
  for (const auto& o : kOffsets) {
    const VoxelIndex nb{v.i + o[0], v.j + o[1], v.k + o[2]};
    if (in_bounds(nb) && !occupied(nb)) n += Vec3{double(o[0]), double(o[1]), double(o[2])};
  }
  return n.normalized();
}

std::vector<VoxelIndex> extract_surface_voxels(const OccupancyGrid& grid) {
  static constexpr int kOffsets[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                         {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  std::vector<VoxelIndex> out;
  const auto& d = grid.dims();
  for (int k = 0; k < d[2]; ++k) {
    for (int j = 0; j < d[1]; ++j) {
      for (int i = 0; i < d[0]; ++i) {
        const VoxelIndex v{i, j, k};
        if (!grid.occupied(v)) continue;
        for (const auto& o : kOffsets) {
          const VoxelIndex nb{i + o[0], j + o[1], k + o[2]};
          if (grid.in_bounds(nb) && !grid.occupied(nb)) {
            out.push_back(v);
            break;
          }
        }
      }
    }
  }
  return out;
}

OccupancyGrid voxelize_point_cloud(std::span<const Vec3> points, double resolution) {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) {
    throw DomainError("voxelize: resolution must be positive");
  }
  if (points.empty()) throw DomainError("voxelize: point cloud is empty");
  Vec3 lo = points[0];
  Vec3 hi = points[0];
  for (std::size_t n = 0; n < points.size(); ++n) {
    const Vec3& p = points[n];
    if (!p.is_finite()) throw DomainError("voxelize: non-finite point at index " + std::to_string(n));
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  }
  std::array<int, 3> spanned{};
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) {
    spanned[a] = std::max(1, static_cast<int>(std::ceil((hi[a] - lo[a]) / resolution - 1e-9)));
    dims[a] = spanned[a] + 2;
  }
  const Vec3 origin = lo - Vec3{resolution, resolution, resolution};
  OccupancyGrid grid(dims, resolution, origin);
  for (const Vec3& p : points) {
    int idx[3];
    for (int a = 0; a < 3; ++a) {
      const int c = 1 + static_cast<int>(std::floor((p[a] - lo[a]) / resolution));
      idx[a] = std::clamp(c, 1, spanned[a]);
    }
    grid.set({idx[0], idx[1], idx[2]}, true);
  }
  return grid;
}

}  // namespace radiomap::scene
