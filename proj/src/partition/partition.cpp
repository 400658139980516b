#include "radiomap/partition.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "radiomap/errors.hpp"
#include "radiomap/log.hpp"
#include "radiomap/random.hpp"

namespace radiomap::partition {
namespace {

using scene::OccupancyGrid;

constexpr int kFaceOffsets[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                    {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};

Vec3 mean_center(const OccupancyGrid& grid, std::span<const VoxelIndex> voxels) {
  Vec3 sum;
  for (const auto& v : voxels) sum += grid.center_of(v);
  return sum / static_cast<double>(voxels.size());
}

/// Center of the member voxel closest to the centroid; the centroid itself can fall
/// inside solid material for curved or wrapped patches.
SurfacePatch make_patch(const OccupancyGrid& grid, std::vector<VoxelIndex> voxels, const Vec3& mean) {
  Vec3 best = grid.center_of(voxels.front());
  double best_d = (best - mean).squared_norm();
  for (const auto& v : voxels) {
    const Vec3 c = grid.center_of(v);
    const double d = (c - mean).squared_norm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return {std::move(voxels), best};
}

/// 6-connected components of `voxels`, each sorted by linear index, ordered by first voxel.
std::vector<std::vector<VoxelIndex>> components(const OccupancyGrid& grid,
                                                std::span<const VoxelIndex> voxels) {
  std::vector<std::size_t> order(voxels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return grid.linear(voxels[a]) < grid.linear(voxels[b]);
  });
  std::vector<std::size_t> sorted_lin(voxels.size());
  for (std::size_t n = 0; n < order.size(); ++n) sorted_lin[n] = grid.linear(voxels[order[n]]);
  const auto slot_of = [&](const VoxelIndex& v) -> std::ptrdiff_t {
    if (!grid.in_bounds(v)) return -1;
    const auto lin = grid.linear(v);
    const auto it = std::lower_bound(sorted_lin.begin(), sorted_lin.end(), lin);
    if (it == sorted_lin.end() || *it != lin) return -1;
    return it - sorted_lin.begin();
  };

  std::vector<char> seen(voxels.size(), 0);
  std::vector<std::vector<VoxelIndex>> out;
  for (std::size_t s = 0; s < sorted_lin.size(); ++s) {
    if (seen[s]) continue;
    std::vector<VoxelIndex> comp;
    std::deque<std::size_t> queue{s};
    seen[s] = 1;
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      const VoxelIndex v = voxels[order[cur]];
      comp.push_back(v);
      for (const auto& o : kFaceOffsets) {
        const auto nb = slot_of({v.i + o[0], v.j + o[1], v.k + o[2]});
        if (nb >= 0 && !seen[static_cast<std::size_t>(nb)]) {
          seen[static_cast<std::size_t>(nb)] = 1;
          queue.push_back(static_cast<std::size_t>(nb));
        }
      }
    }
    std::sort(comp.begin(), comp.end(),
              [&](const VoxelIndex& a, const VoxelIndex& b) { return grid.linear(a) < grid.linear(b); });
    out.push_back(std::move(comp));
  }
  return out;
}

void split_recursive(const OccupancyGrid& grid, std::vector<VoxelIndex> voxels, double max_extent,
                     std::vector<SurfacePatch>& out) {
  const Vec3 mean = mean_center(grid, voxels);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& v : voxels) {
    const Vec3 d = grid.center_of(v) - mean;
    const Eigen::Vector3d e(d.x, d.y, d.z);
    cov += e * e.transpose();
  }
  cov /= static_cast<double>(voxels.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d evals = solver.eigenvalues();  // ascending
  // Tied leading eigenvalues leave the principal axis undefined; use the longest
  // bounding-box extent instead.
  const bool tied = evals(2) - evals(1) <= 1e-9 * std::max(evals(2), 1e-300);
  Vec3 axis;
  if (tied) {
    Vec3 bmin = grid.center_of(voxels.front());
    Vec3 bmax = bmin;
    for (const auto& v : voxels) {
      const Vec3 c = grid.center_of(v);
      for (int a = 0; a < 3; ++a) {
        bmin[a] = std::min(bmin[a], c[a]);
        bmax[a] = std::max(bmax[a], c[a]);
      }
    }
    int longest = 0;
    for (int a = 1; a < 3; ++a)
      if (bmax[a] - bmin[a] > bmax[longest] - bmin[longest]) longest = a;
    axis[longest] = 1.0;
  } else {
    const Eigen::Vector3d e = solver.eigenvectors().col(2);
    axis = {e.x(), e.y(), e.z()};
  }

  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& v : voxels) {
    const double p = (grid.center_of(v) - mean).dot(axis);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  if (hi - lo <= max_extent) {
    out.push_back(make_patch(grid, std::move(voxels), mean));
    return;
  }

  std::vector<VoxelIndex> left;
  std::vector<VoxelIndex> right;
  for (const auto& v : voxels) ((grid.center_of(v) - mean).dot(axis) < 0.0 ? left : right).push_back(v);
  if (left.empty() || right.empty()) {
    out.push_back(make_patch(grid, std::move(voxels), mean));
    return;
  }
  for (auto* half : {&left, &right}) {
    for (auto& comp : components(grid, *half)) split_recursive(grid, std::move(comp), max_extent, out);
  }
}

}  // namespace

std::size_t Partition::patch_count() const {
  std::size_t n = 0;
  for (const auto& r : regions) n += r.patches.size();
  return n;
}

std::vector<SurfacePatch> segment_surfaces(std::span<const VoxelIndex> surface,
                                           const OccupancyGrid& grid, double max_extent) {
  if (!(max_extent > grid.resolution())) {
    throw DomainError("segment_surfaces: max_extent must exceed the grid resolution");
  }
  std::vector<SurfacePatch> out;
  for (auto& comp : components(grid, surface)) split_recursive(grid, std::move(comp), max_extent, out);
  std::sort(out.begin(), out.end(), [&](const SurfacePatch& a, const SurfacePatch& b) {
    return grid.linear(a.voxels.front()) < grid.linear(b.voxels.front());
  });
  return out;
}

Partition cluster_regions(std::span<const SurfacePatch> patches, const OccupancyGrid& grid, double D,
                          std::uint64_t seed) {
  if (patches.empty()) throw DomainError("cluster_regions: no patches");
  if (!(D > 0.0)) throw DomainError("cluster_regions: D must be positive");
  const std::size_t n = patches.size();

  // Lazily filled visibility cache: -1 unknown, 0 blocked, 1 visible.
  std::vector<signed char> vis(n * n, -1);
  const auto visible = [&](std::size_t a, std::size_t b) {
    auto& slot = vis[std::min(a, b) * n + std::max(a, b)];
    if (slot < 0) {
      slot = scene::mutually_visible(grid, patches[a].representative, patches[b].representative) ? 1 : 0;
    }
    return slot == 1;
  };

  std::vector<char> clustered(n, 0);
  std::size_t remaining = n;
  Partition partition;
  partition.D = D;
  Rng rng(seed);
  std::size_t next_seed = static_cast<std::size_t>(rng.below(n));

  while (remaining > 0) {
    std::vector<std::size_t> members{next_seed};
    clustered[next_seed] = 1;
    --remaining;
    Vec3 center = patches[next_seed].representative;

    while (remaining > 0) {
      std::vector<std::size_t> candidates;
      for (std::size_t c = 0; c < n; ++c)
        if (!clustered[c]) candidates.push_back(c);
      std::vector<double> dist(n, 0.0);
      for (auto c : candidates) dist[c] = distance(patches[c].representative, center);
      std::stable_sort(candidates.begin(), candidates.end(),
                       [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
      bool admitted = false;
      for (auto c : candidates) {
        if (!(dist[c] < D)) break;
        const bool sees_all =
            std::all_of(members.begin(), members.end(), [&](std::size_t m) { return visible(c, m); });
        if (!sees_all) continue;
        members.push_back(c);
        clustered[c] = 1;
        --remaining;
        Vec3 sum;
        for (auto m : members) sum += patches[m].representative;
        center = sum / static_cast<double>(members.size());
        admitted = true;
        break;
      }
      if (!admitted) break;
    }

    Region region;
    region.id = static_cast<int>(partition.regions.size());
    region.center = center;
    for (auto m : members) region.patches.push_back(patches[m]);
    partition.regions.push_back(std::move(region));

    if (remaining > 0) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n; ++c) {
        if (clustered[c]) continue;
        const double d = distance(patches[c].representative, center);
        if (d < best) {
          best = d;
          next_seed = c;
        }
      }
    }
  }
  log::debug("cluster_regions: ", n, " patches -> ", partition.regions.size(), " regions");
  return partition;
}

Partition partition_scene(const OccupancyGrid& grid, const PartitionParams& params) {
  const auto surface = scene::extract_surface_voxels(grid);
  if (surface.empty()) throw DegenerateScene("scene has no surface voxels");
  const auto patches = segment_surfaces(surface, grid, params.max_extent);
  return cluster_regions(patches, grid, params.D, params.seed);
}

std::vector<std::vector<Vec3>> all_region_waypoints(const Partition& partition,
                                                    const OccupancyGrid& grid,
                                                    const WaypointParams& params) {
  if (!(params.spacing > 0.0)) throw DomainError("region_waypoints: spacing must be positive");
  const std::size_t m = partition.regions.size();
  std::vector<std::vector<Vec3>> out(m);

  // Flattened surface voxel centers tagged with their region.
  std::vector<Vec3> surf;
  std::vector<int> surf_region;
  for (const auto& r : partition.regions) {
    for (const auto& p : r.patches) {
      for (const auto& v : p.voxels) {
        surf.push_back(grid.center_of(v));
        surf_region.push_back(r.id);
      }
    }
  }

  const Vec3 lo = grid.origin();
  const Vec3 hi = grid.upper_corner();
  const auto first = [&](double lower) { return static_cast<long>(std::ceil(lower / params.spacing - 0.5)); };
  const auto last = [&](double upper) { return static_cast<long>(std::floor(upper / params.spacing - 0.5)); };
  if (grid.contains({lo.x, lo.y, params.height})) {
    for (long iy = first(lo.y); iy <= last(hi.y); ++iy) {
      for (long ix = first(lo.x); ix <= last(hi.x); ++ix) {
        const Vec3 p{(ix + 0.5) * params.spacing, (iy + 0.5) * params.spacing, params.height};
        if (!grid.free_at(p)) continue;
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < surf.size(); ++s) {
          const double d = (surf[s] - p).squared_norm();
          if (d < best_d) {
            best_d = d;
            best = s;
          }
        }
        if (surf.empty()) continue;
        const auto& region = partition.regions[static_cast<std::size_t>(surf_region[best])];
        const bool sees = std::any_of(region.patches.begin(), region.patches.end(), [&](const SurfacePatch& sp) {
          return scene::mutually_visible(grid, p, sp.representative);
        });
        if (sees) out[static_cast<std::size_t>(region.id)].push_back(p);
      }
    }
  }

  for (std::size_t r = 0; r < m; ++r) {
    if (!out[r].empty()) continue;
    const auto& region = partition.regions[r];
    // Fallback: free voxel centers nearest the region center, waypoint layer first.
    std::vector<std::pair<double, Vec3>> cands;
    const auto& d = grid.dims();
    for (int k = 0; k < d[2]; ++k)
      for (int j = 0; j < d[1]; ++j)
        for (int i = 0; i < d[0]; ++i) {
          if (grid.occupied({i, j, k})) continue;
          const Vec3 c = grid.center_of({i, j, k});
          const bool same_layer = std::abs(c.z - params.height) <= 0.5 * grid.resolution();
          cands.emplace_back(distance(c, region.center) + (same_layer ? 0.0 : 1e6), c);
        }
    std::stable_sort(cands.begin(), cands.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [score, c] : cands) {
      const bool sees = std::any_of(region.patches.begin(), region.patches.end(), [&](const SurfacePatch& sp) {
        return scene::mutually_visible(grid, c, sp.representative);
      });
      if (sees) {
        out[r].push_back(c);
        break;
      }
    }
    if (out[r].empty()) {
      throw EmptyRegion("region " + std::to_string(r) + " has no reachable free space");
    }
  }
  return out;
}

std::vector<Vec3> region_waypoints(const Partition& partition, int region, const OccupancyGrid& grid,
                                   const WaypointParams& params) {
  if (region < 0 || static_cast<std::size_t>(region) >= partition.regions.size()) {
    throw DomainError("region_waypoints: unknown region id " + std::to_string(region));
  }
  auto all = all_region_waypoints(partition, grid, params);
  return std::move(all[static_cast<std::size_t>(region)]);
}

}  // namespace radiomap::partition
