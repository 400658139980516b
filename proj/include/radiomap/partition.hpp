#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "radiomap/scene.hpp"

namespace radiomap::partition {

/// A 6-connected piece of scene surface. The representative is the center of the
/// member voxel nearest the patch centroid.
struct SurfacePatch {
  std::vector<VoxelIndex> voxels;
  Vec3 representative;
};

/// Patches whose representatives are pairwise mutually visible.
struct Region {
  int id = 0;
  std::vector<SurfacePatch> patches;
  Vec3 center;
};

struct Partition {
  std::vector<Region> regions;
  double D = 0.0;

  [[nodiscard]] std::size_t size() const { return regions.size(); }
  [[nodiscard]] std::size_t patch_count() const;
};

struct PartitionParams {
  double max_extent = 4.0;
  double D = 8.0;
  std::uint64_t seed = 7;
};

struct WaypointParams {
  double spacing = 1.0;
  /// World z of the waypoint lattice (antenna height).
  double height = 1.25;
};

/// Connected components of `surface`, recursively split along the principal axis
/// until each spans at most `max_extent` along it. Output is ordered by each patch's
/// smallest voxel (linear index), so it does not depend on eigenvector signs.
std::vector<SurfacePatch> segment_surfaces(std::span<const VoxelIndex> surface,
                                           const scene::OccupancyGrid& grid, double max_extent);

/// Greedy visibility clustering of patch representatives. The first cluster is seeded
/// from `seed`; each later cluster starts at the unclustered point nearest the previous
/// cluster's center. Candidates are tried nearest-first and admitted iff they are
/// within D of the current center and visible from every current member.
Partition cluster_regions(std::span<const SurfacePatch> patches, const scene::OccupancyGrid& grid,
                          double D, std::uint64_t seed);

/// extract_surface_voxels -> segment_surfaces -> cluster_regions.
Partition partition_scene(const scene::OccupancyGrid& grid, const PartitionParams& params);

/// Free lattice points at params.height whose nearest surface patch belongs to the
/// region and which see at least one of its representatives. Falls back to the free
/// voxel nearest the region center; throws EmptyRegion when none exists.
std::vector<Vec3> region_waypoints(const Partition& partition, int region,
                                   const scene::OccupancyGrid& grid, const WaypointParams& params);

/// region_waypoints for every region, sharing the nearest-patch computation.
std::vector<std::vector<Vec3>> all_region_waypoints(const Partition& partition,
                                                    const scene::OccupancyGrid& grid,
                                                    const WaypointParams& params);

}  // namespace radiomap::partition
