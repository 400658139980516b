#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "radiomap/scene.hpp"

namespace radiomap::scene {

/// Builds enclosed synthetic scenes: the interior box [0, extent] is free and wrapped
/// in a one-voxel occupied shell; walls are added and doors carved afterwards.
class SceneBuilder {
 public:
  SceneBuilder(Vec3 extent, double resolution);

  /// Occupies voxels whose centers lie in [lo, hi].
  SceneBuilder& block(const Vec3& lo, const Vec3& hi);
  /// Frees voxels whose centers lie in [lo, hi] (never the outer shell).
  SceneBuilder& carve(const Vec3& lo, const Vec3& hi);

  [[nodiscard]] OccupancyGrid build() const { return grid_; }

 private:
  Vec3 extent_;
  OccupancyGrid grid_;
};

OccupancyGrid make_closed_room(Vec3 extent, double resolution = kDefaultResolution);

/// Two rooms split by a full-height wall without openings.
OccupancyGrid make_two_rooms(double resolution = kDefaultResolution);

/// L-shaped corridor; arms longer than the corner sightline.
OccupancyGrid make_l_corridor(double resolution = kDefaultResolution);

/// Desk-scale scene of about 20 x 10 x 3 m: a corridor along y in [0, 3] and two
/// rooms above it, each with one door onto the corridor.
OccupancyGrid make_two_room_corridor(double resolution = kDefaultResolution);

/// Enclosed floor with randomly placed internal walls and gaps.
OccupancyGrid make_random_rooms(std::uint64_t seed, double resolution = kDefaultResolution);

/// Perfect maze of cells_x x cells_y square cells, each `cell` meters wide, with one
/// doorway per spanning-tree passage.
OccupancyGrid make_maze(std::uint64_t seed, int cells_x = 5, int cells_y = 4, double cell = 5.0,
                        double resolution = kDefaultResolution);

/// Names accepted by make_preset.
std::vector<std::string> preset_names();
OccupancyGrid make_preset(const std::string& name, double resolution = kDefaultResolution,
                          std::uint64_t seed = 1);

}  // namespace radiomap::scene
