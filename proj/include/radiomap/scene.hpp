#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "radiomap/geometry.hpp"

namespace radiomap::scene {

/// Dense voxel occupancy lattice. Voxel (i,j,k) covers
/// [origin + (i,j,k)*resolution, origin + (i+1,j+1,k+1)*resolution). Storage is
/// row-major with x fastest. Immutable once built apart from set().
class OccupancyGrid {
 public:
  OccupancyGrid(std::array<int, 3> dims, double resolution, Vec3 origin);
  OccupancyGrid(std::array<int, 3> dims, double resolution, Vec3 origin,
                std::vector<std::uint8_t> occupancy);

  [[nodiscard]] const std::array<int, 3>& dims() const { return dims_; }
  [[nodiscard]] double resolution() const { return resolution_; }
  [[nodiscard]] const Vec3& origin() const { return origin_; }
  [[nodiscard]] std::size_t voxel_count() const { return occupancy_.size(); }
  [[nodiscard]] Vec3 upper_corner() const;

  [[nodiscard]] bool in_bounds(const VoxelIndex& v) const {
    return v.i >= 0 && v.j >= 0 && v.k >= 0 && v.i < dims_[0] && v.j < dims_[1] &&
           v.k < dims_[2];
  }
  /// Half-open bounds test in world space.
  [[nodiscard]] bool contains(const Vec3& p) const;

  [[nodiscard]] std::size_t linear(const VoxelIndex& v) const {
    return static_cast<std::size_t>(v.i) +
           static_cast<std::size_t>(dims_[0]) *
               (static_cast<std::size_t>(v.j) + static_cast<std::size_t>(dims_[1]) * v.k);
  }
  [[nodiscard]] VoxelIndex unlinear(std::size_t idx) const;

  /// Voxel containing p; p must be finite. May be out of bounds.
  [[nodiscard]] VoxelIndex voxel_of(const Vec3& p) const;
  [[nodiscard]] Vec3 center_of(const VoxelIndex& v) const;

  [[nodiscard]] bool occupied(const VoxelIndex& v) const {
    return in_bounds(v) && occupancy_[linear(v)] != 0;
  }
  /// True for in-bounds points inside an occupied voxel.
  [[nodiscard]] bool occupied_at(const Vec3& p) const;
  /// True for in-bounds points inside a free voxel.
  [[nodiscard]] bool free_at(const Vec3& p) const;

  void set(const VoxelIndex& v, bool value);
  /// Marks every voxel whose center lies in the axis-aligned box [lo, hi].
  void fill_box(const Vec3& lo, const Vec3& hi, bool value = true);

  [[nodiscard]] std::size_t occupied_count() const;
  [[nodiscard]] std::span<const std::uint8_t> raw() const { return occupancy_; }

  /// Sum of unit vectors towards free in-bounds 6-neighbors, normalized; zero if none.
  [[nodiscard]] Vec3 outward_normal(const VoxelIndex& v) const;

 private:
  std::array<int, 3> dims_;
  double resolution_;
  Vec3 origin_;
  std::vector<std::uint8_t> occupancy_;
};

struct Hit {
  Vec3 point;
  double distance = 0.0;
  VoxelIndex voxel;
  /// Unit axis normal of the voxel face the ray entered through, pointing back
  /// towards the ray origin. Zero when the origin itself is inside the voxel.
  Vec3 face_normal;
};

enum class SceneFormat { kOccupancyJson, kXyzCsv };

/// Default voxel size for desk-scale scenes.
inline constexpr double kDefaultResolution = 0.25;

SceneFormat parse_scene_format(const std::string& name);

/// Loads a scene. xyz-csv input is voxelized at `resolution`.
OccupancyGrid load_scene(const std::filesystem::path& path, SceneFormat format,
                         double resolution = kDefaultResolution);
void save_scene(const OccupancyGrid& grid, const std::filesystem::path& path);
std::string to_occupancy_json(const OccupancyGrid& grid);
OccupancyGrid from_occupancy_json(const std::string& text);

/// Bounding box of the points padded by one voxel on every side; a voxel is occupied
/// iff at least one point falls inside it. Points on the upper face of the spanned
/// box belong to the last spanned voxel.
OccupancyGrid voxelize_point_cloud(std::span<const Vec3> points, double resolution);

/// First occupied voxel along origin + t*dir, t in [0, max_dist], by exact grid
/// traversal. Throws DomainError if origin is out of bounds or dir is not unit length.
std::optional<Hit> raycast(const OccupancyGrid& grid, const Vec3& origin, const Vec3& dir,
                           double max_dist);

/// Point-to-point visibility. Endpoints lying in occupied voxels are first pushed
/// half a voxel along their outward surface normal and their own voxels are ignored.
bool mutually_visible(const OccupancyGrid& grid, const Vec3& a, const Vec3& b);

/// True iff the open segment (a, b) crosses no occupied voxel other than the ones
/// listed in `ignore`.
bool segment_clear(const OccupancyGrid& grid, const Vec3& a, const Vec3& b,
                   std::span<const VoxelIndex> ignore = {});

/// Occupied voxels with at least one free in-bounds 6-neighbor, in linear order.
std::vector<VoxelIndex> extract_surface_voxels(const OccupancyGrid& grid);

}  // namespace radiomap::scene
