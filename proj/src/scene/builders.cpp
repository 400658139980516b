#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "radiomap/errors.hpp"
#include "radiomap/random.hpp"
#include "radiomap/scenes.hpp"

namespace radiomap::scene {
namespace {

OccupancyGrid shell_grid(const Vec3& extent, double res) {
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a) dims[a] = static_cast<int>(std::ceil(extent[a] / res - 1e-9)) + 2;
  OccupancyGrid g(dims, res, Vec3{-res, -res, -res});
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const bool edge = i == 0 || j == 0 || k == 0 || i == dims[0] - 1 || j == dims[1] - 1 ||
                          k == dims[2] - 1;
        if (edge) g.set({i, j, k}, true);
      }
    }
  }
  return g;
}

// Internal walls are three voxels thick so that opposite faces never touch.
double wall_thickness(double res) { return 3 * res; }

}  // namespace

SceneBuilder::SceneBuilder(Vec3 extent, double resolution)
    : extent_(extent), grid_(shell_grid(extent, resolution)) {}

SceneBuilder& SceneBuilder::block(const Vec3& lo, const Vec3& hi) {
  grid_.fill_box(lo, hi, true);
  return *this;
}

SceneBuilder& SceneBuilder::carve(const Vec3& lo, const Vec3& hi) {
  const Vec3 clo{std::max(lo.x, 0.0), std::max(lo.y, 0.0), std::max(lo.z, 0.0)};
  const Vec3 chi{std::min(hi.x, extent_.x), std::min(hi.y, extent_.y), std::min(hi.z, extent_.z)};
  grid_.fill_box(clo, chi, false);
  return *this;
}

OccupancyGrid make_closed_room(Vec3 extent, double resolution) {
  return SceneBuilder(extent, resolution).build();
}

OccupancyGrid make_two_rooms(double resolution) {
  return SceneBuilder({10.0, 5.0, 3.0}, resolution).block({5.0, -1.0, -1.0}, {5.0 + wall_thickness(resolution), 6.0, 4.0}).build();
}

OccupancyGrid make_l_corridor(double resolution) {
  // 12 x 12 footprint; everything except the two 2 m wide arms is solid.
  return SceneBuilder({12.0, 12.0, 3.0}, resolution)
      .block({2.0, 2.0, -1.0}, {13.0, 13.0, 4.0})
      .build();
}

OccupancyGrid make_two_room_corridor(double resolution) {
  const double t = wall_thickness(resolution);
  return SceneBuilder({20.0, 10.0, 3.0}, resolution)
      .block({-1.0, 3.0, -1.0}, {21.0, 3.0 + t, 4.0})   // corridor wall
      .block({10.0, 3.0, -1.0}, {10.0 + t, 11.0, 4.0})  // room divider
      .carve({3.5, 2.9, 0.0}, {5.0, 3.1 + t, 2.2})          // door A
      .carve({15.0, 2.9, 0.0}, {16.5, 3.1 + t, 2.2})        // door B
      .build();
}

OccupancyGrid make_random_rooms(std::uint64_t seed, double resolution) {
  Rng rng(seed);
  const double sx = rng.uniform(10.0, 16.0);
  const double sy = rng.uniform(6.0, 10.0);
  SceneBuilder b({sx, sy, 3.0}, resolution);
  const int walls = 2 + static_cast<int>(rng.below(3));
  for (int w = 0; w < walls; ++w) {
    const bool along_x = rng.below(2) == 0;
    if (along_x) {
      const double y = std::round(rng.uniform(2.0, sy - 2.0) / resolution) * resolution;
      const double x0 = rng.uniform(0.0, sx * 0.4);
      const double x1 = rng.uniform(sx * 0.6, sx);
      b.block({x0, y, -1.0}, {x1, y + wall_thickness(resolution), 4.0});
      const double gap = rng.uniform(x0, x1 - 1.5);
      if (rng.below(2) == 0) b.carve({gap, y - 0.1, 0.0}, {gap + 1.25, y + wall_thickness(resolution) + 0.1, 2.2});
    } else {
      const double x = std::round(rng.uniform(2.0, sx - 2.0) / resolution) * resolution;
      const double y0 = rng.uniform(0.0, sy * 0.4);
      const double y1 = rng.uniform(sy * 0.6, sy);
      b.block({x, y0, -1.0}, {x + wall_thickness(resolution), y1, 4.0});
    }
  }
  // A free-standing pillar.
  const double px = rng.uniform(1.0, sx - 2.0);
  const double py = rng.uniform(1.0, sy - 2.0);
  b.block({px, py, -1.0}, {px + 0.75, py + 0.75, 4.0});
  return b.build();
}

OccupancyGrid make_maze(std::uint64_t seed, int cells_x, int cells_y, double cell, double resolution) {
  if (cells_x < 1 || cells_y < 1 || !(cell > 4 * resolution)) throw DomainError("make_maze: bad cell layout");
  const int count = cells_x * cells_y;
  // Randomized depth-first spanning tree over the cell grid; open[c][0] is the passage
  // to the +x neighbor, open[c][1] to the +y neighbor.
  std::vector<std::array<bool, 2>> open(static_cast<std::size_t>(count), {false, false});
  std::vector<char> seen(static_cast<std::size_t>(count), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  Rng rng(seed);
  while (!stack.empty()) {
    const int c = stack.back();
    const int cx = c % cells_x;
    const int cy = c / cells_x;
    std::vector<int> next;
    if (cx > 0 && !seen[c - 1]) next.push_back(c - 1);
    if (cx + 1 < cells_x && !seen[c + 1]) next.push_back(c + 1);
    if (cy > 0 && !seen[c - cells_x]) next.push_back(c - cells_x);
    if (cy + 1 < cells_y && !seen[c + cells_x]) next.push_back(c + cells_x);
    if (next.empty()) {
      stack.pop_back();
      continue;
    }
    const int n = next[rng.below(next.size())];
    const int lo = std::min(c, n);
    open[static_cast<std::size_t>(lo)][std::abs(n - c) == 1 ? 0 : 1] = true;
    seen[static_cast<std::size_t>(n)] = 1;
    stack.push_back(n);
  }

  const double t = wall_thickness(resolution);
  const double gap = 0.4 * cell;
  SceneBuilder b({cells_x * cell, cells_y * cell, 3.0}, resolution);
  for (int cy = 0; cy < cells_y; ++cy) {
    for (int cx = 0; cx < cells_x; ++cx) {
      const auto& o = open[static_cast<std::size_t>(cy * cells_x + cx)];
      const double x1 = (cx + 1) * cell;
      const double y1 = (cy + 1) * cell;
      if (cx + 1 < cells_x) {
        b.block({x1 - t / 2, cy * cell - t / 2, -1.0}, {x1 + t / 2, y1 + t / 2, 4.0});
        if (o[0]) b.carve({x1 - t, y1 - cell / 2 - gap / 2, 0.0}, {x1 + t, y1 - cell / 2 + gap / 2, 3.0});
      }
      if (cy + 1 < cells_y) {
        b.block({cx * cell - t / 2, y1 - t / 2, -1.0}, {x1 + t / 2, y1 + t / 2, 4.0});
        if (o[1]) b.carve({x1 - cell / 2 - gap / 2, y1 - t, 0.0}, {x1 - cell / 2 + gap / 2, y1 + t, 3.0});
      }
    }
  }
  return b.build();
}

std::vector<std::string> preset_names() {
  return {"closed-room", "two-rooms", "l-corridor", "two-room-corridor", "random-rooms", "maze"};
}

OccupancyGrid make_preset(const std::string& name, double resolution, std::uint64_t seed) {
  if (name == "closed-room") return make_closed_room({6.0, 5.0, 3.0}, resolution);
  if (name == "two-rooms") return make_two_rooms(resolution);
  if (name == "l-corridor") return make_l_corridor(resolution);
  if (name == "two-room-corridor") return make_two_room_corridor(resolution);
  if (name == "random-rooms") return make_random_rooms(seed, resolution);
  if (name == "maze") return make_maze(seed, 5, 4, 5.0, resolution);
  throw DomainError("unknown scene preset '" + name + "'");
}

}  // namespace radiomap::scene
