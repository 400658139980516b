#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "radiomap/errors.hpp"
#include "radiomap/partition.hpp"
#include "radiomap/scenes.hpp"

using namespace radiomap;
using namespace radiomap::partition;
using scene::OccupancyGrid;

namespace {

double principal_spread(const OccupancyGrid& g, const SurfacePatch& p) {
  // Brute-force max spread over a dense set of directions; an upper bound on the
  // spread along the principal axis.
  double best = 0.0;
  for (const auto& d : fibonacci_sphere(2000)) {
    double lo = 1e300;
    double hi = -1e300;
    for (const auto& v : p.voxels) {
      const double t = g.center_of(v).dot(d);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    best = std::max(best, hi - lo);
  }
  return best;
}

void check_soundness(const OccupancyGrid& g, const Partition& p) {
  for (const auto& r : p.regions) {
    for (std::size_t a = 0; a < r.patches.size(); ++a)
      for (std::size_t b = a + 1; b < r.patches.size(); ++b)
        CHECK(scene::mutually_visible(g, r.patches[a].representative, r.patches[b].representative));
  }
}

}  // namespace

TEST_CASE("segment_surfaces: small patch stays whole") {
  OccupancyGrid g({6, 6, 6}, 0.25, {0, 0, 0});
  g.set({2, 2, 2}, true);
  g.set({3, 2, 2}, true);
  const std::vector<VoxelIndex> surf{{2, 2, 2}, {3, 2, 2}};
  const auto patches = segment_surfaces(surf, g, 10.0);
  REQUIRE(patches.size() == 1);
  CHECK(patches[0].voxels.size() == 2);
  CHECK((patches[0].representative.x == 0.625 || patches[0].representative.x == 0.875));
}

TEST_CASE("segment_surfaces: straight 10 m wall splits into 3-4 patches") {
  OccupancyGrid g({44, 4, 4}, 0.25, {0, 0, 0});
  std::vector<VoxelIndex> surf;
  for (int i = 2; i < 42; ++i) {
    g.set({i, 1, 1}, true);
    surf.push_back({i, 1, 1});
  }
  const auto patches = segment_surfaces(surf, g, 4.0);
  CHECK(patches.size() >= 3);
  CHECK(patches.size() <= 4);
  std::size_t total = 0;
  for (const auto& p : patches) {
    total += p.voxels.size();
    CHECK(principal_spread(g, p) <= 4.0 + 1e-9);
  }
  CHECK(total == 40);
}

TEST_CASE("segment_surfaces: disconnected walls never merge") {
  OccupancyGrid g({20, 20, 4}, 0.25, {0, 0, 0});
  std::vector<VoxelIndex> surf;
  for (int i = 1; i < 6; ++i) {
    g.set({i, 2, 1}, true);
    g.set({i, 10, 1}, true);
    surf.push_back({i, 2, 1});
    surf.push_back({i, 10, 1});
  }
  const auto patches = segment_surfaces(surf, g, 100.0);
  CHECK(patches.size() == 2);
  CHECK_THROWS_AS(segment_surfaces(surf, g, 0.25), DomainError);
}

TEST_CASE("segment_surfaces: tied eigenvalues fall back to an axis split") {
  // A 4x4 square has equal in-plane eigenvalues. Expected: x split -> two 2x4 strips
  // -> y split -> four 2x2 squares of 0.25 m extent.
  OccupancyGrid g({8, 8, 4}, 0.25, {0, 0, 0});
  std::vector<VoxelIndex> surf;
  for (int j = 2; j < 6; ++j)
    for (int i = 2; i < 6; ++i) {
      g.set({i, j, 1}, true);
      surf.push_back({i, j, 1});
    }
  const auto patches = segment_surfaces(surf, g, 0.6);
  REQUIRE(patches.size() == 4);
  for (const auto& p : patches) {
    CHECK(p.voxels.size() == 4);
    CHECK(principal_spread(g, p) == doctest::Approx(0.25 * std::sqrt(2.0)));
  }
}

TEST_CASE("cluster_regions: convex room with large D is one region") {
  const auto g = scene::make_closed_room({4, 4, 3});
  PartitionParams params;
  params.D = 100.0;
  const auto p = partition_scene(g, params);
  CHECK(p.size() == 1);
  CHECK(p.regions[0].id == 0);
}

TEST_CASE("cluster_regions: walled-off rooms give exactly two regions") {
  const auto g = scene::make_two_rooms();
  PartitionParams params;
  params.D = 100.0;
  const auto p = partition_scene(g, params);
  CHECK(p.size() == 2);
  check_soundness(g, p);
  // Oracle: every representative sees the room it is attached to only.
  for (const auto& r : p.regions) {
    std::set<bool> sides;
    for (const auto& patch : r.patches) sides.insert(patch.representative.x < 5.375);
    CHECK(sides.size() == 1);
  }
}

TEST_CASE("cluster_regions: L corridor arm ends land in different regions") {
  const auto g = scene::make_l_corridor();
  const auto p = partition_scene(g, {});
  CHECK(p.size() >= 2);
  check_soundness(g, p);
  // Find the regions owning the far end walls of each arm: x = 12 (arm along x) and y = 12.
  int end_x = -1;
  int end_y = -1;
  for (const auto& r : p.regions)
    for (const auto& patch : r.patches) {
      if (patch.representative.x > 11.9 && patch.representative.y < 2.0) end_x = r.id;
      if (patch.representative.y > 11.9 && patch.representative.x < 2.0) end_y = r.id;
    }
  REQUIRE(end_x >= 0);
  REQUIRE(end_y >= 0);
  CHECK(end_x != end_y);
}

TEST_CASE("partition properties: coverage, ids, determinism") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto g = scene::make_random_rooms(seed);
    const auto surf = scene::extract_surface_voxels(g);
    const auto patches = segment_surfaces(surf, g, 4.0);
    const auto p = cluster_regions(patches, g, 8.0, 11);
    CHECK(p.patch_count() == patches.size());
    std::multiset<std::size_t> firsts;
    for (std::size_t r = 0; r < p.size(); ++r) {
      CHECK(p.regions[r].id == static_cast<int>(r));
      for (const auto& patch : p.regions[r].patches) firsts.insert(g.linear(patch.voxels.front()));
    }
    std::multiset<std::size_t> expected;
    for (const auto& patch : patches) expected.insert(g.linear(patch.voxels.front()));
    CHECK(firsts == expected);
    std::size_t voxels = 0;
    for (const auto& patch : patches) voxels += patch.voxels.size();
    CHECK(voxels == surf.size());
    check_soundness(g, p);

    const auto again = cluster_regions(patches, g, 8.0, 11);
    REQUIRE(again.size() == p.size());
    for (std::size_t r = 0; r < p.size(); ++r) {
      CHECK(again.regions[r].center == p.regions[r].center);
      CHECK(again.regions[r].patches.size() == p.regions[r].patches.size());
    }
  }
  CHECK_THROWS_AS(cluster_regions({}, scene::make_closed_room({2, 2, 2}), 8.0, 1), DomainError);
}

TEST_CASE("region_waypoints: 4x4x3 room at 1 m spacing") {
  const auto g = scene::make_closed_room({4, 4, 3});
  PartitionParams params;
  params.D = 100.0;
  const auto p = partition_scene(g, params);
  REQUIRE(p.size() == 1);
  const auto w = region_waypoints(p, 0, g, {1.0, 1.25});
  CHECK(w.size() >= 9);
  CHECK(w.size() <= 16);
  for (const auto& q : w) CHECK(g.free_at(q));
  CHECK_THROWS_AS(region_waypoints(p, 3, g, {1.0, 1.25}), DomainError);
  CHECK_THROWS_AS(region_waypoints(p, 0, g, {0.0, 1.25}), DomainError);
}

TEST_CASE("region_waypoints: oversized spacing falls back to one waypoint") {
  const auto g = scene::make_closed_room({4, 4, 3});
  PartitionParams params;
  params.D = 100.0;
  const auto p = partition_scene(g, params);
  const auto w = region_waypoints(p, 0, g, {50.0, 1.25});
  REQUIRE(w.size() == 1);
  CHECK(g.free_at(w[0]));
}

TEST_CASE("region_waypoints: every region of a multi-room scene gets waypoints") {
  const auto g = scene::make_two_room_corridor();
  const auto p = partition_scene(g, {});
  const auto all = all_region_waypoints(p, g, {1.0, 1.25});
  REQUIRE(all.size() == p.size());
  for (const auto& w : all) CHECK_FALSE(w.empty());
}

TEST_CASE("region_waypoints: region buried in solid raises EmptyRegion") {
  auto g = scene::make_closed_room({4, 4, 3});
  // Solid 1 m cube in the room; its core voxel has no free neighbor.
  g.fill_box({1.0, 1.0, 1.0}, {2.0, 2.0, 2.0});
  const VoxelIndex core = g.voxel_of({1.5, 1.5, 1.5});
  REQUIRE(g.occupied(core));
  Partition p;
  p.D = 8.0;
  Region r;
  r.id = 0;
  r.center = g.center_of(core);
  r.patches.push_back({{core}, g.center_of(core)});
  p.regions.push_back(r);
  CHECK_THROWS_AS(region_waypoints(p, 0, g, {1.0, 1.25}), EmptyRegion);
}
