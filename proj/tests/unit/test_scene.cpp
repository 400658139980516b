#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "radiomap/encoding.hpp"
#include "radiomap/errors.hpp"
#include "radiomap/random.hpp"
#include "radiomap/scene.hpp"
#include "radiomap/scenes.hpp"

using namespace radiomap;
using namespace radiomap::scene;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("radiomap_test_" + name);
  std::ofstream(path, std::ios::binary) << content;
  return path;
}

// 10 x 10 x 3 m free grid at 0.25 m with a full wall plane occupying x in [5, 5.25).
OccupancyGrid wall_grid() {
  OccupancyGrid g({40, 40, 12}, 0.25, Vec3{0, 0, 0});
  for (int k = 0; k < 12; ++k)
    for (int j = 0; j < 40; ++j) g.set({20, j, k}, true);
  return g;
}

}  // namespace

TEST_CASE("occupancy-json decodes a 2x2x1 bitset") {
  // Bits 1010 packed MSB first: 0xA0 -> "oA==".
  const std::uint8_t byte = 0xA0;
  REQUIRE(base64_encode(std::span<const std::uint8_t>(&byte, 1)) == "oA==");
  const auto path = write_temp(
      "a.json", R"({"dims":[2,2,1],"resolution":0.5,"origin":[0,0,0],"occupancy":"oA=="})");
  const auto g = load_scene(path, SceneFormat::kOccupancyJson);
  CHECK(g.occupied_count() == 2);
  CHECK(g.occupied({0, 0, 0}));
  CHECK_FALSE(g.occupied({1, 0, 0}));
  CHECK(g.occupied({0, 1, 0}));
  CHECK_FALSE(g.occupied({1, 1, 0}));
}

TEST_CASE("scene loading errors") {
  CHECK_THROWS_AS(load_scene(write_temp("empty.json", ""), SceneFormat::kOccupancyJson),
                  MalformedInput);
  CHECK_THROWS_AS(load_scene(write_temp("empty.csv", ""), SceneFormat::kXyzCsv), MalformedInput);
  CHECK_THROWS_AS(
      load_scene(write_temp("short.json",
                            R"({"dims":[4,4,4],"resolution":0.5,"origin":[0,0,0],"occupancy":"oA=="})"),
                 SceneFormat::kOccupancyJson),
      StructuralError);
  CHECK_THROWS_AS(load_scene(write_temp("nofield.json", R"({"dims":[1,1,1]})"),
                             SceneFormat::kOccupancyJson),
                  MalformedInput);
  try {
    load_scene(write_temp("bad.csv", "x,y,z\n0,0,0\n1,abc,0\n"), SceneFormat::kXyzCsv);
    FAIL("expected MalformedInput");
  } catch (const MalformedInput& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("field y") != std::string::npos);
  }
}

TEST_CASE("occupancy-json round trip preserves the grid") {
  const auto g = make_two_rooms();
  const auto back = from_occupancy_json(to_occupancy_json(g));
  CHECK(back.dims() == g.dims());
  CHECK(back.resolution() == g.resolution());
  CHECK(back.origin() == g.origin());
  CHECK(std::equal(back.raw().begin(), back.raw().end(), g.raw().begin(), g.raw().end()));
}

TEST_CASE("xyz-csv cube matches voxelize_point_cloud") {
  std::string csv = "x,y,z\n";
  std::vector<Vec3> pts;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int c = 0; c < 2; ++c) {
        pts.push_back({double(a), double(b), double(c)});
        csv += std::to_string(a) + "," + std::to_string(b) + "," + std::to_string(c) + "\n";
      }
  const auto g = load_scene(write_temp("cube.csv", csv), SceneFormat::kXyzCsv, 0.5);
  // Hand count: span 1 m / 0.5 = 2 voxels + 2 padding per axis; corners land in
  // indices 1 (lower) and 2 (upper face clamps into the last spanned voxel).
  CHECK(g.dims() == std::array<int, 3>{4, 4, 4});
  CHECK(g.occupied_count() == 8);
  for (int i = 1; i <= 2; ++i)
    for (int j = 1; j <= 2; ++j)
      for (int k = 1; k <= 2; ++k) CHECK(g.occupied({i, j, k}));
  const auto direct = voxelize_point_cloud(pts, 0.5);
  CHECK(std::equal(direct.raw().begin(), direct.raw().end(), g.raw().begin(), g.raw().end()));
}

TEST_CASE("voxelize_point_cloud index arithmetic") {
  SUBCASE("single point") {
    const std::vector<Vec3> p{{0, 0, 0}};
    const auto g = voxelize_point_cloud(p, 1.0);
    CHECK(g.dims() == std::array<int, 3>{3, 3, 3});
    CHECK(g.occupied_count() == 1);
    CHECK(g.occupied({1, 1, 1}));
  }
  SUBCASE("two points ten meters apart") {
    const std::vector<Vec3> p{{0, 0, 0}, {10, 0, 0}};
    const auto g = voxelize_point_cloud(p, 1.0);
    CHECK(g.dims()[0] == 12);
    CHECK(g.occupied_count() == 2);
  }
  SUBCASE("co-located points share a voxel") {
    const std::vector<Vec3> p{{0.1, 0, 0}, {0.9, 0, 0}};
    CHECK(voxelize_point_cloud(p, 1.0).occupied_count() == 1);
  }
  SUBCASE("non-finite point names its index") {
    const std::vector<Vec3> p{{0, 0, 0}, {1, 1, 1}, {NAN, 0, 0}};
    try {
      (void)voxelize_point_cloud(p, 1.0);
      FAIL("expected DomainError");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("index 2") != std::string::npos);
    }
  }
  CHECK_THROWS_AS(voxelize_point_cloud(std::vector<Vec3>{}, 1.0), DomainError);
  CHECK_THROWS_AS(voxelize_point_cloud(std::vector<Vec3>{{0, 0, 0}}, 0.0), DomainError);
}

TEST_CASE("raycast examples") {
  const auto g = wall_grid();
  SUBCASE("origin inside an occupied voxel") {
    const auto hit = raycast(g, {5.1, 2.0, 1.0}, {1, 0, 0}, 100.0);
    REQUIRE(hit);
    CHECK(hit->distance == 0.0);
  }
  SUBCASE("wall plane at x = 5") {
    const auto hit = raycast(g, {2.0, 2.0, 1.0}, {1, 0, 0}, 100.0);
    REQUIRE(hit);
    CHECK(hit->point.x >= 5.0);
    CHECK(hit->point.x <= 5.25);
    CHECK(hit->distance == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(hit->voxel == VoxelIndex{20, 8, 4});
    CHECK(hit->face_normal == Vec3{-1, 0, 0});
  }
  SUBCASE("max_dist shorter than the wall") {
    CHECK_FALSE(raycast(g, {2.0, 2.0, 1.0}, {1, 0, 0}, 2.9));
  }
  SUBCASE("empty grid never hits") {
    OccupancyGrid empty({8, 8, 8}, 0.5, Vec3{});
    for (const Vec3& d : fibonacci_sphere(50)) CHECK_FALSE(raycast(empty, {2, 2, 2}, d, 1e3));
  }
  CHECK_THROWS_AS(raycast(g, {-1, 2, 1}, {1, 0, 0}, 10.0), DomainError);
  CHECK_THROWS_AS(raycast(g, {2, 2, 1}, {2, 0, 0}, 10.0), DomainError);
}

TEST_CASE("raycast properties on random rays") {
  const auto g = make_random_rooms(3);
  Rng rng(11);
  int hits = 0;
  for (int n = 0; n < 500; ++n) {
    const Vec3 lo = g.origin();
    const Vec3 hi = g.upper_corner();
    const Vec3 o{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y), rng.uniform(lo.z, hi.z)};
    if (!g.free_at(o)) continue;
    const Vec3 d = Vec3{rng.normal(), rng.normal(), rng.normal()}.normalized();
    const double max_dist = rng.uniform(0.5, 20.0);
    const auto hit = raycast(g, o, d, max_dist);
    if (!hit) continue;
    ++hits;
    CHECK(hit->distance <= max_dist);
    CHECK(hit->distance >= 0.0);
    CHECK(g.occupied(hit->voxel));
    // Re-cast from just before the hit point.
    const double back = std::min(hit->distance, 1e-3);
    const Vec3 o2 = hit->point - d * back;
    const auto again = raycast(g, o2, d, back + 1e-2);
    REQUIRE(again);
    CHECK(again->voxel == hit->voxel);
  }
  CHECK(hits > 50);
}

TEST_CASE("mutually_visible examples and symmetry") {
  const auto g = wall_grid();
  CHECK(mutually_visible(g, {2, 2, 1}, {2, 2, 1}));
  CHECK_FALSE(mutually_visible(g, {2, 2, 1}, {8, 2, 1}));
  CHECK(mutually_visible(g, {1, 1, 1}, {4, 9, 2}));

  // A surface point on a two-voxel-thick wall sees its own side only.
  auto thick = wall_grid();
  for (int k = 0; k < 12; ++k)
    for (int j = 0; j < 40; ++j) thick.set({21, j, k}, true);
  const Vec3 left_face = thick.center_of({20, 20, 6});
  const Vec3 right_face = thick.center_of({21, 20, 6});
  CHECK(mutually_visible(thick, left_face, {2, 5, 1.5}));
  CHECK_FALSE(mutually_visible(thick, left_face, {9, 5, 1.5}));
  CHECK(mutually_visible(thick, right_face, {9, 5, 1.5}));
  CHECK_FALSE(mutually_visible(thick, left_face, right_face));

  const auto rooms = make_random_rooms(5);
  const auto surface = extract_surface_voxels(rooms);
  Rng rng(2);
  for (int n = 0; n < 400; ++n) {
    const Vec3 a = rooms.center_of(surface[rng.below(surface.size())]);
    const Vec3 b = rooms.center_of(surface[rng.below(surface.size())]);
    CHECK(mutually_visible(rooms, a, b) == mutually_visible(rooms, b, a));
  }
}

TEST_CASE("extract_surface_voxels") {
  SUBCASE("solid 3x3x3 block") {
    OccupancyGrid g({7, 7, 7}, 1.0, Vec3{});
    for (int i = 2; i <= 4; ++i)
      for (int j = 2; j <= 4; ++j)
        for (int k = 2; k <= 4; ++k) g.set({i, j, k}, true);
    const auto s = extract_surface_voxels(g);
    CHECK(s.size() == 26);
    CHECK(std::find(s.begin(), s.end(), VoxelIndex{3, 3, 3}) == s.end());
  }
  SUBCASE("fully free grid") {
    OccupancyGrid g({4, 4, 4}, 1.0, Vec3{});
    CHECK(extract_surface_voxels(g).empty());
  }
  SUBCASE("single occupied voxel") {
    OccupancyGrid g({3, 3, 3}, 1.0, Vec3{});
    g.set({1, 1, 1}, true);
    const auto s = extract_surface_voxels(g);
    REQUIRE(s.size() == 1);
    CHECK(s[0] == VoxelIndex{1, 1, 1});
  }
}

TEST_CASE("voxelized convex solid yields only boundary voxels") {
  std::vector<Vec3> ball;
  for (double x = -2.0; x <= 2.0; x += 0.1)
    for (double y = -2.0; y <= 2.0; y += 0.1)
      for (double z = -2.0; z <= 2.0; z += 0.1)
        if (Vec3{x, y, z}.norm() <= 2.0) ball.push_back({x, y, z});
  const auto g = voxelize_point_cloud(ball, 0.25);
  const auto surface = extract_surface_voxels(g);
  const std::set<VoxelIndex> surface_set(surface.begin(), surface.end());
  const auto& d = g.dims();
  std::size_t brute = 0;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!g.occupied({i, j, k})) continue;
        bool boundary = false;
        for (int di = -1; di <= 1; ++di)
          for (int dj = -1; dj <= 1; ++dj)
            for (int dk = -1; dk <= 1; ++dk) {
              if (std::abs(di) + std::abs(dj) + std::abs(dk) != 1) continue;
              const VoxelIndex nb{i + di, j + dj, k + dk};
              if (g.in_bounds(nb) && !g.occupied(nb)) boundary = true;
            }
        CHECK(boundary == (surface_set.count({i, j, k}) == 1));
        if (boundary) ++brute;
      }
  CHECK(brute == surface.size());
  // Every surface voxel sits near the sphere boundary.
  for (const auto& v : surface) CHECK(g.center_of(v).norm() > 2.0 - 2 * 0.25);
}

TEST_CASE("synthetic presets are enclosed") {
  for (const auto& name : preset_names()) {
    const auto g = make_preset(name);
    CHECK(g.occupied({0, 0, 0}));
    CHECK(g.free_at({1.0, 1.0, 1.0}));
  }
}
