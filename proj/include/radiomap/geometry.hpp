#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace radiomap {

/// Position or direction in world coordinates, meters.
struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3() = default;
  constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr Vec3& operator-=(const Vec3& o) {
    x -= o.x;
    y -= o.y;
    z -= o.z;
    return *this;
  }
  constexpr Vec3& operator*=(double s) {
    x *= s;
    y *= s;
    z *= s;
    return *this;
  }

  constexpr bool operator==(const Vec3&) const = default;

  [[nodiscard]] constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  [[nodiscard]] constexpr Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
  [[nodiscard]] constexpr double squared_norm() const { return dot(*this); }
  [[nodiscard]] Vec3 normalized() const {
    const double n = norm();
    return n > 0.0 ? *this / n : Vec3{};
  }
  [[nodiscard]] bool is_finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

/// Strict lexicographic order, used wherever a canonical ordering of points is needed.
inline bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x != b.x) return a.x < b.x;
  if (a.y != b.y) return a.y < b.y;
  return a.z < b.z;
}

/// Integer voxel coordinate.
struct VoxelIndex {
  int i = 0;
  int j = 0;
  int k = 0;

  constexpr bool operator==(const VoxelIndex&) const = default;
  constexpr auto operator<=>(const VoxelIndex&) const = default;
  constexpr int operator[](int axis) const { return axis == 0 ? i : (axis == 1 ? j : k); }
};

/// Deterministic quasi-uniform directions on the unit sphere (Fibonacci lattice).
std::vector<Vec3> fibonacci_sphere(int count);

}  // namespace radiomap

template <>
struct std::hash<radiomap::VoxelIndex> {
  std::size_t operator()(const radiomap::VoxelIndex& v) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(v.i);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.j);
    h = h * 0x9E3779B97F4A7C15ULL ^ static_cast<std::uint32_t>(v.k);
    return static_cast<std::size_t>(h ^ (h >> 29));
  }
};
