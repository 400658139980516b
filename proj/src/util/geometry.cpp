#include "radiomap/geometry.hpp"

#include <numbers>

namespace radiomap {

std::vector<Vec3> fibonacci_sphere(int count) {
  std::vector<Vec3> dirs;
  if (count <= 0) return dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden_angle * i;
    dirs.push_back(Vec3{r * std::cos(phi), r * std::sin(phi), z}.normalized());
  }
  return dirs;
}

}  // namespace radiomap
