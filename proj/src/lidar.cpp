#include "depthnav/lidar.hpp"

#include <numbers>

#include "depthnav/contract.hpp"

namespace depthnav {

void LidarConfig::validate() const {
  expect(n_rays >= 2, "lidar: n_rays must be >= 2");
  expect(fov > 0.0 && fov <= 2.0 * std::numbers::pi, "lidar: fov must lie in (0, 2pi]");
  expect(r_max > 0.0, "lidar: r_max must be > 0");
}

Vec2 ray_origin(const VehicleState& state, const LidarConfig& config) {
  return state.position + Vec2{config.mount_x, config.mount_y}.rotated(state.yaw);
}

double ray_heading(double yaw, const LidarConfig& config, int k) {
  return yaw - config.fov / 2.0 + config.fov * static_cast<double>(k) / static_cast<double>(config.n_rays - 1);
}

LidarScan scan(const Scene& scene, const VehicleState& state, const LidarConfig& config, double time) {
  const Vec2 origin = ray_origin(state, config);
  const auto n = static_cast<std::size_t>(config.n_rays);
  LidarScan out;
  out.distances.resize(n);
  out.hit_flags.resize(n);
  for (int k = 0; k < config.n_rays; ++k) {
    const RayHit hit = ray_cast(scene, origin, Vec2::from_angle(ray_heading(state.yaw, config, k)), config.r_max, time);
    out.distances[static_cast<std::size_t>(k)] = hit.distance;
    out.hit_flags[static_cast<std::size_t>(k)] = hit.hit;
  }
  return out;
}

}  // namespace depthnav
