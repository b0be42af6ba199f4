#pragma once

#include <vector>

#include "depthnav/geometry.hpp"
#include "depthnav/vehicle.hpp"

namespace depthnav {

struct LidarConfig {
  double mount_x = 0.1;  // body frame, forward
  double mount_y = 0.0;  // body frame, left
  double mount_z = 0.1;  // carried for completeness; planar casting ignores it
  int n_rays = 170;
  double fov = 2.0 * 3.14159265358979323846 / 3.0;
  double r_max = 8.0;

  void validate() const;
};

struct LidarScan {
  std::vector<double> distances;
  std::vector<bool> hit_flags;
};

/// World-frame ray origin: vehicle position plus the body-frame mount offset rotated by yaw.
Vec2 ray_origin(const VehicleState& state, const LidarConfig& config);

/// Heading of ray k: yaw - fov/2 + fov*k/(n-1), so ray 0 is the rightmost.
double ray_heading(double yaw, const LidarConfig& config, int k);

LidarScan scan(const Scene& scene, const VehicleState& state, const LidarConfig& config, double time);

}  // namespace depthnav
