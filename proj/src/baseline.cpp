#include "depthnav/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "depthnav/contract.hpp"

namespace depthnav {

void PidParams::validate() const {
  expect(kp >= 0.0 && ki >= 0.0 && kd >= 0.0, "pid: gains must be >= 0");
  expect(target_wall_distance > 0.0, "pid: target_wall_distance must be > 0");
  expect(cruise_throttle >= 0.0 && cruise_throttle <= 1.0, "pid: cruise_throttle must lie in [0, 1]");
  expect(slowdown_distance > 0.0, "pid: slowdown_distance must be > 0");
  expect(side_sector_min < side_sector_max, "pid: empty side sector");
}

PidController::PidController(PidParams params, LidarConfig lidar, double dt)
    : params_(params), lidar_(lidar), dt_(dt) {
  params_.validate();
  lidar_.validate();
  expect(dt > 0.0, "pid: dt must be > 0");
}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_.reset();
}

double PidController::sector_min(const LidarScan& scan, double lo, double hi) const {
  // Offsets are relative to the heading, positive to the left.
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0; k < lidar_.n_rays; ++k) {
    const double offset = ray_heading(0.0, lidar_, k);
    if (offset >= lo && offset <= hi) best = std::min(best, scan.distances[static_cast<std::size_t>(k)]);
  }
  return std::isfinite(best) ? best : lidar_.r_max;
}

RawAction PidController::act(const LidarScan& scan) {
  expect(static_cast<int>(scan.distances.size()) == lidar_.n_rays, "pid: scan length does not match lidar config");
  const bool left = params_.side == WallSide::kLeft;
  const double side = left ? sector_min(scan, params_.side_sector_min, params_.side_sector_max)
                           : sector_min(scan, -params_.side_sector_max, -params_.side_sector_min);
  const double front = sector_min(scan, -params_.front_half_width, params_.front_half_width);

  const double error = params_.target_wall_distance - side;
  integral_ += error * dt_;
  const double derivative = prev_error_ ? (error - *prev_error_) / dt_ : 0.0;
  prev_error_ = error;

  const double u = params_.kp * error + params_.ki * integral_ + params_.kd * derivative;
  // Positive steering turns left; a too-close left wall needs a right turn.
  const double steering = std::clamp(left ? -u : u, -1.0, 1.0);
  const double throttle = params_.cruise_throttle * std::min(1.0, front / params_.slowdown_distance);
  return {throttle, steering};
}

}  // namespace depthnav
