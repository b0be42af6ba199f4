#pragma once

#include <optional>

#include "depthnav/lidar.hpp"
#include "depthnav/task_env.hpp"

namespace depthnav {

enum class WallSide { kLeft, kRight };

struct PidParams {
  double kp = 1.5;
  double ki = 0.0;
  double kd = 0.3;
  double target_wall_distance = 0.8;  // m
  double cruise_throttle = 0.5;
  WallSide side = WallSide::kRight;
  double slowdown_distance = 2.0;  // frontal clearance below which throttle scales down linearly
  double side_sector_min = 0.7853981633974483;  // 45 deg off-center
  double side_sector_max = 1.5707963267948966;  // 90 deg off-center
  double front_half_width = 0.2617993877991494;  // 15 deg

  void validate() const;
};

/// Wall-following PID baseline. Reads only the LiDAR scan, the same
/// information the learned policy receives.
///
/// error = target - min(side sector); steering = clamp(+-(kp e + ki int e + kd de/dt), -1, 1)
/// with the sign chosen to turn away from a wall that is too close;
/// throttle = cruise * min(1, frontal_min / slowdown_distance).
class PidController {
 public:
  PidController(PidParams params, LidarConfig lidar, double dt);

  RawAction act(const LidarScan& scan);
  void reset();

  const PidParams& params() const { return params_; }
  double last_error() const { return prev_error_.value_or(0.0); }

 private:
  double sector_min(const LidarScan& scan, double lo, double hi) const;

  PidParams params_;
  LidarConfig lidar_;
  double dt_;
  double integral_ = 0.0;
  std::optional<double> prev_error_;
};

}  // namespace depthnav
