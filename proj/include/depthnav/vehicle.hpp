#pragma once

#include "depthnav/geometry.hpp"

namespace depthnav {

/// Throttle/resistance actuator constants plus platform limits.
///
/// Defaults put the full-throttle steady state exactly at v_max:
/// c_t = v (v c_f1 + c_f2) at v = 5 m/s.
struct VehicleParams {
  double c_t = 20.0;    // m/s^2 per unit throttle
  double c_f1 = 0.6;    // 1/m
  double c_f2 = 1.0;    // 1/s
  double wheelbase = 0.33;
  double v_max = 5.0;
  double delta_min = -0.36;
  double delta_max = 0.36;
  double t_s = 0.025;

  /// Throws ContractError naming the violated invariant.
  void validate() const;
};

struct VehicleState {
  Vec2 position;
  double yaw = 0.0;
  double v_joint = 0.0;

  bool operator==(const VehicleState&) const = default;
};

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// Resistance term f = v (v c_f1 + c_f2) evaluated at the previous joint velocity.
double resistive_force(double v_prev, const VehicleParams& params);

/// One explicit-Euler step of the joint-velocity dynamics followed by
/// kinematic-bicycle pose integration with the new velocity.
VehicleState step_dynamics(const VehicleState& state, double throttle, double steering,
                           const VehicleParams& params);

}  // namespace depthnav
