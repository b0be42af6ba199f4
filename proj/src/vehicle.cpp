#include "depthnav/vehicle.hpp"

#include <algorithm>
#include <numbers>

#include "depthnav/contract.hpp"

namespace depthnav {

void VehicleParams::validate() const {
  expect(c_t > 0.0, "vehicle: c_t must be > 0");
  expect(c_f1 >= 0.0, "vehicle: c_f1 must be >= 0");
  expect(c_f2 >= 0.0, "vehicle: c_f2 must be >= 0");
  expect(wheelbase > 0.0, "vehicle: wheelbase must be > 0");
  expect(v_max > 0.0, "vehicle: v_max must be > 0");
  expect(delta_min < 0.0 && 0.0 < delta_max, "vehicle: require delta_min < 0 < delta_max");
  expect(t_s > 0.0, "vehicle: t_s must be > 0");
}

double wrap_angle(double angle) {
  constexpr double pi = std::numbers::pi;
  if (angle > -pi && angle <= pi) return angle;
  double r = std::remainder(angle, 2.0 * pi);  // in [-pi, pi]
  if (r <= -pi) r += 2.0 * pi;
  return r;
}

double resistive_force(double v_prev, const VehicleParams& params) {
  expect(v_prev >= 0.0, "resistive_force: velocity must be nonnegative");
  return v_prev * (v_prev * params.c_f1 + params.c_f2);
}

VehicleState step_dynamics(const VehicleState& state, double throttle, double steering,
                           const VehicleParams& params) {
  expect(throttle >= 0.0 && throttle <= 1.0, "step_dynamics: throttle outside [0, 1]");
  expect(steering >= params.delta_min && steering <= params.delta_max,
         "step_dynamics: steering outside [delta_min, delta_max]");

  const double accel = params.c_t * throttle - resistive_force(state.v_joint, params);
  const double v = std::clamp(state.v_joint + params.t_s * accel, 0.0, params.v_max);

  VehicleState next;
  next.v_joint = v;
  const double yaw = state.yaw + params.t_s * (v / params.wheelbase) * std::tan(steering);
  next.position = state.position + Vec2::from_angle(yaw) * (params.t_s * v);
  next.yaw = wrap_angle(yaw);
  return next;
}

}  // namespace depthnav
