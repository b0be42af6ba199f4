#include "depthnav/task_env.hpp"

#include <algorithm>

#include "depthnav/contract.hpp"

namespace depthnav {

namespace {
constexpr double kFlipTolerance = 1e-6;
}

void TaskOptions::validate() const {
  expect(max_episode_steps > 0, "task: max_episode_steps must be > 0");
  expect(footprint_radius > 0.0, "task: footprint_radius must be > 0");
  expect(flip_penalty >= 0.0, "task: flip_penalty must be >= 0");
  expect(throttle_cap > 0.0 && throttle_cap <= 1.0, "task: throttle_cap must lie in (0, 1]");
}

RawAction clamp_action(const RawAction& raw) {
  return {std::clamp(raw.a_t, -1.0, 1.0), std::clamp(raw.a_delta, -1.0, 1.0)};
}

ControlInput map_action(const RawAction& raw, const VehicleParams& params) {
  const RawAction a = clamp_action(raw);
  ControlInput u;
  u.throttle = std::min(std::max(a.a_t, 0.0), 1.0);
  u.steering = std::max(std::min(a.a_delta * params.delta_max, params.delta_max), params.delta_min);
  return u;
}

bool is_saturated_flip(double a_delta_prev, double a_delta_curr) {
  return a_delta_prev * a_delta_curr <= -1.0 + kFlipTolerance;
}

double compute_reward(double throttle, double a_delta_prev, double a_delta_curr, double throttle_reward_scale,
                      double flip_penalty) {
  double r = throttle_reward_scale * throttle * throttle;
  if (is_saturated_flip(a_delta_prev, a_delta_curr)) r -= flip_penalty;
  return r;
}

Observation make_observation(const LidarScan& scan, const LidarConfig& lidar, const TaskOptions& task) {
  Observation obs;
  obs.depths = scan.distances;
  if (task.normalize_obs) {
    for (double& d : obs.depths) d /= lidar.r_max;
  }
  return obs;
}

ResetResult reset(const Scene& scene, const EnvConfig& config, std::uint64_t seed) {
  ResetResult out;
  out.episode.vehicle.position = scene.start.position;
  out.episode.vehicle.yaw = wrap_angle(scene.start.yaw);
  out.episode.seed = seed;
  out.observation = make_observation(scan(scene, out.episode.vehicle, config.lidar, 0.0), config.lidar, config.task);
  return out;
}

StepOutcome step(const EpisodeState& episode, const RawAction& raw, const Scene& scene, const EnvConfig& config) {
  expect(!episode.finished, "step: episode already finished; call reset");

  StepOutcome out;
  EpisodeState& next = out.episode;
  StepResult& res = out.result;
  next = episode;

  const RawAction a = clamp_action(raw);
  ControlInput u = map_action(a, config.vehicle);
  u.throttle = std::min(u.throttle, config.task.throttle_cap);

  next.vehicle = step_dynamics(episode.vehicle, u.throttle, u.steering, config.vehicle);
  next.sim_time = episode.sim_time + config.vehicle.t_s;
  next.step_count = episode.step_count + 1;

  res.info.scan = scan(scene, next.vehicle, config.lidar, next.sim_time);
  res.observation = make_observation(res.info.scan, config.lidar, config.task);

  const bool flip = config.task.penalty_on_raw ? is_saturated_flip(episode.prev_a_delta_raw, raw.a_delta)
                                               : is_saturated_flip(episode.prev_a_delta, a.a_delta);
  res.info.throttle_reward = config.task.throttle_reward_scale * u.throttle * u.throttle;
  res.info.penalty = flip ? -config.task.flip_penalty : 0.0;
  res.info.flip = flip;
  res.reward = res.info.throttle_reward + res.info.penalty;

  res.terminated = collision_check(scene, next.vehicle.position, config.task.footprint_radius, next.sim_time);
  res.truncated = !res.terminated && next.step_count >= config.task.max_episode_steps;

  next.prev_a_delta = a.a_delta;
  next.prev_a_delta_raw = raw.a_delta;
  next.cumulative_reward = episode.cumulative_reward + res.reward;
  next.finished = res.terminated || res.truncated;

  res.info.speed = next.vehicle.v_joint;
  res.info.position = next.vehicle.position;
  res.info.yaw = next.vehicle.yaw;
  res.info.clamped = a;
  res.info.control = u;
  return out;
}

}  // namespace depthnav
