#pragma once

#include <cstdint>
#include <vector>

#include "depthnav/geometry.hpp"
#include "depthnav/lidar.hpp"
#include "depthnav/vehicle.hpp"

namespace depthnav {

struct TaskOptions {
  int max_episode_steps = 10000;
  double footprint_radius = kDefaultFootprintRadius;
  double throttle_reward_scale = 5.0;
  double flip_penalty = 2.0;  // subtracted on a saturated opposite-sign steering flip
  bool penalty_on_raw = false;  // test the flip on unclamped policy outputs instead
  bool normalize_obs = true;    // divide depths by r_max
  double throttle_cap = 1.0;    // evaluation-time speed limiter; 1 disables it

  void validate() const;
};

struct EnvConfig {
  VehicleParams vehicle;
  LidarConfig lidar;
  TaskOptions task;

  void validate() const {
    vehicle.validate();
    lidar.validate();
    task.validate();
  }
};

struct Observation {
  std::vector<double> depths;
};

/// Normalized policy output; components are clamped to [-1, 1] before use.
struct RawAction {
  double a_t = 0.0;
  double a_delta = 0.0;
};

struct ControlInput {
  double throttle = 0.0;  // [0, 1]
  double steering = 0.0;  // radians, [delta_min, delta_max]
};

struct EpisodeState {
  VehicleState vehicle;
  int step_count = 0;
  double prev_a_delta = 0.0;      // clamped steering action of the previous step
  double prev_a_delta_raw = 0.0;  // same, before clamping
  double sim_time = 0.0;
  double cumulative_reward = 0.0;
  bool finished = false;
  std::uint64_t seed = 0;

  bool operator==(const EpisodeState&) const = default;
};

struct StepInfo {
  double speed = 0.0;
  Vec2 position;
  double yaw = 0.0;
  RawAction clamped;
  ControlInput control;
  double throttle_reward = 0.0;
  double penalty = 0.0;
  bool flip = false;  // saturated opposite-sign steering on this step
  LidarScan scan;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;  // collision
  bool truncated = false;   // step cap reached without collision
  StepInfo info;
};

RawAction clamp_action(const RawAction& raw);

/// Clamps, floors throttle at 0, and scales steering so a_delta = +-1 maps to +-delta_max.
ControlInput map_action(const RawAction& raw, const VehicleParams& params);

/// True when two consecutive steering actions are saturated at opposite bounds.
bool is_saturated_flip(double a_delta_prev, double a_delta_curr);

/// scale*T^2, minus the flip penalty when the steering flips between saturated bounds.
double compute_reward(double throttle, double a_delta_prev, double a_delta_curr,
                      double throttle_reward_scale = 5.0, double flip_penalty = 2.0);

Observation make_observation(const LidarScan& scan, const LidarConfig& lidar, const TaskOptions& task);

struct ResetResult {
  Observation observation;
  EpisodeState episode;
};

/// Places the vehicle at rest at the scene's start pose. Deterministic in `seed`.
ResetResult reset(const Scene& scene, const EnvConfig& config, std::uint64_t seed);

struct StepOutcome {
  StepResult result;
  EpisodeState episode;
};

StepOutcome step(const EpisodeState& episode, const RawAction& raw, const Scene& scene, const EnvConfig& config);

}  // namespace depthnav
