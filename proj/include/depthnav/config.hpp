#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "depthnav/baseline.hpp"
#include "depthnav/eval.hpp"
#include "depthnav/ppo.hpp"
#include "depthnav/task_env.hpp"

namespace depthnav {


/// Everything a run needs, serialized as a sectioned key = value file:
///
///   [run]     scene seed output_dir controller checkpoint checkpoint_interval log_interval
///   [ppo]     gamma lam lr rollout_size batch_size n_epochs clip_eps vf_coef ent_coef
///             total_steps max_grad_norm n_envs normalize_advantages optimizer beta1 beta2 adam_eps
///   [vehicle] c_t c_f1 c_f2 wheelbase v_max delta_min delta_max t_s
///   [lidar]   mount_x mount_y mount_z n_rays fov r_max
///   [task]    max_episode_steps footprint_radius throttle_reward_scale flip_penalty
///             penalty_on_raw normalize_obs throttle_cap
///   [pid]     kp ki kd target_wall_distance cruise_throttle side slowdown_distance
///   [eval]    episodes deterministic max_laps coverage_cell crossing
///
/// Relative paths resolve against the config file's directory.
struct RunConfig {
  std::filesystem::path scene;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  ControllerKind controller = ControllerKind::kPolicy;
  std::filesystem::path checkpoint;
  long checkpoint_interval = 0;
  long log_interval = 10240;

  Hyperparams hp;
  EnvConfig env;
  PidParams pid;
  EvalOptions eval;

  void validate() const;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
/// Every field, with paths made absolute; parse_config(format_config(c)) == c.
std::string format_config(const RunConfig& config);
void save_config(const RunConfig& config, const std::filesystem::path& path);

}  // namespace depthnav
