#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "depthnav/baseline.hpp"
#include "depthnav/geometry.hpp"
#include "depthnav/nn.hpp"
#include "depthnav/rng.hpp"
#include "depthnav/task_env.hpp"

namespace depthnav {

/// kNull holds a_T = -1 and never moves; kStraight holds a_T = 1 with zero steering.
enum class ControllerKind { kPolicy, kPid, kNull, kStraight };

std::string to_string(ControllerKind kind);
std::optional<ControllerKind> parse_controller_kind(std::string_view name);

struct EvalOptions {
  int episodes = 10;
  bool deterministic = true;  // policy mean instead of a sampled action
  int max_laps = 0;           // end an episode after this many laps; 0 = no limit
  double coverage_cell = 0.5;
  bool crossing = false;  // per-episode seeded crossing-obstacle scenarios
};

class Controller {
 public:
  virtual ~Controller() = default;
  virtual void reset(std::uint64_t episode_seed) = 0;
  virtual RawAction act(const Observation& obs, const LidarScan& scan) = 0;
};

class PolicyController : public Controller {
 public:
  PolicyController(const PolicyParams& params, bool deterministic);
  void reset(std::uint64_t episode_seed) override;
  RawAction act(const Observation& obs, const LidarScan& scan) override;

 private:
  const PolicyParams& params_;
  bool deterministic_;
  Rng rng_;
  std::vector<float> buffer_;
};

class PidAdapter : public Controller {
 public:
  PidAdapter(const PidParams& params, const EnvConfig& env) : pid_(params, env.lidar, env.vehicle.t_s) {}
  void reset(std::uint64_t) override { pid_.reset(); }
  RawAction act(const Observation&, const LidarScan& scan) override { return pid_.act(scan); }

 private:
  PidController pid_;
};

class ConstantController : public Controller {
 public:
  explicit ConstantController(RawAction action) : action_(action) {}
  void reset(std::uint64_t) override {}
  RawAction act(const Observation&, const LidarScan&) override { return action_; }

 private:
  RawAction action_;
};

/// `policy` must outlive the controller and is required only for kPolicy.
std::unique_ptr<Controller> make_controller(ControllerKind kind, const PolicyParams* policy, const PidParams& pid,
                                            const EnvConfig& env, bool deterministic);

/// Counts forward crossings of a finish segment. "Forward" is the side of the
/// segment normal that the start heading points into; crossings closer than
/// `hysteresis` seconds to the previous one (or to the start) are ignored.
class LapCounter {
 public:
  LapCounter(const Segment& finish, const Pose2& start, double hysteresis = 5.0);

  /// Returns the lap time when the move from `from` to `to` completes a lap at time `t`.
  std::optional<double> update(Vec2 from, Vec2 to, double t);
  int laps() const { return static_cast<int>(lap_times_.size()); }
  const std::vector<double>& lap_times() const { return lap_times_; }

 private:
  Segment finish_;
  Vec2 forward_;
  double hysteresis_;
  double last_ = 0.0;
  std::vector<double> lap_times_;
};

/// Fraction of reachable free grid cells visited. A cell is free when its
/// center is collision-free at t = 0 and reachable from the start cell
/// through free 4-neighbours.
class CoverageTracker {
 public:
  CoverageTracker(const Scene& scene, double cell, double footprint_radius);

  void visit(Vec2 p);
  double fraction() const { return free_ == 0 ? 0.0 : static_cast<double>(visited_) / static_cast<double>(free_); }
  std::size_t free_cells() const { return free_; }
  std::size_t visited_cells() const { return visited_; }

 private:
  std::optional<std::size_t> index(Vec2 p) const;

  Bounds bounds_;
  double cell_;
  int nx_ = 0, ny_ = 0;
  std::vector<char> free_mask_;
  std::vector<char> visited_mask_;
  std::size_t free_ = 0;
  std::size_t visited_ = 0;
};

struct CrossingScenario {
  Scene scene;
  int horizon_steps = 0;
  double crossing_distance = 0.0;  // along the start heading
  double time_offset = 0.0;        // obstacle lateness relative to the straight driver
};

/// Moves the base scene's first moving circle so that it crosses the start
/// heading line perpendicularly, at a seeded distance ahead, arriving when a
/// straight-driving vehicle at the configured throttle cap would (plus a
/// seeded offset within +-0.5 s). The horizon ends 3 s after that arrival.
CrossingScenario crossing_scenario(const Scene& base, const EnvConfig& env, std::uint64_t seed);

struct EpisodeReport {
  int index = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  bool collision = false;
  bool truncated = false;
  double episode_return = 0.0;
  std::vector<double> lap_times;
  double mean_speed = 0.0;
  double coverage = 0.0;
  int flips = 0;
  double flip_rate = 0.0;  // flips per step
  double act_seconds = 0.0;  // wall time spent inside the controller
};

struct EvalReport {
  std::string controller;
  std::string scene;
  bool deterministic = true;
  bool has_finish = false;
  std::vector<EpisodeReport> episodes;

  int collisions = 0;
  int total_laps = 0;
  int collision_free_laps = 0;  // laps completed in episodes that never collided
  double mean_lap_time = 0.0;   // over all laps; 0 when there are none
  double mean_speed = 0.0;
  double mean_coverage = 0.0;
  double mean_flip_rate = 0.0;
  double mean_return = 0.0;
  double mean_steps = 0.0;
  double steps_per_second = 0.0;
  double mean_act_latency_us = 0.0;

  void aggregate();
};

struct TrajectoryRow {
  int step = 0;
  double sim_time = 0.0;
  double x = 0.0, y = 0.0, yaw = 0.0, v = 0.0;
  double a_t = 0.0, a_delta = 0.0;  // controller output before clamping
  double throttle = 0.0, steering = 0.0;
  double reward = 0.0;
  bool terminated = false;
};

/// Runs one episode from reset until collision, truncation, or `max_laps`.
EpisodeReport run_episode(const Scene& scene, const EnvConfig& env, Controller& controller, std::uint64_t seed,
                          const EvalOptions& options, std::vector<TrajectoryRow>* trajectory = nullptr);

/// Runs options.episodes episodes in parallel. Episode i uses seed
/// Rng::derive(seed, 2'000'000 + i). When `trajectory_dir` is set, writes
/// episode_NNN.csv (and episode_NNN.scene for crossing scenarios) there.
EvalReport evaluate(const Scene& scene, const EnvConfig& env, ControllerKind kind, const PolicyParams* policy,
                    const PidParams& pid, const EvalOptions& options, std::uint64_t seed,
                    const std::filesystem::path& trajectory_dir = {}, int threads = 0);

std::string report_to_json(const EvalReport& report);
void write_report(const EvalReport& report, const std::filesystem::path& path);

void write_trajectory_csv(const std::vector<TrajectoryRow>& rows, const std::filesystem::path& path);
std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path);

struct ReplayResult {
  int rows = 0;
  int mismatches = 0;
  double max_state_error = 0.0;
  std::string first_mismatch;
};

/// Re-simulates a trajectory from its recorded controller outputs and checks
/// every recorded state, control, reward and termination flag. A scan is
/// recomputed at each step to confirm it stays well-formed.
ReplayResult replay(const std::vector<TrajectoryRow>& rows, const Scene& scene, const EnvConfig& env,
                    std::uint64_t seed = 0);

}  // namespace depthnav
