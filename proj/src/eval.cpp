#include "depthnav/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "depthnav/contract.hpp"
#include "depthnav/ppo.hpp"
#include "depthnav/scene_io.hpp"
#include "depthnav/text.hpp"

namespace depthnav {

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kPolicy: return "policy";
    case ControllerKind::kPid: return "pid";
    case ControllerKind::kNull: return "null";
    case ControllerKind::kStraight: return "straight";
  }
  return "?";
}

std::optional<ControllerKind> parse_controller_kind(std::string_view name) {
  if (name == "policy") return ControllerKind::kPolicy;
  if (name == "pid") return ControllerKind::kPid;
  if (name == "null") return ControllerKind::kNull;
  if (name == "straight") return ControllerKind::kStraight;
  return std::nullopt;
}

PolicyController::PolicyController(const PolicyParams& params, bool deterministic)
    : params_(params), deterministic_(deterministic), buffer_(static_cast<std::size_t>(params.arch().input)) {}

void PolicyController::reset(std::uint64_t episode_seed) { rng_ = Rng(Rng::derive(episode_seed, 7)); }

RawAction PolicyController::act(const Observation& obs, const LidarScan&) {
  expect(obs.depths.size() == buffer_.size(), "policy: observation size does not match the network input");
  std::copy(obs.depths.begin(), obs.depths.end(), buffer_.begin());
  if (deterministic_) {
    const PolicyOutput<float> out = forward(params_, std::span<const float>(buffer_));
    return {static_cast<double>(out.mean[0]), static_cast<double>(out.mean[1])};
  }
  const SampledAction<float> s = sample_action(params_, std::span<const float>(buffer_), rng_);
  return {static_cast<double>(s.action[0]), static_cast<double>(s.action[1])};
}

std::unique_ptr<Controller> make_controller(ControllerKind kind, const PolicyParams* policy, const PidParams& pid,
                                            const EnvConfig& env, bool deterministic) {
  switch (kind) {
    case ControllerKind::kPolicy:
      expect(policy != nullptr, "policy controller needs parameters");
      return std::make_unique<PolicyController>(*policy, deterministic);
    case ControllerKind::kPid: return std::make_unique<PidAdapter>(pid, env);
    case ControllerKind::kNull: return std::make_unique<ConstantController>(RawAction{-1.0, 0.0});
    case ControllerKind::kStraight: return std::make_unique<ConstantController>(RawAction{1.0, 0.0});
  }
  throw ContractError("unknown controller kind");
}

// ---------------------------------------------------------------------------

LapCounter::LapCounter(const Segment& finish, const Pose2& start, double hysteresis)
    : finish_(finish), hysteresis_(hysteresis) {
  const Vec2 d = finish.b - finish.a;
  expect(d.norm() > 0.0, "lap counter: zero-length finish line");
  Vec2 n = Vec2{-d.y, d.x} * (1.0 / d.norm());
  if (n.dot(Vec2::from_angle(start.yaw)) < 0.0) n = n * -1.0;
  forward_ = n;
}

std::optional<double> LapCounter::update(Vec2 from, Vec2 to, double t) {
  if (from == to) return std::nullopt;
  if ((to - from).dot(forward_) <= 0.0) return std::nullopt;
  if (!segments_intersect(Segment{from, to}, finish_)) return std::nullopt;
  if (t - last_ < hysteresis_) return std::nullopt;
  const double lap = t - last_;
  last_ = t;
  lap_times_.push_back(lap);
  return lap;
}

CoverageTracker::CoverageTracker(const Scene& scene, double cell, double footprint_radius)
    : bounds_(scene.bounds), cell_(cell) {
  expect(cell > 0.0, "coverage: cell size must be > 0");
  nx_ = std::max(1, static_cast<int>(std::ceil(bounds_.width() / cell)));
  ny_ = std::max(1, static_cast<int>(std::ceil(bounds_.height() / cell)));
  const std::size_t n = static_cast<std::size_t>(nx_) * static_cast<std::size_t>(ny_);
  std::vector<char> clear(n, 0);
  for (int j = 0; j < ny_; ++j) {
    for (int i = 0; i < nx_; ++i) {
      const Vec2 c{bounds_.xmin + (i + 0.5) * cell, bounds_.ymin + (j + 0.5) * cell};
      clear[static_cast<std::size_t>(j) * nx_ + i] = !collision_check(scene, c, footprint_radius, 0.0);
    }
  }
  free_mask_.assign(n, 0);
  visited_mask_.assign(n, 0);

  // Flood fill from the clear cell nearest the start position.
  const Vec2 s = scene.start.position;
  const int si = std::clamp(static_cast<int>(std::floor((s.x - bounds_.xmin) / cell)), 0, nx_ - 1);
  const int sj = std::clamp(static_cast<int>(std::floor((s.y - bounds_.ymin) / cell)), 0, ny_ - 1);
  std::optional<std::size_t> seed;
  double best = std::numeric_limits<double>::infinity();
  for (int dj = -1; dj <= 1; ++dj) {
    for (int di = -1; di <= 1; ++di) {
      const int i = si + di, j = sj + dj;
      if (i < 0 || j < 0 || i >= nx_ || j >= ny_) continue;
      const std::size_t k = static_cast<std::size_t>(j) * nx_ + i;
      const Vec2 c{bounds_.xmin + (i + 0.5) * cell, bounds_.ymin + (j + 0.5) * cell};
      if (clear[k] && (c - s).norm() < best) {
        best = (c - s).norm();
        seed = k;
      }
    }
  }
  if (!seed) return;
  std::deque<std::size_t> queue{*seed};
  free_mask_[*seed] = 1;
  while (!queue.empty()) {
    const std::size_t k = queue.front();
    queue.pop_front();
    ++free_;
    const int i = static_cast<int>(k % nx_), j = static_cast<int>(k / nx_);
    const int ni[4] = {i - 1, i + 1, i, i};
    const int nj[4] = {j, j, j - 1, j + 1};
    for (int q = 0; q < 4; ++q) {
      if (ni[q] < 0 || nj[q] < 0 || ni[q] >= nx_ || nj[q] >= ny_) continue;
      const std::size_t m = static_cast<std::size_t>(nj[q]) * nx_ + ni[q];
      if (clear[m] && !free_mask_[m]) {
        free_mask_[m] = 1;
        queue.push_back(m);
      }
    }
  }
}

std::optional<std::size_t> CoverageTracker::index(Vec2 p) const {
  const int i = static_cast<int>(std::floor((p.x - bounds_.xmin) / cell_));
  const int j = static_cast<int>(std::floor((p.y - bounds_.ymin) / cell_));
  if (i < 0 || j < 0 || i >= nx_ || j >= ny_) return std::nullopt;
  return static_cast<std::size_t>(j) * nx_ + i;
}

void CoverageTracker::visit(Vec2 p) {
  const auto k = index(p);
  if (!k || !free_mask_[*k] || visited_mask_[*k]) return;
  visited_mask_[*k] = 1;
  ++visited_;
}

// ---------------------------------------------------------------------------

CrossingScenario crossing_scenario(const Scene& base, const EnvConfig& env, std::uint64_t seed) {
  auto it = std::find_if(base.circles.begin(), base.circles.end(), [](const CircleObstacle& c) { return c.moving(); });
  expect(it != base.circles.end(), "crossing scenario: base scene has no moving circle");
  const double speed = it->velocity.norm();

  Rng rng(seed);
  const double distance = rng.uniform(3.0, 5.0);
  const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double offset = rng.uniform(-0.5, 0.5);

  // Time for a straight driver at the throttle cap to bring its center to the crossing point.
  const Vec2 heading = Vec2::from_angle(base.start.yaw);
  VehicleState state{base.start.position, base.start.yaw, 0.0};
  const ControlInput u{std::min(1.0, env.task.throttle_cap), 0.0};
  int k = 0;
  while ((state.position - base.start.position).dot(heading) < distance) {
    state = step_dynamics(state, u.throttle, u.steering, env.vehicle);
    if (++k > 1'000'000) throw ContractError("crossing scenario: vehicle never reaches the crossing point");
  }
  const double arrival = k * env.vehicle.t_s;

  const Vec2 crossing = base.start.position + heading * distance;
  const Vec2 dir = heading.rotated(side * M_PI / 2.0);
  CrossingScenario out;
  out.scene = base;
  CircleObstacle& c = out.scene.circles[static_cast<std::size_t>(it - base.circles.begin())];
  c.velocity = dir * speed;
  c.center = crossing - dir * (speed * (arrival + offset));
  out.crossing_distance = distance;
  out.time_offset = offset;
  out.horizon_steps = static_cast<int>(std::ceil((arrival + 3.0) / env.vehicle.t_s));
  validate_scene(out.scene, env.task.footprint_radius);
  return out;
}

// ---------------------------------------------------------------------------

EpisodeReport run_episode(const Scene& scene, const EnvConfig& env, Controller& controller, std::uint64_t seed,
                          const EvalOptions& options, std::vector<TrajectoryRow>* trajectory) {
  ResetResult r = reset(scene, env, seed);
  controller.reset(seed);
  EpisodeState episode = r.episode;
  Observation obs = std::move(r.observation);
  LidarScan scan_now = scan(scene, episode.vehicle, env.lidar, 0.0);

  std::optional<LapCounter> laps;
  if (scene.finish) laps.emplace(*scene.finish, scene.start);
  CoverageTracker coverage(scene, options.coverage_cell, env.task.footprint_radius);
  coverage.visit(episode.vehicle.position);

  EpisodeReport report;
  report.seed = seed;
  double speed_sum = 0.0;
  if (trajectory) trajectory->clear();
  while (!episode.finished) {
    const auto t0 = std::chrono::steady_clock::now();
    const RawAction action = controller.act(obs, scan_now);
    report.act_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const Vec2 before = episode.vehicle.position;
    StepOutcome out = step(episode, action, scene, env);
    episode = out.episode;
    const StepResult& res = out.result;
    ++report.steps;
    report.episode_return += res.reward;
    speed_sum += res.info.speed;
    report.flips += res.info.flip ? 1 : 0;
    coverage.visit(res.info.position);
    if (laps) laps->update(before, res.info.position, episode.sim_time);
    if (trajectory) {
      trajectory->push_back({episode.step_count, episode.sim_time, res.info.position.x, res.info.position.y,
                             res.info.yaw, res.info.speed, action.a_t, action.a_delta, res.info.control.throttle,
                             res.info.control.steering, res.reward, res.terminated});
    }
    report.collision = res.terminated;
    report.truncated = res.truncated;
    obs = res.observation;
    scan_now = res.info.scan;
    if (options.max_laps > 0 && laps && laps->laps() >= options.max_laps) break;
  }
  if (laps) report.lap_times = laps->lap_times();
  report.mean_speed = report.steps > 0 ? speed_sum / report.steps : 0.0;
  report.flip_rate = report.steps > 0 ? static_cast<double>(report.flips) / report.steps : 0.0;
  report.coverage = coverage.fraction();
  return report;
}

void EvalReport::aggregate() {
  collisions = 0;
  total_laps = 0;
  collision_free_laps = 0;
  double lap_sum = 0.0, speed = 0.0, cov = 0.0, flip = 0.0, ret = 0.0, steps = 0.0;
  for (const EpisodeReport& e : episodes) {
    collisions += e.collision ? 1 : 0;
    total_laps += static_cast<int>(e.lap_times.size());
    if (!e.collision) collision_free_laps += static_cast<int>(e.lap_times.size());
    for (double t : e.lap_times) lap_sum += t;
    speed += e.mean_speed;
    cov += e.coverage;
    flip += e.flip_rate;
    ret += e.episode_return;
    steps += e.steps;
  }
  const double n = episodes.empty() ? 1.0 : static_cast<double>(episodes.size());
  mean_lap_time = total_laps > 0 ? lap_sum / total_laps : 0.0;
  mean_speed = speed / n;
  mean_coverage = cov / n;
  mean_flip_rate = flip / n;
  mean_return = ret / n;
  mean_steps = steps / n;
}

namespace {

std::string episode_stem(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "episode_%03d", index);
  return buf;
}

}  // namespace

EvalReport evaluate(const Scene& scene, const EnvConfig& env, ControllerKind kind, const PolicyParams* policy,
                    const PidParams& pid, const EvalOptions& options, std::uint64_t seed,
                    const std::filesystem::path& trajectory_dir, int threads) {
  expect(options.episodes > 0, "evaluate: episodes must be > 0");
  if (kind == ControllerKind::kPolicy) {
    expect(policy != nullptr, "evaluate: policy controller needs parameters");
    expect(policy->arch().input == env.lidar.n_rays, "evaluate: policy input size does not match the lidar");
  }
  if (!trajectory_dir.empty()) std::filesystem::create_directories(trajectory_dir);

  EvalReport report;
  report.controller = to_string(kind);
  report.scene = scene.name;
  report.deterministic = options.deterministic;
  report.has_finish = scene.finish.has_value();
  report.episodes.resize(static_cast<std::size_t>(options.episodes));

  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    std::vector<TrajectoryRow> rows;
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= options.episodes) return;
      try {
        const std::uint64_t ep_seed = Rng::derive(seed, 2'000'000 + static_cast<std::uint64_t>(i));
        Scene ep_scene = scene;
        EnvConfig ep_env = env;
        if (options.crossing) {
          CrossingScenario sc = crossing_scenario(scene, env, ep_seed);
          ep_scene = std::move(sc.scene);
          ep_env.task.max_episode_steps = sc.horizon_steps;
        }
        auto controller = make_controller(kind, policy, pid, ep_env, options.deterministic);
        EpisodeReport e = run_episode(ep_scene, ep_env, *controller, ep_seed, options,
                                      trajectory_dir.empty() ? nullptr : &rows);
        e.index = i;
        if (!trajectory_dir.empty()) {
          write_trajectory_csv(rows, trajectory_dir / (episode_stem(i) + ".csv"));
          if (options.crossing) {
            std::ofstream out(trajectory_dir / (episode_stem(i) + ".scene"));
            write_scene(out, ep_scene);
          }
        }
        report.episodes[static_cast<std::size_t>(i)] = std::move(e);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = options.episodes;
      }
    }
  };

  const auto t0 = std::chrono::steady_clock::now();
  const int n_threads = std::min(resolve_thread_count(threads), options.episodes);
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  report.aggregate();
  double act = 0.0;
  long steps = 0;
  for (const EpisodeReport& e : report.episodes) {
    act += e.act_seconds;
    steps += e.steps;
  }
  report.steps_per_second = wall > 0.0 ? static_cast<double>(steps) / wall : 0.0;
  report.mean_act_latency_us = steps > 0 ? 1e6 * act / static_cast<double>(steps) : 0.0;
  return report;
}

std::string report_to_json(const EvalReport& r) {
  using nlohmann::json;
  json eps = json::array();
  for (const EpisodeReport& e : r.episodes) {
    json j = {{"index", e.index},
              {"seed", e.seed},
              {"steps", e.steps},
              {"collision", e.collision},
              {"truncated", e.truncated},
              {"return", e.episode_return},
              {"mean_speed", e.mean_speed},
              {"coverage", e.coverage},
              {"flips", e.flips},
              {"flip_rate", e.flip_rate}};
    if (r.has_finish) j["lap_times"] = e.lap_times;
    eps.push_back(std::move(j));
  }
  json out = {{"controller", r.controller},
              {"scene", r.scene},
              {"deterministic", r.deterministic},
              {"episodes", eps},
              {"aggregate",
               {{"episodes", r.episodes.size()},
                {"collisions", r.collisions},
                {"mean_speed", r.mean_speed},
                {"mean_coverage", r.mean_coverage},
                {"mean_flip_rate", r.mean_flip_rate},
                {"mean_return", r.mean_return},
                {"mean_steps", r.mean_steps},
                {"steps_per_second", r.steps_per_second},
                {"mean_act_latency_us", r.mean_act_latency_us}}}};
  if (r.has_finish) {
    out["aggregate"]["total_laps"] = r.total_laps;
    out["aggregate"]["collision_free_laps"] = r.collision_free_laps;
    out["aggregate"]["mean_lap_time"] = r.mean_lap_time;
  }
  return out.dump(2) + "\n";
}

void write_report(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out << report_to_json(report);
}

// ---------------------------------------------------------------------------

namespace {

constexpr const char* kTrajectoryHeader = "step,sim_time,x,y,yaw,v,a_T,a_delta,T,delta,reward,terminated";

}  // namespace

void write_trajectory_csv(const std::vector<TrajectoryRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory " + path.string());
  out << kTrajectoryHeader << '\n';
  for (const TrajectoryRow& r : rows) {
    out << r.step << ',' << format_double(r.sim_time) << ',' << format_double(r.x) << ',' << format_double(r.y) << ','
        << format_double(r.yaw) << ',' << format_double(r.v) << ',' << format_double(r.a_t) << ','
        << format_double(r.a_delta) << ',' << format_double(r.throttle) << ',' << format_double(r.steering) << ','
        << format_double(r.reward) << ',' << (r.terminated ? 1 : 0) << '\n';
  }
}

std::vector<TrajectoryRow> read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTrajectoryHeader) {
    throw std::runtime_error(path.string() + ": unexpected header, want " + kTrajectoryHeader);
  }
  std::vector<TrajectoryRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      auto d = parse_double(trim(field));
      if (!d) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      v.push_back(*d);
    }
    if (v.size() != 12) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 12 columns");
    rows.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], v[9], v[10], v[11] != 0.0});
  }
  return rows;
}

ReplayResult replay(const std::vector<TrajectoryRow>& rows, const Scene& scene, const EnvConfig& env,
                    std::uint64_t seed) {
  ReplayResult result;
  EpisodeState episode = reset(scene, env, seed).episode;
  for (const TrajectoryRow& row : rows) {
    ++result.rows;
    if (episode.finished) {
      ++result.mismatches;
      if (result.first_mismatch.empty()) result.first_mismatch = "step " + std::to_string(row.step) + ": episode already ended";
      break;
    }
    StepOutcome out = step(episode, {row.a_t, row.a_delta}, scene, env);
    episode = out.episode;
    const StepResult& r = out.result;
    const double err = std::max({std::abs(r.info.position.x - row.x), std::abs(r.info.position.y - row.y),
                                 std::abs(wrap_angle(r.info.yaw - row.yaw)), std::abs(r.info.speed - row.v)});
    result.max_state_error = std::max(result.max_state_error, err);
    const bool scan_ok = static_cast<int>(r.info.scan.distances.size()) == env.lidar.n_rays &&
                         std::all_of(r.info.scan.distances.begin(), r.info.scan.distances.end(),
                                     [&](double d) { return d >= 0.0 && d <= env.lidar.r_max; });
    const bool same = err == 0.0 && episode.step_count == row.step && episode.sim_time == row.sim_time &&
                      r.info.control.throttle == row.throttle && r.info.control.steering == row.steering &&
                      r.reward == row.reward && r.terminated == row.terminated && scan_ok;
    if (!same) {
      ++result.mismatches;
      if (result.first_mismatch.empty()) {
        result.first_mismatch = "step " + std::to_string(row.step) + ": recorded state differs from re-simulation";
      }
    }
  }
  return result;
}

}  // namespace depthnav
