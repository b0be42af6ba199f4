// depthnav command-line entry point: training, evaluation, self-checks,
// scene validation and trajectory replay.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "depthnav/config.hpp"
#include "depthnav/eval.hpp"
#include "depthnav/ppo.hpp"
#include "depthnav/scene_io.hpp"
#include "depthnav/selfcheck.hpp"
#include "depthnav/text.hpp"

namespace fs = std::filesystem;
using namespace depthnav;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr const char* kCurveHeader = "episode,steps,return,moving_avg_1000";

std::string curve_line(const EpisodeRecord& r) {
  return std::to_string(r.episode) + ',' + std::to_string(r.steps) + ',' + format_double(r.episode_return) + ',' +
         format_double(r.moving_avg);
}

// Keeps the header and the first `episodes` rows of an existing curve, so a
// resumed run appends exactly what an uninterrupted one would have written.
void truncate_curve(const fs::path& path, long episodes) {
  std::vector<std::string> keep;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line) && static_cast<long>(keep.size()) < episodes + 1) keep.push_back(line);
  in.close();
  if (keep.empty() || keep.front() != kCurveHeader) throw std::runtime_error("learning curve " + path.string() + " is malformed");
  if (static_cast<long>(keep.size()) != episodes + 1) {
    throw std::runtime_error("learning curve " + path.string() + " has fewer rows than the checkpoint's episode count");
  }
  std::ofstream out(path, std::ios::trunc);
  for (const std::string& l : keep) out << l << '\n';
}

void write_run_info(const RunConfig& cfg, const fs::path& config_path, int threads, bool resumed) {
  nlohmann::json j = {{"program", "depthnav"},
                      {"version", kVersion},
                      {"compiler", __VERSION__},
                      {"config", fs::absolute(config_path).string()},
                      {"seed", cfg.seed},
                      {"threads", threads},
                      {"hardware_concurrency", std::thread::hardware_concurrency()},
                      {"resumed", resumed}};
  std::ofstream out(cfg.output_dir / "run_info.json");
  out << j.dump(2) << '\n';
}

int cmd_train(const fs::path& config_path, bool resume) {
  RunConfig cfg = load_config(config_path);
  cfg.validate();
  const Scene scene = load_scene(cfg.scene, cfg.env.task.footprint_radius);
  fs::create_directories(cfg.output_dir);
  save_config(cfg, cfg.output_dir / "resolved_config.ini");

  TrainerOptions opt;
  opt.checkpoint_path = cfg.output_dir / "checkpoint.json";
  opt.checkpoint_interval = cfg.checkpoint_interval;
  Trainer trainer(scene, cfg.env, cfg.hp, cfg.seed, opt);
  const fs::path curve_path = cfg.output_dir / "learning_curve.csv";
  if (resume) {
    trainer.load_checkpoint(opt.checkpoint_path);
    truncate_curve(curve_path, trainer.episodes());
    std::printf("resumed at step %ld, episode %ld\n", trainer.global_step(), trainer.episodes());
  } else {
    std::ofstream(curve_path, std::ios::trunc) << kCurveHeader << '\n';
  }
  const int threads = resolve_thread_count();
  write_run_info(cfg, config_path, threads, resume);

  std::ofstream curve(curve_path, std::ios::app);
  long next_log = cfg.log_interval > 0 ? (trainer.global_step() / cfg.log_interval + 1) * cfg.log_interval : -1;
  TrainCallbacks cb;
  cb.on_episode = [&](const EpisodeRecord& r) { curve << curve_line(r) << '\n'; };
  cb.on_update = [&](const UpdateStats& s) {
    curve.flush();
    if (next_log > 0 && s.global_step >= next_log) {
      std::printf("step %ld  episodes %ld  avg_return %.2f  loss %.4f  kl %.4f  clip %.3f  %.0f steps/s\n",
                  s.global_step, s.episodes, s.moving_avg, static_cast<double>(s.last_loss.loss),
                  static_cast<double>(s.last_loss.approx_kl), static_cast<double>(s.last_loss.clip_fraction),
                  s.steps_per_second);
      std::fflush(stdout);
      while (next_log <= s.global_step) next_log += cfg.log_interval;
    }
  };
  trainer.run(cb);
  curve.flush();
  std::printf("done: %ld steps, %ld episodes, %d updates; checkpoint %s\n", trainer.global_step(), trainer.episodes(),
              trainer.updates(), opt.checkpoint_path.string().c_str());
  return 0;
}

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  int episodes = -1;
  bool deterministic = false;
  bool stochastic = false;
  std::string controller;
  std::string compare;
  bool crossing = false;
  double throttle_cap = -1.0;
  int max_laps = -1;
  std::string out;
};

void print_summary(const EvalReport& r) {
  std::printf("%-9s episodes %zu  collisions %d  mean_speed %.3f m/s  flip_rate %.4f  coverage %.3f  mean_steps %.1f\n",
              r.controller.c_str(), r.episodes.size(), r.collisions, r.mean_speed, r.mean_flip_rate, r.mean_coverage,
              r.mean_steps);
  if (r.has_finish) {
    std::printf("%-9s laps %d  collision_free_laps %d  mean_lap_time %.3f s\n", r.controller.c_str(), r.total_laps,
                r.collision_free_laps, r.mean_lap_time);
  }
  std::printf("%-9s %.0f steps/s  act latency %.2f us\n", r.controller.c_str(), r.steps_per_second,
              r.mean_act_latency_us);
}

int cmd_eval(const EvalArgs& a) {
  RunConfig cfg = load_config(a.config);
  if (!a.controller.empty()) {
    auto k = parse_controller_kind(a.controller);
    if (!k) throw ConfigError("unknown controller '" + a.controller + "'");
    cfg.controller = *k;
  }
  if (!a.checkpoint.empty()) cfg.checkpoint = fs::absolute(a.checkpoint);
  if (a.episodes > 0) cfg.eval.episodes = a.episodes;
  if (a.deterministic) cfg.eval.deterministic = true;
  if (a.stochastic) cfg.eval.deterministic = false;
  if (a.crossing) cfg.eval.crossing = true;
  if (a.throttle_cap > 0.0) cfg.env.task.throttle_cap = a.throttle_cap;
  if (a.max_laps >= 0) cfg.eval.max_laps = a.max_laps;
  cfg.validate();

  std::vector<ControllerKind> kinds{cfg.controller};
  if (!a.compare.empty()) {
    auto k = parse_controller_kind(a.compare);
    if (!k) throw ConfigError("unknown controller '" + a.compare + "'");
    kinds.push_back(*k);
  }
  std::optional<PolicyParams> policy;
  for (ControllerKind k : kinds) {
    if (k == ControllerKind::kPolicy && !policy) {
      if (cfg.checkpoint.empty()) throw ConfigError("policy evaluation needs --checkpoint");
      Architecture arch;
      arch.input = cfg.env.lidar.n_rays;
      policy = load_policy(cfg.checkpoint, arch);
    }
  }

  const Scene scene = load_scene(cfg.scene, cfg.env.task.footprint_radius);
  const fs::path out_dir = a.out.empty() ? cfg.output_dir / "eval" : fs::path(a.out);
  fs::create_directories(out_dir);
  save_config(cfg, out_dir / "resolved_config.ini");
  std::vector<EvalReport> reports;
  for (ControllerKind k : kinds) {
    const fs::path dir = out_dir / to_string(k);
    EvalReport r = evaluate(scene, cfg.env, k, policy ? &*policy : nullptr, cfg.pid, cfg.eval, cfg.seed, dir);
    write_report(r, dir / "report.json");
    print_summary(r);
    reports.push_back(std::move(r));
  }
  if (reports.size() == 2 && reports[0].total_laps > 0 && reports[1].total_laps > 0) {
    std::printf("mean lap time: %s %.3f s, %s %.3f s\n", reports[0].controller.c_str(), reports[0].mean_lap_time,
                reports[1].controller.c_str(), reports[1].mean_lap_time);
  }
  return 0;
}

int cmd_selfcheck_grad(int instances, std::uint64_t seed) {
  GradCheckOptions o;
  o.instances = instances;
  o.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const GradCheckResult r = grad_check(o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("grad check: %d instances, %zu entries, max relative error %.3e (%s), %.1f s\n", r.instances, r.entries,
              r.max_rel_error, r.worst_tensor.empty() ? "-" : r.worst_tensor.c_str(), secs);
  std::printf("%s\n", r.pass ? "PASS" : "FAIL");
  return r.pass ? 0 : 1;
}

int cmd_selfcheck_raycast(int scenes, std::uint64_t seed) {
  RaycastCheckOptions o;
  o.scenes = scenes;
  o.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  const RaycastCheckResult r = raycast_check(o);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("raycast check: %d rays (%d hits), flag mismatches %d, max distance error %.3e m, %.1f s\n", r.rays,
              r.hits, r.flag_mismatches, r.max_distance_error, secs);
  std::printf("%s\n", r.pass ? "PASS" : "FAIL");
  return r.pass ? 0 : 1;
}

int cmd_scene_validate(const fs::path& path, double footprint) {
  const Scene s = load_scene(path, footprint);
  std::printf("%s: ok (%zu segments, %zu circles%s)\n", path.string().c_str(), s.segments.size(), s.circles.size(),
              s.finish ? ", finish line" : "");
  return 0;
}

int cmd_replay(const fs::path& csv, const std::string& config, const std::string& scene_path) {
  EnvConfig env;
  fs::path scene_file;
  if (!config.empty()) {
    const RunConfig cfg = load_config(config);
    env = cfg.env;
    scene_file = cfg.scene;
  }
  fs::path sibling = csv;
  sibling.replace_extension(".scene");
  if (!scene_path.empty()) scene_file = scene_path;
  else if (fs::exists(sibling)) scene_file = sibling;
  if (scene_file.empty()) throw ConfigError("replay needs --config or --scene to know the scene");
  const Scene scene = load_scene(scene_file, env.task.footprint_radius);
  const auto rows = read_trajectory_csv(csv);
  const ReplayResult r = replay(rows, scene, env);
  std::printf("replay: %d rows, %d mismatches, max state error %.3e\n", r.rows, r.mismatches, r.max_state_error);
  if (r.mismatches > 0) std::printf("first mismatch: %s\n", r.first_mismatch.c_str());
  return r.mismatches == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depthnav: LiDAR-to-control PPO simulator and trainer"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string train_config;
  bool resume = false;
  auto* train = app.add_subcommand("train", "Train a policy from a config file");
  train->add_option("config", train_config, "Run config (.ini)")->required()->check(CLI::ExistingFile);
  train->add_flag("--resume", resume, "Continue from the checkpoint in the output directory");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Evaluate a policy or baseline controller");
  eval->add_option("config", ev.config, "Run config (.ini)")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", ev.checkpoint, "Policy checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--episodes", ev.episodes, "Number of episodes")->check(CLI::PositiveNumber);
  auto* det = eval->add_flag("--deterministic", ev.deterministic, "Act with the policy mean");
  eval->add_flag("--stochastic", ev.stochastic, "Sample actions from the policy")->excludes(det);
  eval->add_option("--controller", ev.controller, "policy | pid | null | straight")
      ->check(CLI::IsMember({"policy", "pid", "null", "straight"}));
  eval->add_option("--compare", ev.compare, "Also evaluate this controller")
      ->check(CLI::IsMember({"policy", "pid", "null", "straight"}));
  eval->add_flag("--crossing", ev.crossing, "Seeded crossing-obstacle scenarios");
  eval->add_option("--throttle-cap", ev.throttle_cap, "Upper bound on applied throttle")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--max-laps", ev.max_laps, "End an episode after this many laps (0: no limit)")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--out", ev.out, "Output directory (default: <output_dir>/eval)");

  auto* selfcheck = app.add_subcommand("selfcheck", "Numerical self-checks");
  selfcheck->require_subcommand(1);
  int instances = 20, scenes = 1000;
  std::uint64_t check_seed = 0;
  auto* grad = selfcheck->add_subcommand("grad", "Analytic vs finite-difference loss gradients");
  grad->add_option("--instances", instances, "Random instances")->check(CLI::PositiveNumber);
  grad->add_option("--seed", check_seed, "Seed");
  auto* raycast = selfcheck->add_subcommand("raycast", "Ray casting vs a marching oracle");
  raycast->add_option("--scenes", scenes, "Random scenes")->check(CLI::PositiveNumber);
  raycast->add_option("--seed", check_seed, "Seed");

  auto* scene_cmd = app.add_subcommand("scene", "Scene file utilities");
  scene_cmd->require_subcommand(1);
  std::string scene_path;
  double footprint = kDefaultFootprintRadius;
  auto* validate = scene_cmd->add_subcommand("validate", "Parse and validate a scene file");
  validate->add_option("path", scene_path, "Scene file")->required();
  validate->add_option("--footprint", footprint, "Footprint radius for the start-pose check");

  std::string replay_csv, replay_config, replay_scene;
  auto* replay_cmd = app.add_subcommand("replay", "Re-simulate a trajectory CSV and check consistency");
  replay_cmd->add_option("trajectory", replay_csv, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--config", replay_config, "Run config the trajectory came from")->check(CLI::ExistingFile);
  replay_cmd->add_option("--scene", replay_scene, "Scene file (overrides the config)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*train) return cmd_train(train_config, resume);
    if (*eval) return cmd_eval(ev);
    if (*grad) return cmd_selfcheck_grad(instances, check_seed);
    if (*raycast) return cmd_selfcheck_raycast(scenes, check_seed);
    if (*validate) return cmd_scene_validate(scene_path, footprint);
    if (*replay_cmd) return cmd_replay(replay_csv, replay_config, replay_scene);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
