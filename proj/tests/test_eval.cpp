#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <json.hpp>

#include "depthnav/eval.hpp"
#include "depthnav/scene_io.hpp"

using namespace depthnav;

namespace {

Scene load_track(const std::string& name) {
  return load_scene(std::string(DEPTHNAV_SOURCE_DIR) + "/tracks/" + name + ".scene");
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("controller names round-trip") {
  for (ControllerKind k : {ControllerKind::kPolicy, ControllerKind::kPid, ControllerKind::kNull, ControllerKind::kStraight}) {
    CHECK(parse_controller_kind(to_string(k)) == k);
  }
  CHECK_FALSE(parse_controller_kind("mpc"));
}

TEST_CASE("lap counter counts forward crossings with hysteresis") {
  LapCounter laps({{0, -1}, {0, 1}}, {{-1, 0}, 0.0});
  CHECK_FALSE(laps.update({-0.1, 0}, {0.1, 0}, 2.0));   // too soon after the start
  CHECK_FALSE(laps.update({0.1, 0}, {-0.1, 0}, 6.0));   // backwards
  CHECK_FALSE(laps.update({-0.1, 3}, {0.1, 3}, 6.5));   // beside the line
  auto first = laps.update({-0.1, 0}, {0.1, 0}, 7.0);
  REQUIRE(first);
  CHECK(*first == 7.0);
  CHECK_FALSE(laps.update({-0.1, 0.5}, {0.1, 0.5}, 11.0));  // within 5 s of the previous lap
  auto second = laps.update({-0.1, 0.5}, {0.1, 0.5}, 19.5);
  REQUIRE(second);
  CHECK(*second == doctest::Approx(12.5));
  CHECK(laps.laps() == 2);
  CHECK(laps.lap_times() == std::vector<double>{7.0, 12.5});
}

TEST_CASE("coverage counts reachable free cells and is monotone") {
  const Scene track = load_track("corridor_oval");
  CoverageTracker cov(track, 0.5, 0.25);
  CHECK(cov.free_cells() > 100);
  CHECK(cov.fraction() == 0.0);
  double prev = 0.0;
  Vec2 p = track.start.position;
  for (int i = 0; i < 400; ++i) {
    p += Vec2{0.05, 0.0};
    cov.visit(p);
    CHECK(cov.fraction() >= prev);
    CHECK(cov.fraction() <= 1.0);
    prev = cov.fraction();
  }
  const std::size_t before = cov.visited_cells();
  cov.visit({-100, -100});  // outside the grid
  cov.visit({0, 0});        // inside the infield, unreachable
  CHECK(cov.visited_cells() == before);
}

TEST_CASE("stationary null controller truncates in a single cell") {
  const Scene track = load_track("corridor_oval");
  EnvConfig env;
  env.task.max_episode_steps = 500;
  auto ctrl = make_controller(ControllerKind::kNull, nullptr, PidParams{}, env, true);
  EvalOptions opt;
  const EpisodeReport r = run_episode(track, env, *ctrl, 0, opt);
  CHECK_FALSE(r.collision);
  CHECK(r.truncated);
  CHECK(r.steps == 500);
  CHECK(r.lap_times.empty());
  CoverageTracker cov(track, 0.5, 0.25);
  CHECK(r.coverage == doctest::Approx(1.0 / static_cast<double>(cov.free_cells())));
}

TEST_CASE("PID baseline laps the oval") {
  const Scene track = load_track("corridor_oval");
  EnvConfig env;
  auto ctrl = make_controller(ControllerKind::kPid, nullptr, PidParams{}, env, true);
  EvalOptions opt;
  opt.max_laps = 2;
  const EpisodeReport r = run_episode(track, env, *ctrl, 0, opt);
  CHECK_FALSE(r.collision);
  CHECK(r.lap_times.size() == 2);
  CHECK(r.flip_rate >= 0.0);
}

TEST_CASE("evaluation is independent of the worker count") {
  const Scene track = load_track("corridor_oval");
  EnvConfig env;
  env.task.max_episode_steps = 300;
  EvalOptions opt;
  opt.episodes = 4;
  const EvalReport a = evaluate(track, env, ControllerKind::kPid, nullptr, PidParams{}, opt, 3, {}, 1);
  const EvalReport b = evaluate(track, env, ControllerKind::kPid, nullptr, PidParams{}, opt, 3, {}, 4);
  REQUIRE(a.episodes.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.episodes[i].seed == Rng::derive(3, 2'000'000 + i));
    CHECK(a.episodes[i].episode_return == b.episodes[i].episode_return);
    CHECK(a.episodes[i].coverage == b.episodes[i].coverage);
  }
  CHECK(a.mean_return == b.mean_return);
}

TEST_CASE("lap fields are reported only for scenes with a finish line") {
  EnvConfig env;
  env.task.max_episode_steps = 50;
  EvalOptions opt;
  opt.episodes = 1;
  const EvalReport with = evaluate(load_track("corridor_oval"), env, ControllerKind::kNull, nullptr, {}, opt, 0);
  const EvalReport without = evaluate(load_track("outdoor"), env, ControllerKind::kNull, nullptr, {}, opt, 0);
  const auto jw = nlohmann::json::parse(report_to_json(with));
  const auto jo = nlohmann::json::parse(report_to_json(without));
  CHECK(jw["aggregate"].contains("mean_lap_time"));
  CHECK(jw["episodes"][0].contains("lap_times"));
  CHECK_FALSE(jo["aggregate"].contains("mean_lap_time"));
  CHECK_FALSE(jo["episodes"][0].contains("lap_times"));
  const double coverage = jo["episodes"][0]["coverage"];
  CHECK(coverage >= 0.0);
  CHECK(coverage <= 1.0);
}

TEST_CASE("crossing scenarios are valid and put the obstacle in the straight driver's path") {
  const Scene base = load_track("corridor_crossing");
  EnvConfig env;
  env.task.throttle_cap = 0.08;
  int straight_collisions = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CrossingScenario sc = crossing_scenario(base, env, seed);
    CHECK_NOTHROW(validate_scene(sc.scene));
    CHECK(sc.crossing_distance >= 3.0);
    CHECK(sc.crossing_distance <= 5.0);
    CHECK(std::abs(sc.time_offset) <= 0.5);
    const auto moving = std::find_if(sc.scene.circles.begin(), sc.scene.circles.end(),
                                     [](const CircleObstacle& c) { return c.moving(); });
    REQUIRE(moving != sc.scene.circles.end());
    CHECK(moving->velocity.norm() == doctest::Approx(1.0));
    CHECK(std::abs(moving->velocity.dot(Vec2::from_angle(base.start.yaw))) < 1e-12);

    EnvConfig ep = env;
    ep.task.max_episode_steps = sc.horizon_steps;
    auto ctrl = make_controller(ControllerKind::kStraight, nullptr, {}, ep, true);
    const EpisodeReport r = run_episode(sc.scene, ep, *ctrl, seed, EvalOptions{});
    straight_collisions += r.collision ? 1 : 0;
  }
  CHECK(straight_collisions >= 8);
}

TEST_CASE("trajectory CSV round trip and replay") {
  const Scene track = load_track("corridor_oval");
  EnvConfig env;
  env.task.max_episode_steps = 600;
  auto ctrl = make_controller(ControllerKind::kPid, nullptr, PidParams{}, env, true);
  std::vector<TrajectoryRow> rows;
  run_episode(track, env, *ctrl, 4, EvalOptions{}, &rows);
  REQUIRE(rows.size() == 600);

  const auto dir = temp_dir("depthnav_test_eval");
  write_trajectory_csv(rows, dir / "t.csv");
  const auto back = read_trajectory_csv(dir / "t.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    REQUIRE(back[i].x == rows[i].x);
    REQUIRE(back[i].yaw == rows[i].yaw);
    REQUIRE(back[i].a_delta == rows[i].a_delta);
    REQUIRE(back[i].reward == rows[i].reward);
  }
  const ReplayResult ok = replay(back, track, env);
  CHECK(ok.rows == 600);
  CHECK(ok.mismatches == 0);

  auto tampered = back;
  tampered[300].x += 1e-6;
  const ReplayResult bad = replay(tampered, track, env);
  CHECK(bad.mismatches > 0);
  CHECK_FALSE(bad.first_mismatch.empty());
  std::filesystem::remove_all(dir);
}

TEST_CASE("evaluate writes one trajectory per episode") {
  const Scene track = load_track("corridor_oval");
  EnvConfig env;
  env.task.max_episode_steps = 100;
  EvalOptions opt;
  opt.episodes = 3;
  const auto dir = temp_dir("depthnav_test_eval_traj");
  evaluate(track, env, ControllerKind::kStraight, nullptr, {}, opt, 1, dir);
  for (int i = 0; i < 3; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "episode_%03d.csv", i);
    CHECK(std::filesystem::exists(dir / name));
  }
  std::filesystem::remove_all(dir);
}
