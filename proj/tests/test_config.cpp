#include <doctest.h>

#include <filesystem>

#include "depthnav/config.hpp"

using namespace depthnav;

namespace {

const std::filesystem::path kSource = DEPTHNAV_SOURCE_DIR;

}  // namespace

TEST_CASE("defaults follow the documented hyperparameters") {
  const RunConfig c = parse_config("", "/tmp");
  CHECK(c.hp.gamma == 0.99);
  CHECK(c.hp.lr == 3e-4);
  CHECK(c.hp.rollout_size == 2048);
  CHECK(c.hp.batch_size == 64);
  CHECK(c.hp.n_epochs == 10);
  CHECK(c.hp.clip_eps == 0.2);
  CHECK(c.env.lidar.n_rays == 170);
  CHECK(c.env.task.max_episode_steps == 10000);
  CHECK(c.output_dir == std::filesystem::path("/tmp/runs/default"));
}

TEST_CASE("values parse and relative paths resolve against the config directory") {
  const RunConfig c = parse_config(
      "[run]\nscene = ../tracks/x.scene\nseed = 42\ncontroller = pid\n"
      "[ppo]\nlr = 1e-3\nn_envs = 4\noptimizer = sgd\n"
      "[task]\nflip_penalty = 0.0\npenalty_on_raw = true\n"
      "[pid]\nside = left\n",
      "/data/configs");
  CHECK(c.scene == std::filesystem::path("/data/tracks/x.scene"));
  CHECK(c.seed == 42);
  CHECK(c.controller == ControllerKind::kPid);
  CHECK(c.hp.lr == 1e-3);
  CHECK(c.hp.n_envs == 4);
  CHECK(c.hp.optimizer.kind == OptimizerKind::kSgd);
  CHECK(c.env.task.flip_penalty == 0.0);
  CHECK(c.env.task.penalty_on_raw);
  CHECK(c.pid.side == WallSide::kLeft);
}

TEST_CASE("format then parse is the identity") {
  RunConfig c = load_config(kSource / "configs" / "corridor_oval.ini");
  c.hp.lr = 1.0 / 3.0;
  c.env.lidar.fov = 2.0943951023931957;
  c.eval.crossing = true;
  c.pid.side = WallSide::kLeft;
  const std::string text = format_config(c);
  const RunConfig back = parse_config(text, "/elsewhere");
  CHECK(format_config(back) == text);
  CHECK(back.hp.lr == c.hp.lr);
  CHECK(back.env.lidar.fov == c.env.lidar.fov);
  CHECK(back.scene == c.scene);
  CHECK(back.output_dir == c.output_dir);
}

TEST_CASE("malformed configs are rejected") {
  CHECK_THROWS_AS(parse_config("[ppo]\nlearning_rate = 1\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_config("[bogus]\nx = 1\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_config("[ppo]\nlr = fast\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_config("[ppo]\nn_epochs = 2.5\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_config("[run]\ncontroller = mpc\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_config("[task]\nnormalize_obs = maybe\n", "/"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = 1\n", "/"), ConfigError);
}

TEST_CASE("validation checks files and value ranges") {
  RunConfig c = load_config(kSource / "configs" / "corridor_oval.ini");
  CHECK_NOTHROW(c.validate());
  RunConfig missing = c;
  missing.scene = "/nonexistent.scene";
  CHECK_THROWS_AS(missing.validate(), ConfigError);
  RunConfig bad = c;
  bad.hp.batch_size = 100;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.eval.episodes = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("shipped configs load and validate") {
  for (const auto& entry : std::filesystem::directory_iterator(kSource / "configs")) {
    CAPTURE(entry.path().string());
    CHECK_NOTHROW(load_config(entry.path()).validate());
  }
}
