#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const fs::path kSource = DEPTHNAV_SOURCE_DIR;

struct Run {
  int code = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string("\"") + DEPTHNAV_CLI + "\" " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Minimal training config on the oval writing into `out`.
fs::path write_small_config(const fs::path& dir, const fs::path& out, long total_steps) {
  const fs::path path = dir / "small.ini";
  std::ofstream f(path);
  f << "[run]\nscene = " << (kSource / "tracks" / "corridor_oval.scene").string() << "\nseed = 1\noutput_dir = "
    << out.string() << "\n[ppo]\ntotal_steps = " << total_steps << "\n[task]\nmax_episode_steps = 400\n"
    << "[eval]\nepisodes = 2\n";
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(run("").code == 2);
  const Run unknown = run("frobnicate");
  CHECK(unknown.code == 2);
  CHECK(unknown.output.find("Usage") != std::string::npos);
  CHECK(run("selfcheck grad --bogus").code == 2);
  CHECK(run("eval").code == 2);
}

TEST_CASE("shipped scenes validate") {
  for (const char* name : {"training", "corridor_oval", "corridor_crossing", "outdoor"}) {
    CAPTURE(name);
    CHECK(run("scene validate " + (kSource / "tracks" / (std::string(name) + ".scene")).string()).code == 0);
  }
}

TEST_CASE("an invalid scene fails validation with a diagnostic") {
  const fs::path dir = temp_dir("depthnav_cli_scene");
  std::ofstream(dir / "bad.scene") << "bounds 0 0 10 10\nstart 0 5 0\nsegment 0 0 0 10\n";
  const Run r = run("scene validate " + (dir / "bad.scene").string());
  CHECK(r.code != 0);
  CHECK(r.output.find("start pose in collision") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("raycast self-check passes on a small sample") {
  const Run r = run("selfcheck raycast --scenes 50");
  CHECK(r.code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);
}

TEST_CASE("minimal training run, evaluation and replay") {
  const fs::path dir = temp_dir("depthnav_cli_train");
  const fs::path out = dir / "run";
  const fs::path config = write_small_config(dir, out, 2048);
  const Run train = run("train " + config.string());
  REQUIRE(train.code == 0);
  for (const char* f : {"checkpoint.json", "learning_curve.csv", "resolved_config.ini", "run_info.json"}) {
    CAPTURE(f);
    CHECK(fs::exists(out / f));
  }
  const auto ckpt = nlohmann::json::parse(slurp(out / "checkpoint.json"));
  CHECK(ckpt["updates"] == 1);
  CHECK(ckpt["global_step"] == 2048);
  const std::string curve = slurp(out / "learning_curve.csv");
  CHECK(curve.rfind("episode,steps,return,moving_avg_1000\n", 0) == 0);
  const auto info = nlohmann::json::parse(slurp(out / "run_info.json"));
  CHECK(info["seed"] == 1);

  // The resolved config reproduces the run bit-identically.
  const fs::path out2 = dir / "rerun";
  std::string resolved = slurp(out / "resolved_config.ini");
  const std::string from = "output_dir = " + out.string();
  REQUIRE(resolved.find(from) != std::string::npos);
  resolved.replace(resolved.find(from), from.size(), "output_dir = " + out2.string());
  std::ofstream(dir / "rerun.ini") << resolved;
  REQUIRE(run("train " + (dir / "rerun.ini").string()).code == 0);
  CHECK(slurp(out2 / "learning_curve.csv") == curve);
  CHECK(slurp(out2 / "checkpoint.json") == slurp(out / "checkpoint.json"));

  // Evaluation leaves the checkpoint untouched and writes a report plus trajectories.
  const std::string before = slurp(out / "checkpoint.json");
  const fs::path eval_out = dir / "eval";
  const Run eval = run("eval " + config.string() + " --checkpoint " + (out / "checkpoint.json").string() +
                       " --episodes 2 --deterministic --compare pid --out " + eval_out.string());
  REQUIRE(eval.code == 0);
  CHECK(slurp(out / "checkpoint.json") == before);
  CHECK(fs::exists(eval_out / "policy" / "report.json"));
  CHECK(fs::exists(eval_out / "pid" / "report.json"));
  const fs::path traj = eval_out / "policy" / "episode_000.csv";
  REQUIRE(fs::exists(traj));
  CHECK(run("replay " + traj.string() + " --config " + config.string()).code == 0);

  // Architecture mismatch is reported as an error.
  std::ofstream(dir / "wide.ini") << slurp(config) << "[lidar]\nn_rays = 100\n";
  const Run mismatch = run("eval " + (dir / "wide.ini").string() + " --checkpoint " + (out / "checkpoint.json").string());
  CHECK(mismatch.code != 0);
  fs::remove_all(dir);
}
