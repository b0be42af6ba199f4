#include "depthnav/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "depthnav/contract.hpp"
#include "depthnav/text.hpp"

namespace depthnav {

namespace pt = boost::property_tree;

void RunConfig::validate() const {
  if (scene.empty()) throw ConfigError("[run] scene is required");
  if (!std::filesystem::exists(scene)) throw ConfigError("scene file does not exist: " + scene.string());
  if (!checkpoint.empty() && controller == ControllerKind::kPolicy && !std::filesystem::exists(checkpoint)) {
    throw ConfigError("checkpoint does not exist: " + checkpoint.string());
  }
  try {
    hp.validate();
    env.validate();
    pid.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (eval.episodes <= 0) throw ConfigError("[eval] episodes must be > 0");
  if (eval.coverage_cell <= 0.0) throw ConfigError("[eval] coverage_cell must be > 0");
}

namespace {

struct Field {
  std::string section;
  std::string key;
  std::function<void(const std::string&)> parse;
  std::function<std::string()> format;
};

double to_double(const std::string& s, const std::string& name) {
  auto v = parse_double(trim(s));
  if (!v) throw ConfigError("config " + name + ": not a number: '" + s + "'");
  return *v;
}

long to_long(const std::string& s, const std::string& name) {
  const std::string_view t = trim(s);
  long v = 0;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("config " + name + ": not an integer: '" + s + "'");
  return v;
}

bool to_bool(const std::string& s, const std::string& name) {
  const std::string_view t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("config " + name + ": not a boolean: '" + s + "'");
}

class FieldTable {
 public:
  explicit FieldTable(RunConfig& c, std::filesystem::path base) : base_(std::move(base)) {
    path("run", "scene", c.scene);
    u64("run", "seed", c.seed);
    path("run", "output_dir", c.output_dir);
    add("run", "controller",
        [&c](const std::string& s) {
          auto kind = parse_controller_kind(trim(s));
          if (!kind) throw ConfigError("config run.controller: expected policy|pid|null|straight, got '" + s + "'");
          c.controller = *kind;
        },
        [&c] { return to_string(c.controller); });
    path("run", "checkpoint", c.checkpoint);
    integer("run", "checkpoint_interval", c.checkpoint_interval);
    integer("run", "log_interval", c.log_interval);

    Hyperparams& h = c.hp;
    real("ppo", "gamma", h.gamma);
    real("ppo", "lam", h.lam);
    real("ppo", "lr", h.lr);
    integer("ppo", "rollout_size", h.rollout_size);
    integer("ppo", "batch_size", h.batch_size);
    integer("ppo", "n_epochs", h.n_epochs);
    real("ppo", "clip_eps", h.clip_eps);
    real("ppo", "vf_coef", h.vf_coef);
    real("ppo", "ent_coef", h.ent_coef);
    integer("ppo", "total_steps", h.total_steps);
    real("ppo", "max_grad_norm", h.max_grad_norm);
    integer("ppo", "n_envs", h.n_envs);
    boolean("ppo", "normalize_advantages", h.normalize_advantages);
    add("ppo", "optimizer",
        [&h](const std::string& s) {
          const std::string_view t = trim(s);
          if (t == "adam") h.optimizer.kind = OptimizerKind::kAdam;
          else if (t == "sgd") h.optimizer.kind = OptimizerKind::kSgd;
          else throw ConfigError("config ppo.optimizer: expected adam|sgd, got '" + s + "'");
        },
        [&h] { return std::string(h.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd"); });
    real("ppo", "beta1", h.optimizer.beta1);
    real("ppo", "beta2", h.optimizer.beta2);
    real("ppo", "adam_eps", h.optimizer.eps);

    VehicleParams& v = c.env.vehicle;
    real("vehicle", "c_t", v.c_t);
    real("vehicle", "c_f1", v.c_f1);
    real("vehicle", "c_f2", v.c_f2);
    real("vehicle", "wheelbase", v.wheelbase);
    real("vehicle", "v_max", v.v_max);
    real("vehicle", "delta_min", v.delta_min);
    real("vehicle", "delta_max", v.delta_max);
    real("vehicle", "t_s", v.t_s);

    LidarConfig& l = c.env.lidar;
    real("lidar", "mount_x", l.mount_x);
    real("lidar", "mount_y", l.mount_y);
    real("lidar", "mount_z", l.mount_z);
    integer("lidar", "n_rays", l.n_rays);
    real("lidar", "fov", l.fov);
    real("lidar", "r_max", l.r_max);

    TaskOptions& t = c.env.task;
    integer("task", "max_episode_steps", t.max_episode_steps);
    real("task", "footprint_radius", t.footprint_radius);
    real("task", "throttle_reward_scale", t.throttle_reward_scale);
    real("task", "flip_penalty", t.flip_penalty);
    boolean("task", "penalty_on_raw", t.penalty_on_raw);
    boolean("task", "normalize_obs", t.normalize_obs);
    real("task", "throttle_cap", t.throttle_cap);

    PidParams& p = c.pid;
    real("pid", "kp", p.kp);
    real("pid", "ki", p.ki);
    real("pid", "kd", p.kd);
    real("pid", "target_wall_distance", p.target_wall_distance);
    real("pid", "cruise_throttle", p.cruise_throttle);
    add("pid", "side",
        [&p](const std::string& s) {
          const std::string_view t = trim(s);
          if (t == "left") p.side = WallSide::kLeft;
          else if (t == "right") p.side = WallSide::kRight;
          else throw ConfigError("config pid.side: expected left|right, got '" + s + "'");
        },
        [&p] { return std::string(p.side == WallSide::kLeft ? "left" : "right"); });
    real("pid", "slowdown_distance", p.slowdown_distance);

    EvalOptions& e = c.eval;
    integer("eval", "episodes", e.episodes);
    boolean("eval", "deterministic", e.deterministic);
    integer("eval", "max_laps", e.max_laps);
    real("eval", "coverage_cell", e.coverage_cell);
    boolean("eval", "crossing", e.crossing);
  }

  const std::vector<Field>& fields() const { return fields_; }

 private:
  void add(std::string section, std::string key, std::function<void(const std::string&)> parse,
           std::function<std::string()> format) {
    fields_.push_back({std::move(section), std::move(key), std::move(parse), std::move(format)});
  }
  static std::string name(const std::string& s, const std::string& k) { return s + "." + k; }

  void real(const std::string& s, const std::string& k, double& ref) {
    add(s, k, [&ref, n = name(s, k)](const std::string& v) { ref = to_double(v, n); },
        [&ref] { return format_double(ref); });
  }
  template <typename I>
  void integer(const std::string& s, const std::string& k, I& ref) {
    add(s, k, [&ref, n = name(s, k)](const std::string& v) { ref = static_cast<I>(to_long(v, n)); },
        [&ref] { return std::to_string(ref); });
  }
  void u64(const std::string& s, const std::string& k, std::uint64_t& ref) {
    add(s, k,
        [&ref, n = name(s, k)](const std::string& v) {
          const std::string_view t = trim(v);
          auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), ref);
          if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("config " + n + ": not an unsigned integer");
        },
        [&ref] { return std::to_string(ref); });
  }
  void boolean(const std::string& s, const std::string& k, bool& ref) {
    add(s, k, [&ref, n = name(s, k)](const std::string& v) { ref = to_bool(v, n); },
        [&ref] { return std::string(ref ? "true" : "false"); });
  }
  void path(const std::string& s, const std::string& k, std::filesystem::path& ref) {
    add(s, k,
        [&ref, this](const std::string& v) {
          const std::string t(trim(v));
          if (t.empty()) {
            ref.clear();
            return;
          }
          std::filesystem::path p(t);
          ref = p.is_absolute() ? p : (base_ / p).lexically_normal();
        },
        [&ref] { return ref.empty() ? std::string() : std::filesystem::absolute(ref).lexically_normal().string(); });
  }

  std::filesystem::path base_;
  std::vector<Field> fields_;
};

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  RunConfig config;
  FieldTable table(config, base_dir);
  std::set<std::string> known;
  for (const Field& f : table.fields()) known.insert(f.section + "." + f.key);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, value] : body) {
      if (!known.count(section + "." + key)) throw ConfigError("unknown config key [" + section + "] " + key);
    }
  }
  for (const Field& f : table.fields()) {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(f.section + "." + f.key, '.'))) f.parse(*v);
  }
  if (config.output_dir.is_relative()) config.output_dir = (base_dir / config.output_dir).lexically_normal();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string format_config(const RunConfig& config) {
  RunConfig copy = config;
  FieldTable table(copy, {});
  std::ostringstream out;
  std::string section;
  for (const Field& f : table.fields()) {
    if (f.section != section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
    }
    out << f.key << " = " << f.format() << '\n';
  }
  return out.str();
}

void save_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << format_config(config);
}

}  // namespace depthnav
