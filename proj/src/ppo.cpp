#include "depthnav/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "depthnav/contract.hpp"
#include "depthnav/scene_io.hpp"

namespace depthnav {

namespace {
constexpr std::size_t kMovingAverageOrder = 1000;
constexpr const char* kCheckpointFormat = "depthnav-checkpoint";
constexpr int kCheckpointVersion = 1;
}  // namespace

void Hyperparams::validate() const {
  expect(gamma > 0.0 && gamma <= 1.0, "ppo: gamma must lie in (0, 1]");
  expect(lam >= 0.0 && lam <= 1.0, "ppo: lam must lie in [0, 1]");
  expect(lr > 0.0, "ppo: lr must be > 0");
  expect(clip_eps > 0.0, "ppo: clip_eps must be > 0");
  expect(rollout_size > 0 && batch_size > 0, "ppo: rollout_size and batch_size must be > 0");
  expect(rollout_size % batch_size == 0, "ppo: rollout_size must be divisible by batch_size");
  expect(n_envs > 0 && rollout_size % n_envs == 0, "ppo: rollout_size must be divisible by n_envs");
  expect(n_epochs > 0, "ppo: n_epochs must be > 0");
  expect(total_steps > 0, "ppo: total_steps must be > 0");
  expect(vf_coef >= 0.0 && ent_coef >= 0.0 && max_grad_norm >= 0.0, "ppo: coefficients must be >= 0");
}

RolloutBuffer::RolloutBuffer(std::size_t capacity, std::size_t segments)
    : data_(capacity), segments_(segments), advantages_(capacity, 0.0), value_targets_(capacity, 0.0) {
  expect(capacity > 0 && segments > 0 && capacity % segments == 0,
         "RolloutBuffer: capacity must be a positive multiple of the segment count");
}

void RolloutBuffer::add(Transition t) {
  expect(size_ < data_.size(), "RolloutBuffer: buffer is full");
  data_[size_++] = std::move(t);
}

void compute_gae(RolloutBuffer& buffer, std::span<const double> last_values, const Hyperparams& hp) {
  expect(buffer.full(), "compute_gae: rollout buffer is not full");
  expect(last_values.size() == buffer.segments(), "compute_gae: need one last value per segment");
  const std::size_t len = buffer.segment_length();
  auto& adv = buffer.advantages();
  auto& targets = buffer.value_targets();
  for (std::size_t s = 0; s < buffer.segments(); ++s) {
    double next_adv = 0.0;
    for (std::size_t k = len; k-- > 0;) {
      const Transition& tr = buffer.at(s, k);
      double next_value = 0.0;
      if (tr.truncated) {
        next_value = tr.bootstrap_value;
      } else if (k + 1 == len) {
        next_value = last_values[s];
      } else {
        next_value = buffer.at(s, k + 1).value_pred;
      }
      const double not_terminal = tr.terminated ? 0.0 : 1.0;
      const double delta = tr.reward + hp.gamma * next_value * not_terminal - tr.value_pred;
      const double carry = (tr.terminated || tr.truncated) ? 0.0 : next_adv;
      const double a = delta + hp.gamma * hp.lam * carry;
      const std::size_t i = s * len + k;
      adv[i] = a;
      targets[i] = a + tr.value_pred;
      next_adv = a;
    }
  }
}

void normalize_advantages(RolloutBuffer& buffer) {
  auto& adv = buffer.advantages();
  const auto n = static_cast<double>(adv.size());
  const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
  double var = 0.0;
  for (double a : adv) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);
  for (double& a : adv) a = sd > 1e-12 ? (a - mean) / sd : a - mean;
}

Minibatch<float> make_minibatch(const RolloutBuffer& buffer, std::span<const std::size_t> indices) {
  expect(!indices.empty(), "make_minibatch: no indices");
  const auto n = static_cast<Eigen::Index>(indices.size());
  const auto input = static_cast<Eigen::Index>(buffer[indices[0]].obs.size());
  Minibatch<float> mb;
  mb.obs.resize(input, n);
  mb.actions.resize(2, n);
  mb.old_log_prob.resize(n);
  mb.advantages.resize(n);
  mb.value_targets.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t i = indices[static_cast<std::size_t>(j)];
    const Transition& tr = buffer[i];
    mb.obs.col(j) = Eigen::Map<const Eigen::VectorXf>(tr.obs.data(), input);
    mb.actions(0, j) = tr.action[0];
    mb.actions(1, j) = tr.action[1];
    mb.old_log_prob[j] = tr.log_prob_old;
    mb.advantages[j] = static_cast<float>(buffer.advantages()[i]);
    mb.value_targets[j] = static_cast<float>(buffer.value_targets()[i]);
  }
  return mb;
}

LossReport<float> ppo_loss(const PolicyParams& params, const Minibatch<float>& batch, const Hyperparams& hp) {
  return loss_and_gradient<float>(params, batch, hp.loss_spec(), nullptr);
}

int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("DEPTHNAV_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Trainer::Trainer(Scene scene, EnvConfig env, Hyperparams hp, std::uint64_t seed, TrainerOptions options)
    : scene_(std::move(scene)),
      env_(env),
      hp_(hp),
      seed_(seed),
      options_(std::move(options)),
      threads_(std::min(resolve_thread_count(options_.threads), hp.n_envs)),
      params_(Architecture{env.lidar.n_rays, 64, 2}),
      update_rng_(Rng::derive(seed, 0)),
      buffer_(static_cast<std::size_t>(hp.rollout_size), static_cast<std::size_t>(hp.n_envs)) {
  env_.validate();
  hp_.validate();
  validate_scene(scene_, env_.task.footprint_radius);
  Rng init_rng(Rng::derive(seed, 1));
  orthogonal_init(params_, init_rng);
  optimizer_ = Optimizer<float>(hp_.optimizer, params_.size());
  workers_.resize(static_cast<std::size_t>(hp_.n_envs));
  for (std::size_t w = 0; w < workers_.size(); ++w) {
    workers_[w].rng = Rng(Rng::derive(seed, 100 + w));
    workers_[w].episode_seed = Rng::derive(seed, 1'000'000 + w);
    reset_worker(workers_[w]);
  }
  next_checkpoint_ = options_.checkpoint_interval;
}

void Trainer::reset_worker(Worker& worker) {
  ResetResult r = reset(scene_, env_, worker.episode_seed);
  worker.episode = r.episode;
  worker.obs = std::move(r.observation);
  worker.episode_seed += static_cast<std::uint64_t>(hp_.n_envs);
}

void Trainer::collect_segment(std::size_t w) {
  Worker& worker = workers_[w];
  worker.finished.clear();
  const std::size_t len = buffer_.segment_length();
  std::vector<float> obs_f(worker.obs.depths.size());
  for (std::size_t k = 0; k < len; ++k) {
    std::transform(worker.obs.depths.begin(), worker.obs.depths.end(), obs_f.begin(),
                   [](double d) { return static_cast<float>(d); });
    const SampledAction<float> s = sample_action<float>(params_, obs_f, worker.rng);
    const RawAction raw{static_cast<double>(s.action[0]), static_cast<double>(s.action[1])};
    StepOutcome out = step(worker.episode, raw, scene_, env_);

    Transition& tr = buffer_.at(w, k);
    tr.obs = obs_f;
    tr.action = {s.action[0], s.action[1]};
    tr.log_prob_old = s.log_prob;
    tr.reward = out.result.reward;
    tr.value_pred = static_cast<double>(s.value);
    tr.terminated = out.result.terminated;
    tr.truncated = out.result.truncated;
    tr.bootstrap_value = 0.0;
    if (tr.truncated) {
      std::vector<float> next_f(out.result.observation.depths.begin(), out.result.observation.depths.end());
      tr.bootstrap_value = static_cast<double>(forward<float>(params_, next_f).value);
    }

    worker.episode = out.episode;
    worker.obs = std::move(out.result.observation);
    if (worker.episode.finished) {
      worker.finished.push_back({k, worker.episode.cumulative_reward, worker.episode.step_count, tr.terminated});
      reset_worker(worker);
    }
  }
  std::transform(worker.obs.depths.begin(), worker.obs.depths.end(), obs_f.begin(),
                 [](double d) { return static_cast<float>(d); });
  worker.last_value = static_cast<double>(forward<float>(params_, obs_f).value);
}

void Trainer::collect_rollout() {
  buffer_.clear();
  const std::size_t n = workers_.size();
  if (threads_ <= 1 || n == 1) {
    for (std::size_t w = 0; w < n; ++w) collect_segment(w);
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads_));
    {
      std::vector<std::jthread> pool;
      for (int t = 0; t < threads_; ++t) {
        pool.emplace_back([this, t, n, &errors] {
          try {
            for (std::size_t w = static_cast<std::size_t>(t); w < n; w += static_cast<std::size_t>(threads_)) {
              collect_segment(w);
            }
          } catch (...) {
            errors[static_cast<std::size_t>(t)] = std::current_exception();
          }
        });
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  buffer_.mark_full();
}

void Trainer::record_finished_episodes(long rollout_base, const TrainCallbacks& callbacks) {
  struct Event {
    std::size_t step;
    std::size_t worker;
    Worker::Finished data;
  };
  std::vector<Event> events;
  for (std::size_t w = 0; w < workers_.size(); ++w) {
    for (const auto& f : workers_[w].finished) events.push_back({f.step, w, f});
  }
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.step != b.step ? a.step < b.step : a.worker < b.worker; });
  const auto n_envs = static_cast<long>(workers_.size());
  for (const Event& e : events) {
    recent_returns_.push_back(e.data.episode_return);
    recent_sum_ += e.data.episode_return;
    if (recent_returns_.size() > kMovingAverageOrder) {
      recent_sum_ -= recent_returns_.front();
      recent_returns_.pop_front();
    }
    EpisodeRecord rec;
    rec.episode = ++episodes_;
    rec.steps = rollout_base + static_cast<long>(e.step) * n_envs + static_cast<long>(e.worker) + 1;
    rec.episode_return = e.data.episode_return;
    // Recomputed from the window so the value does not depend on summation history.
    rec.moving_avg = std::accumulate(recent_returns_.begin(), recent_returns_.end(), 0.0) /
                     static_cast<double>(recent_returns_.size());
    rec.length = e.data.length;
    rec.terminated = e.data.terminated;
    records_.push_back(rec);
    if (callbacks.on_episode) callbacks.on_episode(rec);
  }
}

void Trainer::update(const TrainCallbacks& callbacks) {
  std::vector<double> last_values(workers_.size());
  for (std::size_t w = 0; w < workers_.size(); ++w) last_values[w] = workers_[w].last_value;
  compute_gae(buffer_, last_values, hp_);
  if (hp_.normalize_advantages) normalize_advantages(buffer_);

  std::vector<std::size_t> order(buffer_.capacity());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const LossSpec spec = hp_.loss_spec();
  GradientBundle<float> grad(params_.arch());
  const auto batch = static_cast<std::size_t>(hp_.batch_size);
  for (int epoch = 0; epoch < hp_.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), update_rng_.engine());
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const Minibatch<float> mb = make_minibatch(buffer_, std::span<const std::size_t>(order).subspan(start, batch));
      last_loss_ = loss_and_gradient<float>(params_, mb, spec, &grad);
      last_grad_norm_ = clip_grad_norm(grad, hp_.max_grad_norm);
      optimizer_.step(params_, grad, hp_.lr);
      params_.clamp_log_std();
    }
  }
  ++updates_;
  (void)callbacks;
}

void Trainer::iterate(const TrainCallbacks& callbacks) {
  const auto t0 = std::chrono::steady_clock::now();
  const long base = global_step_;
  collect_rollout();
  global_step_ += hp_.rollout_size;
  record_finished_episodes(base, callbacks);
  update(callbacks);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (callbacks.on_update) {
    UpdateStats st;
    st.global_step = global_step_;
    st.episodes = episodes_;
    st.moving_avg = recent_returns_.empty() ? 0.0 : recent_sum_ / static_cast<double>(recent_returns_.size());
    st.last_loss = last_loss_;
    st.grad_norm = last_grad_norm_;
    st.steps_per_second = secs > 0.0 ? hp_.rollout_size / secs : 0.0;
    callbacks.on_update(st);
  }
}

void Trainer::run(const TrainCallbacks& callbacks) {
  while (global_step_ < hp_.total_steps) {
    iterate(callbacks);
    if (!options_.checkpoint_path.empty() && options_.checkpoint_interval > 0 && global_step_ >= next_checkpoint_ &&
        global_step_ < hp_.total_steps) {
      while (next_checkpoint_ <= global_step_) next_checkpoint_ += options_.checkpoint_interval;
      save_checkpoint(options_.checkpoint_path);
    }
  }
  if (!options_.checkpoint_path.empty()) save_checkpoint(options_.checkpoint_path);
}

// ---- checkpoints ----

namespace {

using nlohmann::json;

template <typename V>
json to_json_array(const V& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(static_cast<double>(v[i]));
  return arr;
}

template <typename V>
void from_json_array(const json& arr, V& v, const char* what) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != v.size()) {
    throw CheckpointError(std::string("checkpoint field '") + what + "' has the wrong length");
  }
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v[i] = static_cast<typename V::Scalar>(arr[static_cast<std::size_t>(i)].get<double>());
  }
}

json arch_json(const Architecture& a) {
  return {{"input", a.input}, {"hidden", a.hidden}, {"actions", a.actions}, {"descriptor", a.describe()}};
}

json read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  if (j.value("format", "") != kCheckpointFormat) throw CheckpointError("not a depthnav checkpoint: " + path.string());
  const int version = j.value("version", -1);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  return j;
}

Architecture parse_arch(const json& j) {
  const json& a = j.at("architecture");
  return {a.at("input").get<int>(), a.at("hidden").get<int>(), a.at("actions").get<int>()};
}

void check_arch(const Architecture& found, const Architecture& expected) {
  if (!(found == expected)) {
    throw CheckpointError("checkpoint architecture " + found.describe() + " does not match expected " +
                          expected.describe());
  }
}

}  // namespace

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["architecture"] = arch_json(params_.arch());
  j["params"] = to_json_array(params_.flat());
  j["optimizer"] = {{"kind", hp_.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd"},
                    {"t", optimizer_.steps()},
                    {"m", to_json_array(optimizer_.first_moment())},
                    {"v", to_json_array(optimizer_.second_moment())}};
  j["seed"] = seed_;
  j["global_step"] = global_step_;
  j["episodes"] = episodes_;
  j["updates"] = updates_;
  j["next_checkpoint"] = next_checkpoint_;
  j["update_rng"] = update_rng_.state();
  j["recent_returns"] = json(std::vector<double>(recent_returns_.begin(), recent_returns_.end()));
  json workers = json::array();
  for (const Worker& w : workers_) {
    const EpisodeState& e = w.episode;
    workers.push_back({{"rng", w.rng.state()},
                       {"episode_seed", w.episode_seed},
                       {"x", e.vehicle.position.x},
                       {"y", e.vehicle.position.y},
                       {"yaw", e.vehicle.yaw},
                       {"v", e.vehicle.v_joint},
                       {"step_count", e.step_count},
                       {"prev_a_delta", e.prev_a_delta},
                       {"prev_a_delta_raw", e.prev_a_delta_raw},
                       {"sim_time", e.sim_time},
                       {"cumulative_reward", e.cumulative_reward},
                       {"seed", e.seed}});
  }
  j["workers"] = workers;

  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
    out << j.dump() << '\n';
    if (!out) throw CheckpointError("write failed for checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

void Trainer::load_checkpoint(const std::filesystem::path& path) {
  const json j = read_checkpoint_file(path);
  check_arch(parse_arch(j), params_.arch());
  try {
    from_json_array(j.at("params"), params_.flat(), "params");
    const json& opt = j.at("optimizer");
    from_json_array(opt.at("m"), optimizer_.first_moment(), "optimizer.m");
    from_json_array(opt.at("v"), optimizer_.second_moment(), "optimizer.v");
    optimizer_.set_steps(opt.at("t").get<long>());
    global_step_ = j.at("global_step").get<long>();
    episodes_ = j.at("episodes").get<long>();
    updates_ = j.at("updates").get<int>();
    next_checkpoint_ = j.at("next_checkpoint").get<long>();
    update_rng_.set_state(j.at("update_rng").get<std::string>());
    recent_returns_.clear();
    recent_sum_ = 0.0;
    for (double r : j.at("recent_returns").get<std::vector<double>>()) {
      recent_returns_.push_back(r);
      recent_sum_ += r;
    }
    const json& ws = j.at("workers");
    if (ws.size() != workers_.size()) throw CheckpointError("checkpoint worker count does not match n_envs");
    for (std::size_t i = 0; i < workers_.size(); ++i) {
      const json& wj = ws[i];
      Worker& w = workers_[i];
      w.rng.set_state(wj.at("rng").get<std::string>());
      w.episode_seed = wj.at("episode_seed").get<std::uint64_t>();
      EpisodeState& e = w.episode;
      e = EpisodeState{};
      e.vehicle.position = {wj.at("x").get<double>(), wj.at("y").get<double>()};
      e.vehicle.yaw = wj.at("yaw").get<double>();
      e.vehicle.v_joint = wj.at("v").get<double>();
      e.step_count = wj.at("step_count").get<int>();
      e.prev_a_delta = wj.at("prev_a_delta").get<double>();
      e.prev_a_delta_raw = wj.at("prev_a_delta_raw").get<double>();
      e.sim_time = wj.at("sim_time").get<double>();
      e.cumulative_reward = wj.at("cumulative_reward").get<double>();
      e.seed = wj.at("seed").get<std::uint64_t>();
      w.obs = make_observation(scan(scene_, e.vehicle, env_.lidar, e.sim_time), env_.lidar, env_.task);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("incomplete checkpoint: ") + e.what());
  }
  records_.clear();
}

TrainResult train(const Scene& scene, const EnvConfig& env, const Hyperparams& hp, std::uint64_t seed,
                  const TrainCallbacks& callbacks, const TrainerOptions& options) {
  Trainer trainer(scene, env, hp, seed, options);
  trainer.run(callbacks);
  return {trainer.params(), trainer.records()};
}

PolicyParams load_policy(const std::filesystem::path& path, const Architecture& expected) {
  const json j = read_checkpoint_file(path);
  check_arch(parse_arch(j), expected);
  PolicyParams p(expected);
  try {
    from_json_array(j.at("params"), p.flat(), "params");
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("incomplete checkpoint: ") + e.what());
  }
  return p;
}

}  // namespace depthnav
