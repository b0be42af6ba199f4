#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "depthnav/geometry.hpp"
#include "depthnav/nn.hpp"
#include "depthnav/optimizer.hpp"
#include "depthnav/rng.hpp"
#include "depthnav/task_env.hpp"

namespace depthnav {

struct Hyperparams {
  double gamma = 0.99;
  double lam = 0.95;
  double lr = 3e-4;
  int rollout_size = 2048;
  int batch_size = 64;
  int n_epochs = 10;
  double clip_eps = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  long total_steps = 20'000'000;
  double max_grad_norm = 0.5;
  int n_envs = 1;
  bool normalize_advantages = true;
  OptimizerConfig optimizer;

  void validate() const;
  LossSpec loss_spec() const { return {clip_eps, vf_coef, ent_coef, 1.0}; }
};

struct Transition {
  std::vector<float> obs;
  std::array<float, 2> action{};  // pre-clamp policy sample
  float log_prob_old = 0.0f;
  double reward = 0.0;
  double value_pred = 0.0;
  bool terminated = false;
  bool truncated = false;
  double bootstrap_value = 0.0;  // critic value of the final observation, used only when truncated
};

/// Fixed-capacity storage for one rollout, laid out as `segments` contiguous
/// per-environment runs of equal length.
class RolloutBuffer {
 public:
  RolloutBuffer(std::size_t capacity, std::size_t segments = 1);

  std::size_t capacity() const { return data_.size(); }
  std::size_t segments() const { return segments_; }
  std::size_t segment_length() const { return data_.size() / segments_; }
  std::size_t size() const { return size_; }
  bool full() const { return size_ == data_.size(); }

  void add(Transition t);
  Transition& at(std::size_t segment, std::size_t step) { return data_[segment * segment_length() + step]; }
  const Transition& at(std::size_t segment, std::size_t step) const { return data_[segment * segment_length() + step]; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }
  /// Marks the buffer full after parallel workers filled every slot through `at`.
  void mark_full() { size_ = data_.size(); }
  void clear() { size_ = 0; }

  std::vector<double>& advantages() { return advantages_; }
  const std::vector<double>& advantages() const { return advantages_; }
  std::vector<double>& value_targets() { return value_targets_; }
  const std::vector<double>& value_targets() const { return value_targets_; }

 private:
  std::vector<Transition> data_;
  std::size_t segments_;
  std::size_t size_ = 0;
  std::vector<double> advantages_;
  std::vector<double> value_targets_;
};

/// Generalized advantage estimation per segment. `last_values[s]` is the
/// critic's estimate after the final transition of segment s. Collisions cut
/// the bootstrap; truncations bootstrap from `bootstrap_value`. Both end the
/// advantage recursion.
void compute_gae(RolloutBuffer& buffer, std::span<const double> last_values, const Hyperparams& hp);
inline void compute_gae(RolloutBuffer& buffer, double last_value, const Hyperparams& hp) {
  compute_gae(buffer, std::span<const double>(&last_value, 1), hp);
}

/// Rescales the buffer's advantages to zero mean and unit (population) std.
void normalize_advantages(RolloutBuffer& buffer);

Minibatch<float> make_minibatch(const RolloutBuffer& buffer, std::span<const std::size_t> indices);

LossReport<float> ppo_loss(const PolicyParams& params, const Minibatch<float>& batch, const Hyperparams& hp);

struct EpisodeRecord {
  long episode = 0;  // 1-based
  long steps = 0;    // global env steps when the episode ended
  double episode_return = 0.0;
  double moving_avg = 0.0;  // mean of the last (up to) 1000 returns
  long length = 0;
  bool terminated = false;
};

struct UpdateStats {
  long global_step = 0;
  long episodes = 0;
  double moving_avg = 0.0;
  LossReport<float> last_loss;
  double grad_norm = 0.0;
  double steps_per_second = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpisodeRecord&)> on_episode;
  std::function<void(const UpdateStats&)> on_update;
};

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& what) : std::runtime_error(what) {}
};

struct TrainerOptions {
  int threads = 0;  // 0: DEPTHNAV_THREADS or hardware concurrency
  std::filesystem::path checkpoint_path;  // empty disables periodic checkpoints
  long checkpoint_interval = 0;           // env steps between checkpoints; 0 = only at end
};

/// Worker count from DEPTHNAV_THREADS, else hardware concurrency (at least 1).
int resolve_thread_count(int requested = 0);

/// PPO trainer. Holds the complete training state so it can be checkpointed
/// and resumed bit-exactly at rollout boundaries.
class Trainer {
 public:
  Trainer(Scene scene, EnvConfig env, Hyperparams hp, std::uint64_t seed, TrainerOptions options = {});

  /// Collects rollouts and updates until total_steps env steps have been taken.
  void run(const TrainCallbacks& callbacks = {});
  /// One rollout followed by one update phase.
  void iterate(const TrainCallbacks& callbacks = {});

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores state saved by save_checkpoint into a trainer built with the same configuration.
  void load_checkpoint(const std::filesystem::path& path);

  const PolicyParams& params() const { return params_; }
  PolicyParams& params() { return params_; }
  long global_step() const { return global_step_; }
  long episodes() const { return episodes_; }
  const std::vector<EpisodeRecord>& records() const { return records_; }
  const Hyperparams& hyperparams() const { return hp_; }
  const RolloutBuffer& buffer() const { return buffer_; }
  int updates() const { return updates_; }

 private:
  struct Worker {
    EpisodeState episode;
    Observation obs;
    Rng rng;
    std::uint64_t episode_seed = 0;
    double last_value = 0.0;
    struct Finished {
      std::size_t step;
      double episode_return;
      long length;
      bool terminated;
    };
    std::vector<Finished> finished;
  };

  void collect_rollout();
  void collect_segment(std::size_t w);
  void update(const TrainCallbacks& callbacks);
  void record_finished_episodes(long rollout_base, const TrainCallbacks& callbacks);
  void reset_worker(Worker& worker);

  Scene scene_;
  EnvConfig env_;
  Hyperparams hp_;
  std::uint64_t seed_;
  TrainerOptions options_;
  int threads_;

  PolicyParams params_;
  Optimizer<float> optimizer_;
  Rng update_rng_;
  std::vector<Worker> workers_;
  RolloutBuffer buffer_;

  long global_step_ = 0;
  long episodes_ = 0;
  long next_checkpoint_ = 0;
  int updates_ = 0;
  std::deque<double> recent_returns_;
  double recent_sum_ = 0.0;
  std::vector<EpisodeRecord> records_;
  LossReport<float> last_loss_;
  double last_grad_norm_ = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<EpisodeRecord> records;
};

TrainResult train(const Scene& scene, const EnvConfig& env, const Hyperparams& hp, std::uint64_t seed,
                  const TrainCallbacks& callbacks = {}, const TrainerOptions& options = {});

/// Parameters only, for evaluation. Throws CheckpointError on version or architecture mismatch.
PolicyParams load_policy(const std::filesystem::path& path, const Architecture& expected);

}  // namespace depthnav
