#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>

#include "depthnav/rng.hpp"

namespace depthnav {

/// Shape of the shared-trunk actor-critic: input -> hidden -> hidden, then
/// a Gaussian mean head (actions) and a scalar value head.
struct Architecture {
  int input = 170;
  int hidden = 64;
  int actions = 2;

  bool operator==(const Architecture&) const = default;
  std::string describe() const;
};

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;

/// All network parameters in one flat buffer with typed views per layer.
/// Gradients use the same type, so optimizers and checks work on flat data.
template <typename S>
class ActorCritic {
 public:
  using Scalar = S;
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  using MatMap = Eigen::Map<Mat>;
  using VecMap = Eigen::Map<Vec>;
  using ConstMatMap = Eigen::Map<const Mat>;
  using ConstVecMap = Eigen::Map<const Vec>;

  ActorCritic() : ActorCritic(Architecture{}) {}
  explicit ActorCritic(const Architecture& arch);

  const Architecture& arch() const { return arch_; }
  std::size_t size() const { return static_cast<std::size_t>(flat_.size()); }
  Vec& flat() { return flat_; }
  const Vec& flat() const { return flat_; }

  MatMap w1() { return mat(off_w1_, arch_.hidden, arch_.input); }
  VecMap b1() { return vec(off_b1_, arch_.hidden); }
  MatMap w2() { return mat(off_w2_, arch_.hidden, arch_.hidden); }
  VecMap b2() { return vec(off_b2_, arch_.hidden); }
  MatMap wp() { return mat(off_wp_, arch_.actions, arch_.hidden); }
  VecMap bp() { return vec(off_bp_, arch_.actions); }
  MatMap wv() { return mat(off_wv_, 1, arch_.hidden); }
  VecMap bv() { return vec(off_bv_, 1); }
  VecMap log_std() { return vec(off_ls_, arch_.actions); }

  ConstMatMap w1() const { return mat(off_w1_, arch_.hidden, arch_.input); }
  ConstVecMap b1() const { return vec(off_b1_, arch_.hidden); }
  ConstMatMap w2() const { return mat(off_w2_, arch_.hidden, arch_.hidden); }
  ConstVecMap b2() const { return vec(off_b2_, arch_.hidden); }
  ConstMatMap wp() const { return mat(off_wp_, arch_.actions, arch_.hidden); }
  ConstVecMap bp() const { return vec(off_bp_, arch_.actions); }
  ConstMatMap wv() const { return mat(off_wv_, 1, arch_.hidden); }
  ConstVecMap bv() const { return vec(off_bv_, 1); }
  ConstVecMap log_std() const { return vec(off_ls_, arch_.actions); }

  void set_zero() { flat_.setZero(); }
  bool all_finite() const { return flat_.allFinite(); }
  void clamp_log_std();

  template <typename T>
  ActorCritic<T> cast() const {
    ActorCritic<T> out(arch_);
    out.flat() = flat_.template cast<T>();
    return out;
  }

  /// Name of the tensor that owns flat index `i` (for diagnostics).
  std::string tensor_name(std::size_t i) const;

 private:
  MatMap mat(Eigen::Index off, Eigen::Index r, Eigen::Index c) { return MatMap(flat_.data() + off, r, c); }
  VecMap vec(Eigen::Index off, Eigen::Index n) { return VecMap(flat_.data() + off, n); }
  ConstMatMap mat(Eigen::Index off, Eigen::Index r, Eigen::Index c) const { return ConstMatMap(flat_.data() + off, r, c); }
  ConstVecMap vec(Eigen::Index off, Eigen::Index n) const { return ConstVecMap(flat_.data() + off, n); }

  Architecture arch_;
  Eigen::Index off_w1_, off_b1_, off_w2_, off_b2_, off_wp_, off_bp_, off_wv_, off_bv_, off_ls_;
  Vec flat_;
};

using PolicyParams = ActorCritic<float>;
template <typename S>
using GradientBundle = ActorCritic<S>;

/// Orthogonal init: gain sqrt(2) for the trunk, 0.01 for the policy head,
/// 1 for the value head; zero biases and zero log-std.
template <typename S>
void orthogonal_init(ActorCritic<S>& params, Rng& rng);

/// Fills `w` with a gain-scaled (semi-)orthogonal matrix.
template <typename S>
void orthogonal_fill(Eigen::Ref<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> w, double gain, Rng& rng);

template <typename S>
struct PolicyOutput {
  Eigen::Matrix<S, Eigen::Dynamic, 1> mean;
  Eigen::Matrix<S, Eigen::Dynamic, 1> log_std;
  S value{};
};

template <typename S>
PolicyOutput<S> forward(const ActorCritic<S>& params, std::span<const S> obs);

/// Activations of a batched forward pass; columns are samples.
template <typename S>
struct ForwardCache {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> h1, h2, mean;
  Eigen::Matrix<S, 1, Eigen::Dynamic> value;
};

template <typename S>
void forward_batch(const ActorCritic<S>& params, const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>>& obs,
                   ForwardCache<S>& cache);

/// Diagonal Gaussian log-density summed over action dimensions.
template <typename S>
S gaussian_log_prob(const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& mean,
                    const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& log_std,
                    const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& action);

/// Closed-form entropy: sum(log_std + 0.5 log(2 pi e)).
template <typename S>
S gaussian_entropy(const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& log_std);

template <typename S>
struct SampledAction {
  Eigen::Matrix<S, Eigen::Dynamic, 1> action;  // pre-clamp
  S log_prob{};
  S value{};
};

/// a = mean + exp(log_std) * z with z ~ N(0, I) drawn from `rng`.
template <typename S>
SampledAction<S> sample_action(const ActorCritic<S>& params, std::span<const S> obs, Rng& rng);

template <typename S>
struct LogProbEntropy {
  S log_prob{};
  S entropy{};
};

template <typename S>
LogProbEntropy<S> log_prob_and_entropy(const ActorCritic<S>& params, std::span<const S> obs,
                                       const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& action);

/// Minibatch in column layout: obs is input x N, actions is actions x N.
template <typename S>
struct Minibatch {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> obs;
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> actions;
  Eigen::Matrix<S, Eigen::Dynamic, 1> old_log_prob;
  Eigen::Matrix<S, Eigen::Dynamic, 1> advantages;
  Eigen::Matrix<S, Eigen::Dynamic, 1> value_targets;

  Eigen::Index size() const { return obs.cols(); }
};

struct LossSpec {
  double clip_eps = 0.2;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double scale = 1.0;  // multiplies the whole loss
};

/// loss = -mean(min(r A, clip(r, 1-eps, 1+eps) A)) + c1 mean((V - V_target)^2) - c2 mean(H)
template <typename S>
struct LossReport {
  S loss{};
  S policy_loss{};
  S value_loss{};
  S entropy{};
  S clip_fraction{};
  S approx_kl{};
};

/// Evaluates the composite PPO loss; when `grad` is non-null it receives the
/// exact gradient with respect to every parameter. Throws NumericError on NaN/Inf.
template <typename S>
LossReport<S> loss_and_gradient(const ActorCritic<S>& params, const Minibatch<S>& batch, const LossSpec& spec,
                                GradientBundle<S>* grad);

template <typename S>
GradientBundle<S> backward(const ActorCritic<S>& params, const Minibatch<S>& batch, const LossSpec& spec) {
  GradientBundle<S> grad(params.arch());
  loss_and_gradient(params, batch, spec, &grad);
  return grad;
}

}  // namespace depthnav
