#pragma once

#include <cmath>

#include "depthnav/nn.hpp"

namespace depthnav {

enum class OptimizerKind { kAdam, kSgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction (plain SGD when configured). Minimizes, so the
/// PPO objective is ascended by descending its negation.
template <typename S>
class Optimizer {
 public:
  using Vec = typename ActorCritic<S>::Vec;

  Optimizer() = default;
  Optimizer(const OptimizerConfig& config, std::size_t n) : config_(config), m_(Vec::Zero(n)), v_(Vec::Zero(n)) {}

  void step(ActorCritic<S>& params, const GradientBundle<S>& grad, double lr) {
    Vec& p = params.flat();
    const Vec& g = grad.flat();
    if (config_.kind == OptimizerKind::kSgd) {
      p -= static_cast<S>(lr) * g;
      ++t_;
      return;
    }
    ++t_;
    const S b1 = static_cast<S>(config_.beta1), b2 = static_cast<S>(config_.beta2);
    m_ = b1 * m_ + (static_cast<S>(1) - b1) * g;
    v_ = b2 * v_ + (static_cast<S>(1) - b2) * g.cwiseProduct(g);
    const S c1 = static_cast<S>(1.0 - std::pow(config_.beta1, static_cast<double>(t_)));
    const S c2 = static_cast<S>(1.0 - std::pow(config_.beta2, static_cast<double>(t_)));
    const S step = static_cast<S>(lr);
    const S eps = static_cast<S>(config_.eps);
    p.array() -= step * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
  }

  const OptimizerConfig& config() const { return config_; }
  Vec& first_moment() { return m_; }
  Vec& second_moment() { return v_; }
  const Vec& first_moment() const { return m_; }
  const Vec& second_moment() const { return v_; }
  long steps() const { return t_; }
  void set_steps(long t) { t_ = t; }

 private:
  OptimizerConfig config_;
  Vec m_, v_;
  long t_ = 0;
};

/// Rescales `grad` so its global L2 norm is at most `max_norm`; returns the pre-clip norm.
template <typename S>
double clip_grad_norm(GradientBundle<S>& grad, double max_norm) {
  const double norm = static_cast<double>(grad.flat().norm());
  if (max_norm > 0.0 && norm > max_norm) {
    grad.flat() *= static_cast<S>(max_norm / (norm + 1e-6));
  }
  return norm;
}

}  // namespace depthnav
