#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "depthnav/contract.hpp"
#include "depthnav/nn.hpp"
#include "depthnav/rng.hpp"

using namespace depthnav;

namespace {

using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

ActorCritic<double> random_params(Rng& rng, const Architecture& arch = {}) {
  ActorCritic<double> p(arch);
  for (Eigen::Index i = 0; i < p.flat().size(); ++i) p.flat()[i] = 0.2 * rng.normal();
  p.log_std().setConstant(-0.3);
  return p;
}

std::vector<double> random_obs(Rng& rng, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform();
  return v;
}

Minibatch<double> random_batch(const ActorCritic<double>& p, Rng& rng, int n) {
  const Architecture& a = p.arch();
  Minibatch<double> b;
  b.obs.resize(a.input, n);
  for (Eigen::Index i = 0; i < b.obs.size(); ++i) b.obs.data()[i] = rng.uniform();
  b.actions.resize(a.actions, n);
  for (Eigen::Index i = 0; i < b.actions.size(); ++i) b.actions.data()[i] = rng.normal();
  b.old_log_prob.resize(n);
  b.advantages.resize(n);
  b.value_targets.resize(n);
  ForwardCache<double> cache;
  forward_batch<double>(p, b.obs, cache);
  for (int j = 0; j < n; ++j) {
    const VecD mean = cache.mean.col(j), action = b.actions.col(j);
    const VecD ls = p.log_std();
    b.old_log_prob[j] = gaussian_log_prob<double>(mean, ls, action) - rng.uniform(-0.1, 0.1);
    b.advantages[j] = rng.normal();
    b.value_targets[j] = rng.normal();
  }
  return b;
}

}  // namespace

TEST_CASE("parameter layout matches the architecture") {
  const ActorCritic<float> p;
  CHECK(p.size() == 64 * 170 + 64 + 64 * 64 + 64 + 2 * 64 + 2 + 64 + 1 + 2);
  CHECK(p.w1().rows() == 64);
  CHECK(p.w1().cols() == 170);
  CHECK(p.wp().rows() == 2);
  CHECK(p.wv().rows() == 1);
}

TEST_CASE("zero parameters give zero outputs") {
  ActorCritic<double> p;
  p.set_zero();
  Rng rng(1);
  const auto obs = random_obs(rng, 170);
  const PolicyOutput<double> out = forward(p, std::span<const double>(obs));
  CHECK(out.mean.isZero(0.0));
  CHECK(out.value == 0.0);
}

TEST_CASE("bias-only heads output their biases") {
  ActorCritic<double> p;
  p.set_zero();
  p.bp() << 0.3, -0.7;
  p.bv()[0] = 1.25;
  Rng rng(2);
  for (int i = 0; i < 5; ++i) {
    const auto obs = random_obs(rng, 170);
    const PolicyOutput<double> out = forward(p, std::span<const double>(obs));
    CHECK(out.mean[0] == 0.3);
    CHECK(out.mean[1] == -0.7);
    CHECK(out.value == 1.25);
  }
}

TEST_CASE("small input perturbations stay within the Lipschitz bound") {
  Rng rng(3);
  const ActorCritic<double> p = random_params(rng);
  const double lip_mean = p.wp().norm() * p.w2().norm() * p.w1().norm();
  const double lip_value = p.wv().norm() * p.w2().norm() * p.w1().norm();
  for (int i = 0; i < 20; ++i) {
    auto obs = random_obs(rng, 170);
    auto moved = obs;
    for (double& x : moved) x += 1e-6;
    const double delta = 1e-6 * std::sqrt(170.0);
    const auto a = forward(p, std::span<const double>(obs));
    const auto b = forward(p, std::span<const double>(moved));
    CHECK((a.mean - b.mean).norm() <= lip_mean * delta * (1 + 1e-9));
    CHECK(std::abs(a.value - b.value) <= lip_value * delta * (1 + 1e-9));
  }
}

TEST_CASE("batched forward matches the single-sample forward") {
  Rng rng(4);
  const ActorCritic<double> p = random_params(rng);
  MatD obs(170, 6);
  for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = rng.uniform();
  ForwardCache<double> cache;
  forward_batch<double>(p, obs, cache);
  for (int j = 0; j < 6; ++j) {
    const VecD col = obs.col(j);
    const auto out = forward(p, std::span<const double>(col.data(), 170));
    CHECK((out.mean - cache.mean.col(j)).norm() < 1e-12);
    CHECK(out.value == doctest::Approx(cache.value(0, j)).epsilon(1e-12));
  }
}

TEST_CASE("standard normal density and entropy") {
  const VecD zero = VecD::Zero(2);
  CHECK(gaussian_log_prob<double>(zero, zero, zero) == doctest::Approx(-std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  CHECK(gaussian_entropy<double>(zero) == doctest::Approx(std::log(2.0 * std::numbers::pi * std::numbers::e)).epsilon(1e-14));
  const VecD doubled = VecD::Constant(2, std::log(2.0));
  CHECK(gaussian_entropy<double>(doubled) - gaussian_entropy<double>(zero) == doctest::Approx(2.0 * std::log(2.0)));
}

TEST_CASE("density is maximal at the mean") {
  Rng rng(5);
  VecD mean(2), ls(2);
  mean << 0.4, -1.1;
  ls << -0.5, 0.2;
  const double at_mean = gaussian_log_prob<double>(mean, ls, mean);
  for (int i = 0; i < 200; ++i) {
    VecD a = mean + 0.3 * VecD::Random(2);
    CHECK(gaussian_log_prob<double>(mean, ls, a) < at_mean);
  }
}

TEST_CASE("entropy agrees with a Monte Carlo estimate") {
  Rng rng(6);
  ActorCritic<double> p;
  p.set_zero();
  p.bp() << 0.2, -0.4;
  p.log_std() << -0.6, 0.3;
  const std::vector<double> obs(170, 0.5);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const SampledAction<double> s = sample_action(p, std::span<const double>(obs), rng);
    sum += -s.log_prob;
    sum_sq += s.log_prob * s.log_prob;
  }
  const double mean = sum / n;
  const double sigma = std::sqrt((sum_sq / n - mean * mean) / n);
  const VecD ls = p.log_std();
  CHECK(std::abs(mean - gaussian_entropy<double>(ls)) < 3.0 * sigma);
}

TEST_CASE("sampling is reproducible and collapses to the mean for tiny std") {
  Rng rng(7);
  ActorCritic<double> p = random_params(rng);
  const auto obs = random_obs(rng, 170);
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) {
    const auto sa = sample_action(p, std::span<const double>(obs), a);
    const auto sb = sample_action(p, std::span<const double>(obs), b);
    CHECK(bool(sa.action == sb.action));
    CHECK(sa.log_prob == sb.log_prob);
  }
  p.log_std().setConstant(kLogStdMin);
  const auto mean = forward(p, std::span<const double>(obs)).mean;
  const auto s = sample_action(p, std::span<const double>(obs), a);
  CHECK((s.action - mean).norm() < 1e-7);
}

TEST_CASE("orthogonal initialisation") {
  Rng rng(8);
  ActorCritic<double> p;
  orthogonal_init(p, rng);
  auto check = [](const MatD& w, double gain) {
    const MatD g = w.rows() >= w.cols() ? MatD(w.transpose() * w) : MatD(w * w.transpose());
    const MatD expected = gain * gain * MatD::Identity(g.rows(), g.cols());
    CHECK((g - expected).cwiseAbs().maxCoeff() < 1e-6);
  };
  check(p.w1(), std::sqrt(2.0));
  check(p.w2(), std::sqrt(2.0));
  check(p.wp(), 0.01);
  check(p.wv(), 1.0);
  CHECK(p.b1().isZero(0.0));
  CHECK(p.b2().isZero(0.0));
  CHECK(p.bp().isZero(0.0));
  CHECK(p.bv().isZero(0.0));
  CHECK(p.log_std().isZero(0.0));
}

TEST_CASE("loss gradient is exactly zero at a stationary point") {
  Rng rng(9);
  const ActorCritic<double> p = random_params(rng);
  Minibatch<double> b = random_batch(p, rng, 8);
  ForwardCache<double> cache;
  forward_batch<double>(p, b.obs, cache);
  for (int j = 0; j < 8; ++j) {
    const VecD mean = cache.mean.col(j), action = b.actions.col(j);
    const VecD ls = p.log_std();
    b.old_log_prob[j] = gaussian_log_prob<double>(mean, ls, action);
    b.advantages[j] = 0.0;
    b.value_targets[j] = cache.value(0, j);
  }
  const GradientBundle<double> g = backward(p, b, {0.2, 0.5, 0.0, 1.0});
  CHECK(g.flat().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scaling the loss scales every gradient") {
  Rng rng(10);
  const ActorCritic<double> p = random_params(rng);
  const Minibatch<double> b = random_batch(p, rng, 5);
  const GradientBundle<double> g1 = backward(p, b, {0.2, 0.5, 0.01, 1.0});
  const GradientBundle<double> g3 = backward(p, b, {0.2, 0.5, 0.01, 3.0});
  CHECK((g3.flat() - 3.0 * g1.flat()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("single-sample gradient matches central differences") {
  Rng rng(11);
  const Architecture small{12, 8, 2};
  ActorCritic<double> p = random_params(rng, small);
  const Minibatch<double> b = random_batch(p, rng, 1);
  const LossSpec spec{0.2, 0.5, 0.01, 1.0};
  const GradientBundle<double> g = backward(p, b, spec);
  const double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index j = 0; j < p.flat().size(); ++j) {
    const double saved = p.flat()[j];
    p.flat()[j] = saved + h;
    const double plus = loss_and_gradient<double>(p, b, spec, nullptr).loss;
    p.flat()[j] = saved - h;
    const double minus = loss_and_gradient<double>(p, b, spec, nullptr).loss;
    p.flat()[j] = saved;
    const double fd = (plus - minus) / (2 * h);
    const double a = g.flat()[j];
    worst = std::max(worst, std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-7}));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("non-finite inputs raise a numeric error") {
  Rng rng(12);
  const ActorCritic<double> p = random_params(rng);
  Minibatch<double> b = random_batch(p, rng, 3);
  b.advantages[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(loss_and_gradient<double>(p, b, {}, nullptr), NumericError);
}

TEST_CASE("log_std clamp keeps the range") {
  ActorCritic<float> p;
  p.log_std() << -50.0f, 9.0f;
  p.clamp_log_std();
  CHECK(p.log_std()[0] == static_cast<float>(kLogStdMin));
  CHECK(p.log_std()[1] == static_cast<float>(kLogStdMax));
}
