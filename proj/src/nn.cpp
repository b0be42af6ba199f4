#include "depthnav/nn.hpp"

#include <cmath>
#include <numbers>

#include "depthnav/contract.hpp"

namespace depthnav {

std::string Architecture::describe() const {
  return "mlp-shared-tanh:" + std::to_string(input) + "x" + std::to_string(hidden) + "x" + std::to_string(hidden) +
         ":gauss" + std::to_string(actions) + ":value1";
}

template <typename S>
ActorCritic<S>::ActorCritic(const Architecture& arch) : arch_(arch) {
  expect(arch.input > 0 && arch.hidden > 0 && arch.actions > 0, "ActorCritic: dimensions must be positive");
  Eigen::Index off = 0;
  auto take = [&off](Eigen::Index n) {
    const Eigen::Index at = off;
    off += n;
    return at;
  };
  const Eigen::Index in = arch.input, h = arch.hidden, a = arch.actions;
  off_w1_ = take(h * in);
  off_b1_ = take(h);
  off_w2_ = take(h * h);
  off_b2_ = take(h);
  off_wp_ = take(a * h);
  off_bp_ = take(a);
  off_wv_ = take(h);
  off_bv_ = take(1);
  off_ls_ = take(a);
  flat_ = Vec::Zero(off);
}

template <typename S>
void ActorCritic<S>::clamp_log_std() {
  auto ls = log_std();
  for (Eigen::Index i = 0; i < ls.size(); ++i) {
    ls[i] = std::clamp(ls[i], static_cast<S>(kLogStdMin), static_cast<S>(kLogStdMax));
  }
}

template <typename S>
std::string ActorCritic<S>::tensor_name(std::size_t i) const {
  const auto idx = static_cast<Eigen::Index>(i);
  const std::pair<Eigen::Index, const char*> table[] = {{off_ls_, "log_std"}, {off_bv_, "value.bias"},
                                                        {off_wv_, "value.weight"}, {off_bp_, "policy.bias"},
                                                        {off_wp_, "policy.weight"}, {off_b2_, "trunk2.bias"},
                                                        {off_w2_, "trunk2.weight"}, {off_b1_, "trunk1.bias"},
                                                        {off_w1_, "trunk1.weight"}};
  for (const auto& [off, name] : table) {
    if (idx >= off) return name;
  }
  return "?";
}

template <typename S>
void orthogonal_fill(Eigen::Ref<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>> w, double gain, Rng& rng) {
  const Eigen::Index rows = w.rows(), cols = w.cols();
  const Eigen::Index big = std::max(rows, cols), small = std::min(rows, cols);
  Eigen::MatrixXd g(big, small);
  for (Eigen::Index j = 0; j < small; ++j) {
    for (Eigen::Index i = 0; i < big; ++i) g(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (Eigen::Index j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  q *= gain;
  if (rows >= cols) {
    w = q.cast<S>();
  } else {
    w = q.transpose().cast<S>();
  }
}

template <typename S>
void orthogonal_init(ActorCritic<S>& params, Rng& rng) {
  params.set_zero();
  orthogonal_fill<S>(params.w1(), std::numbers::sqrt2, rng);
  orthogonal_fill<S>(params.w2(), std::numbers::sqrt2, rng);
  orthogonal_fill<S>(params.wp(), 0.01, rng);
  orthogonal_fill<S>(params.wv(), 1.0, rng);
}

template <typename S>
void forward_batch(const ActorCritic<S>& params, const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>>& obs,
                   ForwardCache<S>& cache) {
  expect(obs.rows() == params.arch().input, "forward: observation length does not match the network input");
  cache.h1.noalias() = params.w1() * obs;
  cache.h1.colwise() += params.b1();
  cache.h1 = cache.h1.array().tanh();
  cache.h2.noalias() = params.w2() * cache.h1;
  cache.h2.colwise() += params.b2();
  cache.h2 = cache.h2.array().tanh();
  cache.mean.noalias() = params.wp() * cache.h2;
  cache.mean.colwise() += params.bp();
  cache.value.noalias() = params.wv() * cache.h2;
  cache.value.array() += params.bv()[0];
}

template <typename S>
PolicyOutput<S> forward(const ActorCritic<S>& params, std::span<const S> obs) {
  expect(static_cast<int>(obs.size()) == params.arch().input, "forward: observation length does not match the network input");
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  ForwardCache<S> cache;
  forward_batch<S>(params, Eigen::Map<const Mat>(obs.data(), static_cast<Eigen::Index>(obs.size()), 1), cache);
  return {cache.mean.col(0), params.log_std(), cache.value(0, 0)};
}

template <typename S>
S gaussian_log_prob(const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& mean,
                    const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& log_std,
                    const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& action) {
  const S half_log_2pi = static_cast<S>(0.5 * std::log(2.0 * std::numbers::pi));
  S lp = 0;
  for (Eigen::Index d = 0; d < mean.size(); ++d) {
    const S diff = action[d] - mean[d];
    const S inv_var = std::exp(static_cast<S>(-2) * log_std[d]);
    lp += -static_cast<S>(0.5) * diff * diff * inv_var - log_std[d] - half_log_2pi;
  }
  return lp;
}

template <typename S>
S gaussian_entropy(const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& log_std) {
  const S half_log_2pie = static_cast<S>(0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e));
  return log_std.sum() + half_log_2pie * static_cast<S>(log_std.size());
}

template <typename S>
SampledAction<S> sample_action(const ActorCritic<S>& params, std::span<const S> obs, Rng& rng) {
  const PolicyOutput<S> out = forward(params, obs);
  SampledAction<S> s;
  s.action.resize(out.mean.size());
  for (Eigen::Index d = 0; d < out.mean.size(); ++d) {
    const double z = rng.normal();
    s.action[d] = static_cast<S>(static_cast<double>(out.mean[d]) + std::exp(static_cast<double>(out.log_std[d])) * z);
  }
  s.log_prob = gaussian_log_prob<S>(out.mean, out.log_std, s.action);
  s.value = out.value;
  return s;
}

template <typename S>
LogProbEntropy<S> log_prob_and_entropy(const ActorCritic<S>& params, std::span<const S> obs,
                                       const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>& action) {
  expect(action.size() == params.arch().actions, "log_prob_and_entropy: action dimension mismatch");
  const PolicyOutput<S> out = forward(params, obs);
  return {gaussian_log_prob<S>(out.mean, out.log_std, action), gaussian_entropy<S>(out.log_std)};
}

namespace {

template <typename S>
void require_finite(S value, const char* term) {
  if (!std::isfinite(static_cast<double>(value))) {
    throw NumericError(term, std::string("non-finite value in loss term '") + term + "'");
  }
}

}  // namespace

template <typename S>
LossReport<S> loss_and_gradient(const ActorCritic<S>& params, const Minibatch<S>& batch, const LossSpec& spec,
                                GradientBundle<S>* grad) {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
  const Eigen::Index n = batch.size();
  const Eigen::Index na = params.arch().actions;
  expect(n > 0, "loss: empty minibatch");
  expect(batch.actions.rows() == na && batch.actions.cols() == n && batch.old_log_prob.size() == n &&
             batch.advantages.size() == n && batch.value_targets.size() == n,
         "loss: minibatch fields are incomplete or inconsistent");

  ForwardCache<S> cache;
  forward_batch<S>(params, batch.obs, cache);

  const Vec log_std = params.log_std();
  Vec inv_var(na);
  for (Eigen::Index d = 0; d < na; ++d) inv_var[d] = std::exp(static_cast<S>(-2) * log_std[d]);
  const S half_log_2pi = static_cast<S>(0.5 * std::log(2.0 * std::numbers::pi));
  const S eps = static_cast<S>(spec.clip_eps);
  const S inv_n = static_cast<S>(1) / static_cast<S>(n);

  const Mat diff = batch.actions - cache.mean;
  Vec log_prob(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    S lp = 0;
    for (Eigen::Index d = 0; d < na; ++d) {
      lp += -static_cast<S>(0.5) * diff(d, i) * diff(d, i) * inv_var[d] - log_std[d] - half_log_2pi;
    }
    log_prob[i] = lp;
  }

  LossReport<S> rep;
  Vec ratio_grad(n);  // d(policy objective)/d(ratio) per sample
  Vec ratio(n);
  S surrogate = 0, clipped_count = 0, kl = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const S log_ratio = log_prob[i] - batch.old_log_prob[i];
    const S r = std::exp(log_ratio);
    const S adv = batch.advantages[i];
    const S surr1 = r * adv;
    const S surr2 = std::clamp(r, static_cast<S>(1) - eps, static_cast<S>(1) + eps) * adv;
    if (surr1 <= surr2) {
      surrogate += surr1;
      ratio_grad[i] = adv;
    } else {
      surrogate += surr2;
      ratio_grad[i] = 0;
    }
    if (std::abs(r - static_cast<S>(1)) > eps) clipped_count += 1;
    kl += (r - static_cast<S>(1)) - log_ratio;
    ratio[i] = r;
  }
  rep.policy_loss = -surrogate * inv_n;
  const Vec value_err = (cache.value.transpose() - batch.value_targets);
  rep.value_loss = value_err.squaredNorm() * inv_n;
  rep.entropy = gaussian_entropy<S>(log_std);
  rep.clip_fraction = clipped_count * inv_n;
  rep.approx_kl = kl * inv_n;

  require_finite(rep.policy_loss, "policy_loss");
  require_finite(rep.value_loss, "value_loss");
  require_finite(rep.entropy, "entropy");
  const S scale = static_cast<S>(spec.scale);
  rep.loss = scale * (rep.policy_loss + static_cast<S>(spec.vf_coef) * rep.value_loss -
                      static_cast<S>(spec.ent_coef) * rep.entropy);
  require_finite(rep.loss, "loss");

  if (grad == nullptr) return rep;
  expect(grad->arch() == params.arch(), "backward: gradient bundle shape mismatch");

  // d loss / d log_prob_i
  const Vec dlp = (-scale * inv_n) * ratio_grad.cwiseProduct(ratio);

  Mat dmean(na, n);
  Vec dls = Vec::Constant(na, -scale * static_cast<S>(spec.ent_coef));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index d = 0; d < na; ++d) {
      const S zz = diff(d, i) * diff(d, i) * inv_var[d];
      dmean(d, i) = dlp[i] * diff(d, i) * inv_var[d];
      dls[d] += dlp[i] * (zz - static_cast<S>(1));
    }
  }
  const Eigen::Matrix<S, 1, Eigen::Dynamic> dvalue =
      (static_cast<S>(2) * scale * static_cast<S>(spec.vf_coef) * inv_n) * value_err.transpose();

  grad->wp().noalias() = dmean * cache.h2.transpose();
  grad->bp() = dmean.rowwise().sum();
  grad->wv().noalias() = dvalue * cache.h2.transpose();
  grad->bv()[0] = dvalue.sum();
  grad->log_std() = dls;

  Mat dz2 = params.wp().transpose() * dmean;
  dz2.noalias() += params.wv().transpose() * dvalue;
  dz2.array() *= (static_cast<S>(1) - cache.h2.array().square());
  grad->w2().noalias() = dz2 * cache.h1.transpose();
  grad->b2() = dz2.rowwise().sum();

  Mat dz1 = params.w2().transpose() * dz2;
  dz1.array() *= (static_cast<S>(1) - cache.h1.array().square());
  grad->w1().noalias() = dz1 * batch.obs.transpose();
  grad->b1() = dz1.rowwise().sum();

  if (!grad->all_finite()) {
    for (std::size_t i = 0; i < grad->size(); ++i) {
      if (!std::isfinite(static_cast<double>(grad->flat()[static_cast<Eigen::Index>(i)]))) {
        throw NumericError(grad->tensor_name(i), "non-finite gradient in " + grad->tensor_name(i));
      }
    }
  }
  return rep;
}

#define DEPTHNAV_INSTANTIATE_NN(S)                                                                                    \
  template class ActorCritic<S>;                                                                                      \
  template void orthogonal_fill<S>(Eigen::Ref<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>>, double, Rng&);      \
  template void orthogonal_init<S>(ActorCritic<S>&, Rng&);                                                            \
  template void forward_batch<S>(const ActorCritic<S>&,                                                               \
                                 const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>>&,           \
                                 ForwardCache<S>&);                                                                   \
  template PolicyOutput<S> forward<S>(const ActorCritic<S>&, std::span<const S>);                                    \
  template S gaussian_log_prob<S>(const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>&,                      \
                                  const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>&,                      \
                                  const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>&);                     \
  template S gaussian_entropy<S>(const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>&);                      \
  template SampledAction<S> sample_action<S>(const ActorCritic<S>&, std::span<const S>, Rng&);                       \
  template LogProbEntropy<S> log_prob_and_entropy<S>(const ActorCritic<S>&, std::span<const S>,                      \
                                                     const Eigen::Ref<const Eigen::Matrix<S, Eigen::Dynamic, 1>>&);  \
  template LossReport<S> loss_and_gradient<S>(const ActorCritic<S>&, const Minibatch<S>&, const LossSpec&,            \
                                              GradientBundle<S>*);

DEPTHNAV_INSTANTIATE_NN(float)
DEPTHNAV_INSTANTIATE_NN(double)

}  // namespace depthnav
