#include "depthnav/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "depthnav/contract.hpp"
#include "depthnav/rng.hpp"

namespace depthnav {

namespace {

using MatD = Eigen::MatrixXd;
using VecD = Eigen::VectorXd;

struct GradInstance {
  ActorCritic<double> params;
  Minibatch<double> batch;
  LossSpec spec;
};

GradInstance make_instance(const GradCheckOptions& o, Rng& rng) {
  GradInstance g{ActorCritic<double>(o.arch), {}, {0.2, 0.5, 0.01, 1.0}};
  const Architecture& a = o.arch;
  auto fill = [&rng](auto&& m, double scale) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  };
  fill(g.params.w1(), 1.0 / std::sqrt(a.input));
  fill(g.params.b1(), 0.1);
  fill(g.params.w2(), 1.0 / std::sqrt(a.hidden));
  fill(g.params.b2(), 0.1);
  fill(g.params.wp(), 1.0 / std::sqrt(a.hidden));
  fill(g.params.bp(), 0.1);
  fill(g.params.wv(), 1.0 / std::sqrt(a.hidden));
  fill(g.params.bv(), 0.1);
  for (Eigen::Index i = 0; i < a.actions; ++i) g.params.log_std()[i] = rng.uniform(-1.0, 0.5);

  const int n = o.batch;
  Minibatch<double>& b = g.batch;
  b.obs.resize(a.input, n);
  for (Eigen::Index i = 0; i < b.obs.size(); ++i) b.obs.data()[i] = rng.uniform();
  ForwardCache<double> cache;
  forward_batch<double>(g.params, b.obs, cache);

  b.actions.resize(a.actions, n);
  b.old_log_prob.resize(n);
  b.advantages.resize(n);
  b.value_targets.resize(n);
  const VecD ls = g.params.log_std();
  for (int j = 0; j < n; ++j) {
    for (int d = 0; d < a.actions; ++d) b.actions(d, j) = cache.mean(d, j) + std::exp(ls[d]) * rng.normal();
    const VecD mean_j = cache.mean.col(j), action_j = b.actions.col(j);
    const double lp = gaussian_log_prob<double>(mean_j, ls, action_j);
    // Pick a ratio well inside or well outside the clip range, never near its edges.
    double log_ratio = 0.0;
    do {
      log_ratio = rng.uniform(-0.4, 0.4);
    } while (std::abs(std::exp(log_ratio) - (1.0 - g.spec.clip_eps)) < 1e-2 ||
             std::abs(std::exp(log_ratio) - (1.0 + g.spec.clip_eps)) < 1e-2);
    b.old_log_prob[j] = lp - log_ratio;
    b.advantages[j] = rng.normal();
    b.value_targets[j] = cache.value(0, j) + rng.normal();
  }
  return g;
}

}  // namespace

GradCheckResult grad_check(const GradCheckOptions& o) {
  expect(o.instances > 0 && o.batch > 0, "grad check: need at least one instance and sample");
  GradCheckResult result;
  for (int inst = 0; inst < o.instances; ++inst) {
    Rng rng(Rng::derive(o.seed, static_cast<std::uint64_t>(inst)));
    GradInstance g = make_instance(o, rng);
    GradientBundle<double> analytic(o.arch);
    loss_and_gradient(g.params, g.batch, g.spec, &analytic);

    auto& flat = g.params.flat();
    for (Eigen::Index j = 0; j < flat.size(); ++j) {
      const double saved = flat[j];
      flat[j] = saved + o.step;
      const double plus = loss_and_gradient<double>(g.params, g.batch, g.spec, nullptr).loss;
      flat[j] = saved - o.step;
      const double minus = loss_and_gradient<double>(g.params, g.batch, g.spec, nullptr).loss;
      flat[j] = saved;
      const double numeric = (plus - minus) / (2.0 * o.step);
      const double a = analytic.flat()[j];
      ++result.entries;
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), o.abs_floor});
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_tensor = g.params.tensor_name(static_cast<std::size_t>(j));
      }
    }
    ++result.instances;
  }
  result.pass = result.max_rel_error < o.tolerance;
  return result;
}

// ---------------------------------------------------------------------------

namespace {

struct Primitive {
  bool circle = false;
  Segment seg;
  Vec2 center;
  double radius = 0.0;
};

std::vector<Primitive> primitives(const Scene& scene, double time) {
  std::vector<Primitive> out;
  for (const Segment& s : scene.segments) out.push_back({false, s, {}, 0.0});
  for (const Segment& s : boundary_walls(scene)) out.push_back({false, s, {}, 0.0});
  for (const CircleObstacle& c : scene.circles) out.push_back({true, {}, circle_position(scene, c, time), c.radius});
  return out;
}

double primitive_distance(const Primitive& p, Vec2 q) {
  return p.circle ? (q - p.center).norm() - p.radius : point_segment_distance(q, p.seg);
}

// Signed side function whose zero set contains the primitive boundary.
double side(const Primitive& p, Vec2 q) {
  return p.circle ? (q - p.center).norm() - p.radius : (p.seg.b - p.seg.a).cross(q - p.seg.a);
}

// Bisects a sign change of side() in [lo, hi]; nullopt when there is none or
// when the root falls off the end of a segment.
std::optional<double> bisect(const Primitive& p, Vec2 o, Vec2 dir, double lo, double hi) {
  double flo = side(p, o + dir * lo);
  const double fhi = side(p, o + dir * hi);
  if (flo == 0.0) return lo;
  if ((flo > 0.0) == (fhi > 0.0) && fhi != 0.0) return std::nullopt;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = side(p, o + dir * mid);
    if ((fm > 0.0) == (flo > 0.0) && fm != 0.0) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  const double root = 0.5 * (lo + hi);
  if (!p.circle && point_segment_distance(o + dir * root, p.seg) > 1e-9) return std::nullopt;
  return root;
}

}  // namespace

RayHit march_ray(const Scene& scene, Vec2 origin, Vec2 dir, double r_max, double time, double step, double detect) {
  const std::vector<Primitive> prims = primitives(scene, time);
  for (const Primitive& p : prims) {
    if (p.circle && (origin - p.center).norm() <= p.radius) return {0.0, true};
  }
  const long n = static_cast<long>(std::ceil(r_max / step));
  for (long k = 0; k <= n; ++k) {
    const double d = std::min(r_max, k * step);
    const Vec2 q = origin + dir * d;
    std::optional<double> best;
    for (const Primitive& p : prims) {
      if (primitive_distance(p, q) > detect) continue;
      const auto root = bisect(p, origin, dir, std::max(0.0, d - step), d + step);
      if (root && (!best || *root < *best)) best = root;
    }
    if (best) {
      if (*best > r_max) return {r_max, false};
      return {*best, true};
    }
  }
  return {r_max, false};
}

RaycastCheckResult raycast_check(const RaycastCheckOptions& o) {
  RaycastCheckResult result;
  for (int s = 0; s < o.scenes; ++s) {
    Rng rng(Rng::derive(o.seed, static_cast<std::uint64_t>(s)));
    Scene scene;
    scene.bounds = {-5.0, -5.0, 5.0, 5.0};
    scene.open_bounds = rng.uniform() < 0.3;
    scene.wrap_moving = rng.uniform() < 0.3;
    const int n_seg = 1 + static_cast<int>(rng.uniform_index(6));
    for (int i = 0; i < n_seg; ++i) {
      Vec2 a{rng.uniform(-5, 5), rng.uniform(-5, 5)};
      Vec2 b = a + Vec2{rng.uniform(-4, 4), rng.uniform(-4, 4)};
      scene.segments.push_back({a, b});
    }
    const int n_circ = static_cast<int>(rng.uniform_index(5));
    for (int i = 0; i < n_circ; ++i) {
      CircleObstacle c{{rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(0.1, 1.5), {}};
      if (rng.uniform() < 0.5) c.velocity = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
      scene.circles.push_back(c);
    }
    const Vec2 origin{rng.uniform(-4.9, 4.9), rng.uniform(-4.9, 4.9)};
    const Vec2 dir = Vec2::from_angle(rng.uniform(-M_PI, M_PI));
    const double r_max = rng.uniform(1.0, 10.0);
    const double time = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 20.0);

    const RayHit exact = ray_cast(scene, origin, dir, r_max, time);
    const RayHit oracle = march_ray(scene, origin, dir, r_max, time, o.march_step, o.detect);
    ++result.rays;
    result.hits += exact.hit ? 1 : 0;
    if (exact.hit != oracle.hit) ++result.flag_mismatches;
    result.max_distance_error = std::max(result.max_distance_error, std::abs(exact.distance - oracle.distance));
  }
  result.pass = result.flag_mismatches == 0 && result.max_distance_error <= o.tolerance;
  return result;
}

}  // namespace depthnav
