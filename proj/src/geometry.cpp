#include "depthnav/geometry.hpp"

#include <algorithm>
#include <array>
#include <limits>

#include "depthnav/contract.hpp"

namespace depthnav {

namespace {

std::array<Segment, 4> rectangle_walls(const Bounds& b) {
  const Vec2 p00{b.xmin, b.ymin}, p10{b.xmax, b.ymin}, p11{b.xmax, b.ymax}, p01{b.xmin, b.ymax};
  return {Segment{p00, p10}, Segment{p10, p11}, Segment{p11, p01}, Segment{p01, p00}};
}

double wrap_into(double v, double lo, double extent) {
  double r = std::fmod(v - lo, extent);
  if (r < 0.0) r += extent;
  return lo + r;
}

template <typename Fn>
void for_each_wall(const Scene& scene, Fn&& fn) {
  for (const Segment& s : scene.segments) fn(s);
  if (!scene.open_bounds) {
    for (const Segment& s : rectangle_walls(scene.bounds)) fn(s);
  }
}

}  // namespace

std::vector<Segment> boundary_walls(const Scene& scene) {
  if (scene.open_bounds) return {};
  const auto walls = rectangle_walls(scene.bounds);
  return {walls.begin(), walls.end()};
}

Vec2 circle_position(const Scene& scene, const CircleObstacle& circle, double time) {
  if (!circle.moving()) return circle.center;
  Vec2 p = circle.center + circle.velocity * time;
  if (scene.wrap_moving) {
    const Bounds& b = scene.bounds;
    p.x = wrap_into(p.x, b.xmin, b.width());
    p.y = wrap_into(p.y, b.ymin, b.height());
  }
  return p;
}

std::optional<double> intersect_ray_segment(Vec2 origin, Vec2 dir, const Segment& seg) {
  const Vec2 e = seg.b - seg.a;
  const Vec2 ao = seg.a - origin;
  const double denom = dir.cross(e);
  if (denom == 0.0) {
    // Parallel. Only a collinear segment can be hit, at its nearest point ahead.
    if (ao.cross(dir) != 0.0) return std::nullopt;
    const double ta = ao.dot(dir);
    const double tb = (seg.b - origin).dot(dir);
    if (ta < 0.0 && tb < 0.0) return std::nullopt;
    if (ta <= 0.0 || tb <= 0.0) return 0.0;  // origin lies on the segment
    return std::min(ta, tb);
  }
  const double t = ao.cross(e) / denom;
  const double s = ao.cross(dir) / denom;
  if (t < 0.0 || s < 0.0 || s > 1.0) return std::nullopt;
  return t;
}

std::optional<double> intersect_ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius) {
  const Vec2 m = origin - center;
  const double c = m.dot(m) - radius * radius;
  if (c <= 0.0) return 0.0;  // origin inside the disc
  const double b = m.dot(dir);
  if (b > 0.0) return std::nullopt;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  return std::max(0.0, -b - std::sqrt(disc));
}

RayHit ray_cast(const Scene& scene, Vec2 origin, Vec2 dir, double r_max, double time) {
  expect(std::abs(dir.norm() - 1.0) <= 1e-9, "ray_cast: direction must be a unit vector");
  expect(r_max > 0.0, "ray_cast: r_max must be positive");
  expect(time >= 0.0, "ray_cast: time must be nonnegative");

  double best = std::numeric_limits<double>::infinity();
  for_each_wall(scene, [&](const Segment& s) {
    if (auto t = intersect_ray_segment(origin, dir, s); t && *t < best) best = *t;
  });
  for (const CircleObstacle& c : scene.circles) {
    const Vec2 center = circle_position(scene, c, time);
    if (auto t = intersect_ray_circle(origin, dir, center, c.radius); t && *t < best) best = *t;
  }
  if (best <= r_max) return {best, true};
  return {r_max, false};
}

double point_segment_distance(Vec2 p, const Segment& seg) {
  const Vec2 e = seg.b - seg.a;
  const double len2 = e.dot(e);
  double s = len2 > 0.0 ? (p - seg.a).dot(e) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (p - (seg.a + e * s)).norm();
}

double clearance(const Scene& scene, Vec2 p, double time) {
  double best = std::numeric_limits<double>::infinity();
  for_each_wall(scene, [&](const Segment& s) { best = std::min(best, point_segment_distance(p, s)); });
  for (const CircleObstacle& c : scene.circles) {
    best = std::min(best, (p - circle_position(scene, c, time)).norm() - c.radius);
  }
  return best;
}

bool collision_check(const Scene& scene, Vec2 position, double footprint_radius, double time) {
  expect(footprint_radius > 0.0, "collision_check: footprint radius must be positive");
  bool hit = false;
  for_each_wall(scene, [&](const Segment& s) {
    if (!hit && point_segment_distance(position, s) <= footprint_radius) hit = true;
  });
  if (hit) return true;
  for (const CircleObstacle& c : scene.circles) {
    if ((position - circle_position(scene, c, time)).norm() <= c.radius + footprint_radius) return true;
  }
  return false;
}

bool segments_intersect(const Segment& s, const Segment& t) {
  auto orient = [](Vec2 a, Vec2 b, Vec2 c) {
    const double v = (b - a).cross(c - a);
    return (v > 0.0) - (v < 0.0);
  };
  auto on_segment = [](Vec2 a, Vec2 b, Vec2 p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
  };
  const int o1 = orient(s.a, s.b, t.a);
  const int o2 = orient(s.a, s.b, t.b);
  const int o3 = orient(t.a, t.b, s.a);
  const int o4 = orient(t.a, t.b, s.b);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(s.a, s.b, t.a)) return true;
  if (o2 == 0 && on_segment(s.a, s.b, t.b)) return true;
  if (o3 == 0 && on_segment(t.a, t.b, s.a)) return true;
  if (o4 == 0 && on_segment(t.a, t.b, s.b)) return true;
  return false;
}

}  // namespace depthnav
