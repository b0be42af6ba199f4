#include <doctest.h>

#include <cmath>
#include <numbers>

#include "depthnav/lidar.hpp"
#include "depthnav/rng.hpp"

using namespace depthnav;

namespace {

Scene random_scene(Rng& rng) {
  Scene s;
  s.bounds = {-20, -20, 20, 20};
  s.open_bounds = true;
  for (int i = 0; i < 6; ++i) {
    const Vec2 a{rng.uniform(-7, 7), rng.uniform(-7, 7)};
    s.segments.push_back({a, a + Vec2{rng.uniform(-4, 4), rng.uniform(-4, 4)}});
  }
  for (int i = 0; i < 4; ++i) s.circles.push_back({{rng.uniform(-7, 7), rng.uniform(-7, 7)}, rng.uniform(0.2, 1.2), {}});
  return s;
}

Vec2 rotate_about_origin(Vec2 p, double angle) { return p.rotated(angle); }

}  // namespace

TEST_CASE("ray origin applies the rotated mount offset") {
  LidarConfig c;
  c.mount_x = 0.0;
  c.mount_y = 0.0;
  const VehicleState s{{3.0, -4.0}, 1.1, 0.0};
  CHECK(ray_origin(s, c) == Vec2{3.0, -4.0});
  c.mount_x = 0.2;
  const Vec2 o = ray_origin({{0, 0}, 0.0, 0.0}, c);
  CHECK(o.x == doctest::Approx(0.2));
  CHECK(o.y == doctest::Approx(0.0));
  const Vec2 r = ray_origin({{1, 2}, std::numbers::pi / 2, 0.0}, c);
  CHECK(r.x == doctest::Approx(1.0));
  CHECK(r.y == doctest::Approx(2.2));
}

TEST_CASE("ray fan spans the field of view centred on the heading") {
  const LidarConfig c;
  const double yaw = 0.4;
  CHECK(ray_heading(yaw, c, 0) == doctest::Approx(yaw - c.fov / 2));
  CHECK(ray_heading(yaw, c, c.n_rays - 1) == doctest::Approx(yaw + c.fov / 2));
  CHECK(ray_heading(yaw, c, c.n_rays - 1) - ray_heading(yaw, c, 0) == doctest::Approx(c.fov).epsilon(1e-14));
  for (int k = 1; k < c.n_rays; ++k) {
    CHECK(ray_heading(yaw, c, k) - ray_heading(yaw, c, k - 1) == doctest::Approx(c.fov / (c.n_rays - 1)));
  }
}

TEST_CASE("empty scene reads r_max everywhere") {
  Scene s;
  s.bounds = {-100, -100, 100, 100};
  s.open_bounds = true;
  const LidarConfig c;
  const LidarScan scan = depthnav::scan(s, {}, c, 0.0);
  REQUIRE(scan.distances.size() == 170);
  for (std::size_t k = 0; k < scan.distances.size(); ++k) {
    CHECK(scan.distances[k] == c.r_max);
    CHECK_FALSE(scan.hit_flags[k]);
  }
}

TEST_CASE("flat wall ahead follows the secant law") {
  Scene s;
  s.bounds = {-100, -100, 100, 100};
  s.open_bounds = true;
  s.segments.push_back({{5, -50}, {5, 50}});
  LidarConfig c;
  c.mount_x = 0.0;
  c.n_rays = 171;  // odd so that a centre ray exists
  c.r_max = 12.0;
  const LidarScan scan = depthnav::scan(s, {}, c, 0.0);
  CHECK(scan.distances[85] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(scan.distances[0] == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(scan.distances[170] == doctest::Approx(10.0).epsilon(1e-12));
  for (int k = 0; k < c.n_rays; ++k) {
    CHECK(scan.distances[k] == doctest::Approx(5.0 / std::cos(ray_heading(0.0, c, k))).epsilon(1e-12));
  }

  c.r_max = 8.0;  // the edge rays now fall short of the wall
  const LidarScan capped = depthnav::scan(s, {}, c, 0.0);
  CHECK(capped.distances[0] == 8.0);
  CHECK_FALSE(capped.hit_flags[0]);
  CHECK(capped.hit_flags[85]);
}

TEST_CASE("mirrored scene reverses the scan") {
  Rng rng(11);
  LidarConfig c;
  for (int trial = 0; trial < 50; ++trial) {
    const Scene s = random_scene(rng);
    Scene m = s;
    for (Segment& seg : m.segments) seg = {{seg.a.x, -seg.a.y}, {seg.b.x, -seg.b.y}};
    for (CircleObstacle& circ : m.circles) circ.center.y = -circ.center.y;
    const VehicleState pose{{0, 0}, 0.0, 0.0};
    const LidarScan a = depthnav::scan(s, pose, c, 0.0);
    const LidarScan b = depthnav::scan(m, pose, c, 0.0);
    const std::size_t n = a.distances.size();
    for (std::size_t k = 0; k < n; ++k) {
      REQUIRE(std::abs(a.distances[k] - b.distances[n - 1 - k]) < 1e-9);
    }
  }
}

TEST_CASE("rotating scene and pose together leaves the scan unchanged") {
  Rng rng(12);
  const LidarConfig c;
  for (int trial = 0; trial < 50; ++trial) {
    const Scene s = random_scene(rng);
    const double angle = rng.uniform(-M_PI, M_PI);
    Scene r = s;
    for (Segment& seg : r.segments) seg = {rotate_about_origin(seg.a, angle), rotate_about_origin(seg.b, angle)};
    for (CircleObstacle& circ : r.circles) circ.center = rotate_about_origin(circ.center, angle);
    const VehicleState pose{{rng.uniform(-1, 1), rng.uniform(-1, 1)}, rng.uniform(-M_PI, M_PI), 0.0};
    const VehicleState rotated{rotate_about_origin(pose.position, angle), pose.yaw + angle, 0.0};
    const LidarScan a = depthnav::scan(s, pose, c, 0.0);
    const LidarScan b = depthnav::scan(r, rotated, c, 0.0);
    for (std::size_t k = 0; k < a.distances.size(); ++k) {
      REQUIRE(std::abs(a.distances[k] - b.distances[k]) < 1e-9);
    }
  }
}

TEST_CASE("scan delegates to ray_cast and respects its range invariants") {
  Rng rng(13);
  const LidarConfig c;
  for (int trial = 0; trial < 30; ++trial) {
    Scene s = random_scene(rng);
    s.circles.push_back({{rng.uniform(-5, 5), rng.uniform(-5, 5)}, 0.5, {rng.uniform(-1, 1), rng.uniform(-1, 1)}});
    const VehicleState pose{{rng.uniform(-2, 2), rng.uniform(-2, 2)}, rng.uniform(-M_PI, M_PI), 0.0};
    const double time = rng.uniform(0.0, 5.0);
    const LidarScan scan = depthnav::scan(s, pose, c, time);
    const Vec2 origin = ray_origin(pose, c);
    for (int k = 0; k < c.n_rays; ++k) {
      const RayHit h = ray_cast(s, origin, Vec2::from_angle(ray_heading(pose.yaw, c, k)), c.r_max, time);
      REQUIRE(scan.distances[k] == h.distance);
      REQUIRE(scan.hit_flags[k] == h.hit);
      REQUIRE(scan.distances[k] <= c.r_max);
      if (!scan.hit_flags[k]) REQUIRE(scan.distances[k] == c.r_max);
    }
  }
}
