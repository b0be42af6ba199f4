#include <doctest.h>

#include <cmath>

#include "depthnav/geometry.hpp"
#include "depthnav/rng.hpp"

using namespace depthnav;

namespace {

Scene square_room() {
  Scene s;
  s.bounds = {0.0, 0.0, 10.0, 10.0};
  s.open_bounds = true;
  s.segments = {{{0, 0}, {10, 0}}, {{10, 0}, {10, 10}}, {{10, 10}, {0, 10}}, {{0, 10}, {0, 0}}};
  s.start = {{5, 5}, 0.0};
  return s;
}

Scene open_scene() {
  Scene s;
  s.bounds = {-50, -50, 50, 50};
  s.open_bounds = true;
  return s;
}

Vec2 reflect_y(Vec2 p) { return {p.x, -p.y}; }

}  // namespace

TEST_CASE("ray hits a perpendicular wall") {
  Scene s = open_scene();
  s.segments.push_back({{5, -1}, {5, 1}});
  const RayHit h = ray_cast(s, {0, 0}, {1, 0}, 10.0, 0.0);
  CHECK(h.hit);
  CHECK(h.distance == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("ray in an empty scene returns r_max without a hit") {
  const RayHit h = ray_cast(open_scene(), {0, 0}, {1, 0}, 10.0, 0.0);
  CHECK_FALSE(h.hit);
  CHECK(h.distance == 10.0);
}

TEST_CASE("ray hits the near side of a circle") {
  Scene s = open_scene();
  s.circles.push_back({{4, 0}, 1.0, {}});
  const RayHit h = ray_cast(s, {0, 0}, {1, 0}, 10.0, 0.0);
  CHECK(h.hit);
  CHECK(h.distance == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("obstacles beyond r_max are not reported") {
  Scene s = open_scene();
  s.segments.push_back({{5, -1}, {5, 1}});
  const RayHit h = ray_cast(s, {0, 0}, {1, 0}, 4.0, 0.0);
  CHECK_FALSE(h.hit);
  CHECK(h.distance == 4.0);
}

TEST_CASE("closed bounds act as walls") {
  Scene s;
  s.bounds = {-2, -3, 6, 3};
  const RayHit h = ray_cast(s, {0, 0}, {1, 0}, 10.0, 0.0);
  CHECK(h.hit);
  CHECK(h.distance == doctest::Approx(6.0));
  CHECK(boundary_walls(s).size() == 4);
  s.open_bounds = true;
  CHECK(boundary_walls(s).empty());
}

TEST_CASE("ray segment and circle primitives") {
  SUBCASE("segment behind the origin is ignored") {
    CHECK_FALSE(intersect_ray_segment({0, 0}, {1, 0}, {{-3, -1}, {-3, 1}}));
  }
  SUBCASE("segment missed to the side") {
    CHECK_FALSE(intersect_ray_segment({0, 0}, {1, 0}, {{3, 1}, {3, 2}}));
  }
  SUBCASE("oblique hit matches the line intersection") {
    // Line y = x - 2 crossed by the ray along +y from (4, 0): hit at (4, 2).
    auto t = intersect_ray_segment({4, 0}, {0, 1}, {{0, -2}, {6, 4}});
    REQUIRE(t);
    CHECK(*t == doctest::Approx(2.0));
  }
  SUBCASE("origin inside a circle reads zero") {
    auto t = intersect_ray_circle({0, 0}, {1, 0}, {0.2, 0}, 1.0);
    REQUIRE(t);
    CHECK(*t == doctest::Approx(0.0));
  }
  SUBCASE("tangent circle is hit at the tangent point") {
    auto t = intersect_ray_circle({0, 0}, {1, 0}, {3, 1}, 1.0);
    REQUIRE(t);
    CHECK(*t == doctest::Approx(3.0).epsilon(1e-6));
  }
}

TEST_CASE("moving circles advance with constant velocity and wrap when asked") {
  Scene s;
  s.bounds = {0, 0, 10, 10};
  const CircleObstacle c{{9, 5}, 0.5, {1, 0}};
  CHECK(circle_position(s, c, 0.0) == Vec2{9, 5});
  CHECK(circle_position(s, c, 2.0).x == doctest::Approx(11.0));
  s.wrap_moving = true;
  CHECK(circle_position(s, c, 2.0).x == doctest::Approx(1.0));
  CHECK(circle_position(s, c, 2.0).y == doctest::Approx(5.0));
}

TEST_CASE("collision check in a square room") {
  const Scene room = square_room();
  CHECK_FALSE(collision_check(room, {5, 5}, 0.2, 0.0));
  CHECK(collision_check(room, {0.1, 5}, 0.2, 0.0));
}

TEST_CASE("tangent contact with a circle counts as a collision") {
  Scene s = open_scene();
  s.circles.push_back({{0, 0}, 0.75, {}});
  // Representable exactly: |p - c| = 1.0 = 0.75 + 0.25.
  CHECK(collision_check(s, {1.0, 0.0}, 0.25, 0.0));
  CHECK_FALSE(collision_check(s, {1.0 + 1e-9, 0.0}, 0.25, 0.0));
}

TEST_CASE("point segment distance and segment intersection") {
  const Segment seg{{0, 0}, {4, 0}};
  CHECK(point_segment_distance({2, 3}, seg) == doctest::Approx(3.0));
  CHECK(point_segment_distance({7, 4}, seg) == doctest::Approx(5.0));
  CHECK(segments_intersect({{0, 0}, {2, 2}}, {{0, 2}, {2, 0}}));
  CHECK(segments_intersect({{0, 0}, {2, 0}}, {{2, 0}, {3, 5}}));
  CHECK_FALSE(segments_intersect({{0, 0}, {1, 0}}, {{2, 0}, {3, 0}}));
}

TEST_CASE("properties over random scenes") {
  Rng rng(123);
  for (int trial = 0; trial < 300; ++trial) {
    Scene s = open_scene();
    for (int i = 0; i < 4; ++i) {
      const Vec2 a{rng.uniform(-6, 6), rng.uniform(-6, 6)};
      s.segments.push_back({a, a + Vec2{rng.uniform(-3, 3), rng.uniform(-3, 3)}});
    }
    for (int i = 0; i < 2; ++i) s.circles.push_back({{rng.uniform(-6, 6), rng.uniform(-6, 6)}, rng.uniform(0.2, 1.0), {}});
    const Vec2 origin{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Vec2 dir = Vec2::from_angle(rng.uniform(-M_PI, M_PI));
    const double r_max = 8.0;
    const RayHit base = ray_cast(s, origin, dir, r_max, 0.0);

    // Bounded output, and r_max exactly when nothing was hit.
    CHECK(base.distance >= 0.0);
    CHECK(base.distance <= r_max);
    if (!base.hit) CHECK(base.distance == r_max);

    // The reported point is on some primitive.
    if (base.hit && base.distance > 0.0) {
      CHECK(std::abs(clearance(s, origin + dir * base.distance, 0.0)) < 1e-9);
    }

    // Adding an obstacle never lengthens the ray.
    Scene more = s;
    const Vec2 a{rng.uniform(-6, 6), rng.uniform(-6, 6)};
    more.segments.push_back({a, a + Vec2{rng.uniform(-3, 3), rng.uniform(-3, 3)}});
    CHECK(ray_cast(more, origin, dir, r_max, 0.0).distance <= base.distance);

    // Mirroring scene and ray about the x axis leaves the distance unchanged.
    Scene mirrored = s;
    for (Segment& seg : mirrored.segments) seg = {reflect_y(seg.a), reflect_y(seg.b)};
    for (CircleObstacle& c : mirrored.circles) c.center = reflect_y(c.center);
    const RayHit m = ray_cast(mirrored, reflect_y(origin), reflect_y(dir), r_max, 0.0);
    CHECK(m.hit == base.hit);
    CHECK(m.distance == doctest::Approx(base.distance).epsilon(1e-9));
  }
}
