#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace depthnav {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  friend constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  /// z-component of the 3D cross product.
  constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }

  /// Counter-clockwise rotation by `angle` radians.
  Vec2 rotated(double angle) const {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * x - s * y, s * x + c * y};
  }
  static Vec2 from_angle(double angle) { return {std::cos(angle), std::sin(angle)}; }
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

struct CircleObstacle {
  Vec2 center;
  double radius = 0.0;
  Vec2 velocity;  // m/s, zero for static obstacles

  bool moving() const { return velocity.x != 0.0 || velocity.y != 0.0; }
};

struct Bounds {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  bool contains(Vec2 p) const { return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax; }
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

struct Pose2 {
  Vec2 position;
  double yaw = 0.0;
};

/// Static and moving geometry the robot perceives and collides with.
///
/// Unless `open_bounds` is set the bounding rectangle acts as four extra
/// walls. Moving circles travel at constant velocity; with `wrap_moving`
/// their position is wrapped back into the bounds.
struct Scene {
  std::string name;
  std::vector<Segment> segments;
  std::vector<CircleObstacle> circles;
  Pose2 start;
  Bounds bounds;
  bool open_bounds = false;
  bool wrap_moving = false;
  std::optional<Segment> finish;  // start/finish line for lap timing
};

inline constexpr double kDefaultFootprintRadius = 0.25;

struct RayHit {
  double distance = 0.0;
  bool hit = false;
};

/// The four walls implied by the scene bounds (empty for open bounds).
std::vector<Segment> boundary_walls(const Scene& scene);

/// Position of `circle` at simulation time `time`.
Vec2 circle_position(const Scene& scene, const CircleObstacle& circle, double time);

/// Smallest nonnegative ray parameter at which the ray meets the segment.
std::optional<double> intersect_ray_segment(Vec2 origin, Vec2 dir, const Segment& seg);
/// Smallest nonnegative ray parameter at which the ray meets the circle boundary.
std::optional<double> intersect_ray_circle(Vec2 origin, Vec2 dir, Vec2 center, double radius);

/// Closed-form ray cast against every primitive of the scene at `time`.
/// Returns (r_max, false) when nothing is hit within r_max.
RayHit ray_cast(const Scene& scene, Vec2 origin, Vec2 dir, double r_max, double time);

double point_segment_distance(Vec2 p, const Segment& seg);

/// Minimum over primitives of the distance from `p` to the primitive
/// (circle distances are to the disc, negative inside).
double clearance(const Scene& scene, Vec2 p, double time);

/// True iff the footprint disc touches any primitive; contact counts.
bool collision_check(const Scene& scene, Vec2 position, double footprint_radius, double time);

/// Proper or touching intersection of two closed segments.
bool segments_intersect(const Segment& s, const Segment& t);

}  // namespace depthnav
