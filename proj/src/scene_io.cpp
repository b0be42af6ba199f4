#include "depthnav/scene_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "depthnav/text.hpp"

namespace depthnav {

SceneParseError::SceneParseError(int line, std::string field, const std::string& message)
    : std::runtime_error("scene line " + std::to_string(line) + " [" + field + "]: " + message),
      line_(line),
      field_(std::move(field)) {}

SceneValidationError::SceneValidationError(std::string rule, const std::string& message)
    : std::runtime_error(rule + ": " + message), rule_(std::move(rule)) {}

namespace {

struct LineReader {
  int line;
  std::string directive;
  std::vector<std::string_view> args;

  double number(std::size_t i, const char* field) const {
    if (i >= args.size()) throw SceneParseError(line, field, "missing value for " + directive);
    auto v = parse_double(args[i]);
    if (!v) throw SceneParseError(line, field, "not a number: '" + std::string(args[i]) + "'");
    if (!std::isfinite(*v)) throw SceneParseError(line, field, "value must be finite");
    return *v;
  }

  void arity(std::size_t lo, std::size_t hi) const {
    if (args.size() < lo || args.size() > hi) {
      throw SceneParseError(line, directive,
                            "expected " + std::to_string(lo) +
                                (lo == hi ? "" : "-" + std::to_string(hi)) + " values, got " +
                                std::to_string(args.size()));
    }
  }
};

}  // namespace

Scene parse_scene(std::istream& in, double footprint_radius) {
  Scene scene;
  bool have_bounds = false;
  bool have_start = false;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    auto tokens = split_whitespace(line);
    LineReader r{line_no, std::string(tokens.front()), {tokens.begin() + 1, tokens.end()}};
    const std::string& d = r.directive;

    if (d == "name") {
      if (r.args.empty()) throw SceneParseError(line_no, "name", "missing name text");
      scene.name = std::string(trim(line.substr(4)));
    } else if (d == "bounds") {
      r.arity(4, 4);
      scene.bounds = {r.number(0, "xmin"), r.number(1, "ymin"), r.number(2, "xmax"), r.number(3, "ymax")};
      have_bounds = true;
    } else if (d == "open_bounds") {
      r.arity(0, 0);
      scene.open_bounds = true;
    } else if (d == "wrap_moving") {
      r.arity(0, 0);
      scene.wrap_moving = true;
    } else if (d == "start") {
      r.arity(3, 3);
      scene.start = {{r.number(0, "x"), r.number(1, "y")}, r.number(2, "yaw")};
      have_start = true;
    } else if (d == "segment") {
      r.arity(4, 4);
      scene.segments.push_back({{r.number(0, "ax"), r.number(1, "ay")}, {r.number(2, "bx"), r.number(3, "by")}});
    } else if (d == "circle") {
      if (r.args.size() != 3 && r.args.size() != 5) {
        throw SceneParseError(line_no, "circle", "expected 3 or 5 values, got " + std::to_string(r.args.size()));
      }
      CircleObstacle c{{r.number(0, "cx"), r.number(1, "cy")}, r.number(2, "r"), {}};
      if (r.args.size() == 5) c.velocity = {r.number(3, "vx"), r.number(4, "vy")};
      scene.circles.push_back(c);
    } else if (d == "finish") {
      r.arity(4, 4);
      scene.finish = Segment{{r.number(0, "ax"), r.number(1, "ay")}, {r.number(2, "bx"), r.number(3, "by")}};
    } else {
      throw SceneParseError(line_no, d, "unknown directive '" + d + "'");
    }
  }
  if (!have_bounds) throw SceneParseError(0, "bounds", "scene declares no bounds");
  if (!have_start) throw SceneParseError(0, "start", "scene declares no start pose");
  validate_scene(scene, footprint_radius);
  return scene;
}

Scene load_scene(const std::filesystem::path& path, double footprint_radius) {
  std::ifstream in(path);
  if (!in) throw SceneParseError(0, "path", "cannot open scene file " + path.string());
  return parse_scene(in, footprint_radius);
}

void validate_scene(const Scene& scene, double footprint_radius) {
  const Bounds& b = scene.bounds;
  if (!(b.xmin < b.xmax && b.ymin < b.ymax)) {
    throw SceneValidationError("bounds empty", "bounds must satisfy xmin < xmax and ymin < ymax");
  }
  for (std::size_t i = 0; i < scene.segments.size(); ++i) {
    const Segment& s = scene.segments[i];
    if (s.a == s.b) throw SceneValidationError("zero-length segment", "segment " + std::to_string(i) + " has a == b");
  }
  for (std::size_t i = 0; i < scene.circles.size(); ++i) {
    const CircleObstacle& c = scene.circles[i];
    if (!(c.radius > 0.0)) throw SceneValidationError("circle radius", "circle " + std::to_string(i) + " radius must be > 0");
    if (!c.velocity.finite()) throw SceneValidationError("circle velocity", "circle " + std::to_string(i) + " velocity must be finite");
  }
  if (scene.finish && scene.finish->a == scene.finish->b) {
    throw SceneValidationError("zero-length finish", "finish line has a == b");
  }
  if (!std::isfinite(scene.start.yaw)) throw SceneValidationError("start yaw", "start yaw must be finite");
  if (!b.contains(scene.start.position)) {
    throw SceneValidationError("start pose outside bounds", "start position lies outside the scene bounds");
  }
  if (collision_check(scene, scene.start.position, footprint_radius, 0.0)) {
    throw SceneValidationError("start pose in collision", "start position is within the footprint radius of an obstacle");
  }
}

void write_scene(std::ostream& out, const Scene& scene) {
  auto f = [](double v) { return format_double(v); };
  if (!scene.name.empty()) out << "name " << scene.name << '\n';
  const Bounds& b = scene.bounds;
  out << "bounds " << f(b.xmin) << ' ' << f(b.ymin) << ' ' << f(b.xmax) << ' ' << f(b.ymax) << '\n';
  if (scene.open_bounds) out << "open_bounds\n";
  if (scene.wrap_moving) out << "wrap_moving\n";
  out << "start " << f(scene.start.position.x) << ' ' << f(scene.start.position.y) << ' ' << f(scene.start.yaw) << '\n';
  if (scene.finish) {
    out << "finish " << f(scene.finish->a.x) << ' ' << f(scene.finish->a.y) << ' ' << f(scene.finish->b.x) << ' '
        << f(scene.finish->b.y) << '\n';
  }
  for (const Segment& s : scene.segments) {
    out << "segment " << f(s.a.x) << ' ' << f(s.a.y) << ' ' << f(s.b.x) << ' ' << f(s.b.y) << '\n';
  }
  for (const CircleObstacle& c : scene.circles) {
    out << "circle " << f(c.center.x) << ' ' << f(c.center.y) << ' ' << f(c.radius);
    if (c.moving()) out << ' ' << f(c.velocity.x) << ' ' << f(c.velocity.y);
    out << '\n';
  }
}

}  // namespace depthnav
