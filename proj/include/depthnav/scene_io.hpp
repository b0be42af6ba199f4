#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "depthnav/geometry.hpp"

namespace depthnav {

/// Syntax error in a scene file. `line()` is 1-based, 0 when not line-specific.
class SceneParseError : public std::runtime_error {
 public:
  SceneParseError(int line, std::string field, const std::string& message);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

/// A well-formed scene that breaks a semantic rule (e.g. "start pose in collision").
class SceneValidationError : public std::runtime_error {
 public:
  SceneValidationError(std::string rule, const std::string& message);
  const std::string& rule() const { return rule_; }

 private:
  std::string rule_;
};

// Line-oriented format, one directive per line, '#' starts a comment:
//   name <text>
//   bounds xmin ymin xmax ymax
//   open_bounds
//   wrap_moving
//   start x y yaw
//   segment ax ay bx by
//   circle cx cy r [vx vy]
//   finish ax ay bx by

Scene parse_scene(std::istream& in, double footprint_radius = kDefaultFootprintRadius);
Scene load_scene(const std::filesystem::path& path, double footprint_radius = kDefaultFootprintRadius);

/// Throws SceneValidationError naming the first violated rule.
void validate_scene(const Scene& scene, double footprint_radius = kDefaultFootprintRadius);

/// Serializes in the format accepted by parse_scene (lossless for doubles).
void write_scene(std::ostream& out, const Scene& scene);

}  // namespace depthnav
