#pragma once

#include <cstdint>
#include <string>

#include "depthnav/geometry.hpp"
#include "depthnav/nn.hpp"

namespace depthnav {

struct GradCheckOptions {
  int instances = 20;
  std::uint64_t seed = 0;
  double step = 1e-5;       // central difference step
  double abs_floor = 1e-7;  // lower bound on the relative-error denominator
  double tolerance = 1e-4;  // max relative error
  Architecture arch;
  int batch = 4;
};

struct GradCheckResult {
  int instances = 0;
  std::size_t entries = 0;
  double max_rel_error = 0.0;
  std::string worst_tensor;
  bool pass = false;
};

/// Compares loss_and_gradient<double> with central finite differences over
/// every parameter on random (params, minibatch) instances. Probability
/// ratios are kept away from the clip boundaries so the loss is smooth
/// within the difference step.
GradCheckResult grad_check(const GradCheckOptions& options = {});

struct RaycastCheckOptions {
  int scenes = 1000;
  std::uint64_t seed = 0;
  double march_step = 1e-4;
  double detect = 5e-5;
  double tolerance = 1e-3;
};

struct RaycastCheckResult {
  int rays = 0;
  int hits = 0;
  int flag_mismatches = 0;
  double max_distance_error = 0.0;
  bool pass = false;
};

/// Reference ray cast: marches along the ray in fixed steps until some
/// primitive comes within `detect`, then bisects the sign change of that
/// primitive's side function. Returns r_max and hit = false on a miss.
RayHit march_ray(const Scene& scene, Vec2 origin, Vec2 dir, double r_max, double time, double step = 1e-4,
                 double detect = 5e-5);

/// Compares ray_cast against march_ray on random scenes and rays.
RaycastCheckResult raycast_check(const RaycastCheckOptions& options = {});

}  // namespace depthnav
