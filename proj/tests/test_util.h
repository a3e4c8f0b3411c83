#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "mocalib/geometry.h"
#include "mocalib/random.h"

namespace mocalib::testing {

// Uniform on SO(3) via a normalized Gaussian quaternion.
inline Mat3 random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

inline Vec3 random_vec3(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

inline RigidTransform random_transform(Rng& rng, double half_extent = 1.0) {
  return RigidTransform(random_rotation(rng), random_vec3(rng, -half_extent, half_extent));
}

inline Mat3 simple_intrinsics(double f = 1000.0, double cx = 640.0, double cy = 360.0) {
  Mat3 K;
  K << f, 0, cx, 0, f, cy, 0, 0, 1;
  return K;
}

}  // namespace mocalib::testing

#include "mocalib/p3p.h"

namespace mocalib::testing {

// Exact minimal problem generated from a known camera-from-MoCap pose:
// camera-frame points in a frustum-like box, triangle area >= 0.01 m^2.
struct SyntheticMinimalProblem {
  MinimalProblem problem;
  RigidTransform cam_from_mocap;
};

inline SyntheticMinimalProblem random_minimal_problem(Rng& rng) {
  const RigidTransform pose = random_transform(rng, 1.0);
  const RigidTransform mocap_from_cam = pose.inverse();
  for (;;) {
    std::array<Vec3, 3> X;
    for (auto& x : X) x = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 6));
    if (0.5 * (X[1] - X[0]).cross(X[2] - X[0]).norm() < 0.01) continue;
    SyntheticMinimalProblem out{{}, pose};
    for (int k = 0; k < 3; ++k) {
      out.problem.world_points[k] = mocap_from_cam.apply(X[k]);
      out.problem.bearings[k] = X[k].normalized();
    }
    return out;
  }
}

}  // namespace mocalib::testing
