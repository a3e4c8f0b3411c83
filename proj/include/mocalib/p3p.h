#pragma once

#include <array>
#include <vector>

#include "mocalib/geometry.h"

namespace mocalib {

// Three MoCap points and their unit bearing vectors in the camera frame.
struct MinimalProblem {
  std::array<Vec3, 3> world_points;
  std::array<Vec3, 3> bearings;
};

struct P3POptions {
  // Drop solutions placing any of the three points at non-positive depth.
  bool enforce_cheirality = true;
};

// Camera-from-MoCap poses consistent with a minimal problem (at most 4).
struct P3PSolutionSet {
  std::vector<RigidTransform> solutions;
};

inline constexpr double kMinTriangleArea = 1e-9;        // m^2
inline constexpr double kMinPointSeparation = 1e-9;     // m
inline constexpr double kP3PReprojectionTolerance = 1e-8;  // normalized units

// True when the world triangle is too small or thin to solve
// (area < kMinTriangleArea or coincident points).
bool is_degenerate(const MinimalProblem& problem);

// Grunert's quartic, companion-matrix roots with Newton polishing, then a
// Gauss-Newton polish of the three depths. Every returned solution
// reprojects the three points within kP3PReprojectionTolerance.
// Throws InvalidArgument for non-unit bearings or coincident points and
// DegenerateConfiguration for (near-)collinear points.
P3PSolutionSet solve_p3p(const MinimalProblem& problem, const P3POptions& options = {});

// Splits a camera-from-MoCap pose into the MoCap -> world transform, given
// the camera's world -> camera extrinsics: cam.world_to_camera() * result
// reproduces cam_from_mocap.
RigidTransform recover_mocap_pose(const RigidTransform& cam_from_mocap,
                                  const CameraModel& cam);

}  // namespace mocalib
