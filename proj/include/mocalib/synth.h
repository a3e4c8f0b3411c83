#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mocalib/correspondence.h"
#include "mocalib/geometry.h"

namespace mocalib {

enum class Corruption { clean, gaussian, outlier, invalid };

struct SynthConfig {
  int n_cameras = 2;
  int n_joints = 17;
  int n_frames = 300;
  double rig_radius = 4.0;     // m
  double focal_px = 1000.0;
  ImageSize image_size{1920, 1080};
  double motion_extent = 2.0;  // m, side of the box bounding the root walk
  double noise_sigma = 0.0;    // px
  double outlier_fraction = 0.0;
  double invalid_fraction = 0.0;
  // Drawn uniformly on SO(3) x [-1, 1]^3 from the seed when absent.
  std::optional<RigidTransform> gt_extrinsic;
  std::optional<DistortionCoeffs> distortion;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SynthSession {
  // One entry per (camera, frame, joint) in that nesting order; invalid
  // entries are kept with valid = false.
  CorrespondenceSet set;
  RigidTransform gt_extrinsic;
  std::vector<Corruption> corruption_mask;  // parallel to set.entries()
};

// Cameras sit on a circle of rig_radius at 1.2 m height, all looking at the
// motion volume centre. Joints are a bounded Gaussian root walk plus fixed,
// per-frame-jittered offsets, expressed in the MoCap frame
// (gt_extrinsic^-1 applied to world points). Each observation is marked
// invalid with probability invalid_fraction, otherwise replaced by a
// uniform pixel with probability outlier_fraction, otherwise perturbed by
// N(0, noise_sigma^2) per axis. Points behind a camera are invalid.
// Throws InfeasibleRig when rig_radius <= motion_extent.
SynthSession generate(const SynthConfig& cfg);

// Indices of entries with the given label.
std::vector<std::size_t> entries_labeled(const SynthSession& session, Corruption label);

}  // namespace mocalib
