#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mocalib/correspondence.h"
#include "mocalib/geometry.h"
#include "mocalib/ransac.h"
#include "mocalib/refine.h"

namespace mocalib {

struct CorrespondenceCounts {
  std::size_t total = 0;           // N * J * T
  std::size_t valid = 0;
  std::size_t positive_depth = 0;  // valid and in front of the camera at the final transform
  bool operator==(const CorrespondenceCounts&) const = default;
};

struct Timing {
  double ransac_ms = 0.0;
  double refine_ms = 0.0;
  double total_ms = 0.0;
  double ms_per_frame = 0.0;  // total_ms / T
  bool operator==(const Timing&) const = default;
};

struct CalibrationReport {
  RigidTransform transform;  // MoCap -> world
  EulerPose euler;
  double mpjpe_init = 0.0;     // px, at the RANSAC hypothesis
  double mpjpe_refined = 0.0;  // px, at transform
  std::optional<double> mpjpe_gt;
  std::optional<double> rotation_error_deg;
  std::optional<double> translation_error_m;
  double inlier_ratio = 0.0;
  std::size_t inlier_count = 0;
  std::size_t refine_active_count = 0;
  double refine_initial_loss = 0.0;
  double refine_final_loss = 0.0;
  int refine_best_step = 0;
  bool refinement_rejected = false;
  CorrespondenceCounts counts;
  int n_frames = 0;
  Timing timing;
  RansacConfig ransac_config;
  RefineConfig refine_config;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;

  bool operator==(const CalibrationReport&) const = default;
};

// Mean residual norm over valid, positive-depth entries (all frames).
// Throws EmptyActiveSet when there is none.
double compute_mpjpe(const CorrespondenceSet& set, const RigidTransform& transform);
// Same, over the given entry ids only.
double compute_mpjpe(const CorrespondenceSet& set, const RigidTransform& transform,
                     const std::vector<std::size_t>& ids);
// nullopt instead of throwing on an empty active set.
std::optional<double> try_compute_mpjpe(const CorrespondenceSet& set,
                                        const RigidTransform& transform);

std::size_t count_positive_depth(const CorrespondenceSet& set, const RigidTransform& transform);

// RANSAC initialization followed by refinement. When inliers_only is set the
// refinement runs on the all-frame inlier set of the RANSAC hypothesis. The
// refined pose is dropped in favour of the initialization (and
// refinement_rejected set) if its MPJPE is higher.
CalibrationReport calibrate(const CorrespondenceSet& set, const RansacConfig& ransac_cfg,
                            const RefineConfig& refine_cfg,
                            const std::optional<RigidTransform>& gt = std::nullopt);

}  // namespace mocalib
