#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mocalib/correspondence.h"
#include "mocalib/geometry.h"

namespace mocalib {

struct RansacConfig {
  double tau = 10.0;          // inlier threshold, pixels
  int iterations = 2000;      // K
  std::uint64_t seed = 0;
  int coarse_stride = 10;     // frames scored: frame_index % stride == 0
  double min_inlier_ratio = 0.2;
  bool minimal_cheirality = true;

  // Throws InvalidArgument on tau <= 0, iterations < 1, stride < 1 or a
  // ratio outside [0, 1].
  void validate() const;
  bool operator==(const RansacConfig&) const = default;
};

struct Hypothesis {
  RigidTransform transform;  // MoCap -> world
  std::size_t inlier_count = 0;
  std::size_t scored_count = 0;  // valid entries on the coarse stride
  double mean_inlier_residual = 0.0;
  int iteration = -1;  // k
  int solution = -1;   // l

  double inlier_ratio() const {
    return scored_count ? static_cast<double>(inlier_count) / scored_count : 0.0;
  }
};

// Strict total order used for the reduction: more inliers, then lower mean
// inlier residual, then lower (iteration, solution).
bool better_hypothesis(const Hypothesis& a, const Hypothesis& b);

struct Residual {
  Vec2 r;        // projected - observed, pixels
  double depth;  // signed camera depth
};

Residual residual(const Correspondence& corr, const CameraModel& cam,
                  const RigidTransform& transform);

struct InlierSet {
  std::vector<std::size_t> ids;  // indices into set.entries(), ascending
  double mean_residual = 0.0;
  std::size_t scored = 0;  // valid, stride-selected entries visited
};

// Entries with depth <= 0 are never inliers; ||r|| < tau is strict.
InlierSet count_inliers(const CorrespondenceSet& set, const RigidTransform& transform,
                        double tau, int stride);

// Robust MoCap -> world initialization from minimal three-joint samples of
// one (camera, frame). Deterministic given cfg.seed for any worker count.
// Throws NoValidSample when no (camera, frame) has three valid joints and
// InsufficientConsensus when the best inlier ratio is below
// cfg.min_inlier_ratio.
Hypothesis run_ransac(const CorrespondenceSet& set, const RansacConfig& cfg);

}  // namespace mocalib
