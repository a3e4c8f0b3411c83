#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "mocalib/correspondence.h"
#include "mocalib/geometry.h"

namespace mocalib {

using Vec6 = Eigen::Matrix<double, 6, 1>;

struct RefineConfig {
  int steps = 2000;
  double lr_rotation = 1e-3;     // radians per step
  double lr_translation = 1e-2;  // meters per step
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int fine_stride = 2;
  bool inliers_only = true;
  double cosine_floor = 0.01;  // final lr as a fraction of the initial one

  // Throws InvalidArgument when any field is out of range.
  void validate() const;
  bool operator==(const RefineConfig&) const = default;
};

struct LossReport {
  double loss = 0.0;  // 1/(2|S|) sum ||r||^2, pixels^2
  Vec6 gradient = Vec6::Zero();  // d/d(alpha, beta, gamma, tx, ty, tz)
  std::size_t active_count = 0;  // |S|
};

// S = valid entries with frame_index % stride == 0 and positive depth,
// intersected with *restrict_to when given (ids into set.entries()).
// Empty S yields zero loss and gradient.
LossReport loss_and_gradient(const CorrespondenceSet& set, const EulerPose& pose, int stride,
                             const std::vector<std::size_t>* restrict_to = nullptr);

// Half-cosine decay from lr0 at step 0 to floor_frac * lr0 at total - 1.
double cosine_lr(int step, int total, double lr0, double floor_frac);

struct AdamState {
  Vec6 m = Vec6::Zero();
  Vec6 v = Vec6::Zero();
  int t = 0;
};

// Advances state by one step and returns the parameter increment. Angles use
// lr_rotation, translation lr_translation.
Vec6 adam_step(AdamState& state, const Vec6& gradient, double lr_rotation,
               double lr_translation, double beta1, double beta2, double epsilon);

struct RefineResult {
  RigidTransform transform;  // lowest-loss iterate
  EulerPose pose;
  double loss = 0.0;
  double initial_loss = 0.0;
  int best_step = 0;
  // Loss before each update plus the loss of the final iterate (steps + 1).
  std::vector<double> loss_trace;
};

// Adam descent on the Euler pose seeded from init. Returns the best iterate
// seen, never one with a higher loss than init. Throws EmptyActiveSet when
// S is empty at init.
RefineResult refine_pose(const CorrespondenceSet& set, const RigidTransform& init,
                         const RefineConfig& cfg,
                         const std::vector<std::size_t>* restrict_to = nullptr);

}  // namespace mocalib
