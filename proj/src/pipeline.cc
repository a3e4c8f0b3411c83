#include "mocalib/pipeline.h"

#include <chrono>
#include <ranges>

#include "mocalib/error.h"

namespace mocalib {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

struct Accumulated {
  double sum = 0.0;
  std::size_t count = 0;
};

template <typename Ids>
Accumulated accumulate(const CorrespondenceSet& set, const RigidTransform& transform,
                       const Ids& ids) {
  Accumulated acc;
  for (const std::size_t id : ids) {
    const Correspondence& c = set.entries()[id];
    if (!c.valid) continue;
    const Vec3 X = set.cameras()[c.cam_index].world_to_camera().apply(transform.apply(c.point3d));
    if (!(X.z() > 0.0)) continue;
    acc.sum += (set.cameras()[c.cam_index].normalized_to_pixel(X.head<2>() / X.z()) - c.point2d)
                   .norm();
    ++acc.count;
  }
  return acc;
}

double mean_or_throw(const Accumulated& acc) {
  if (acc.count == 0) {
    throw Error(ErrorKind::EmptyActiveSet, "no valid correspondence with positive depth");
  }
  return acc.sum / static_cast<double>(acc.count);
}

}  // namespace

double compute_mpjpe(const CorrespondenceSet& set, const RigidTransform& transform) {
  return mean_or_throw(accumulate(set, transform, std::views::iota(std::size_t{0}, set.entries().size())));
}

double compute_mpjpe(const CorrespondenceSet& set, const RigidTransform& transform,
                     const std::vector<std::size_t>& ids) {
  for (const std::size_t id : ids) {
    if (id >= set.entries().size()) throw Error(ErrorKind::InvalidArgument, "entry id out of range");
  }
  return mean_or_throw(accumulate(set, transform, ids));
}

std::optional<double> try_compute_mpjpe(const CorrespondenceSet& set,
                                        const RigidTransform& transform) {
  const Accumulated acc = accumulate(set, transform, std::views::iota(std::size_t{0}, set.entries().size()));
  if (acc.count == 0) return std::nullopt;
  return acc.sum / static_cast<double>(acc.count);
}

std::size_t count_positive_depth(const CorrespondenceSet& set, const RigidTransform& transform) {
  std::size_t n = 0;
  for (const Correspondence& c : set.entries()) {
    if (!c.valid) continue;
    const Vec3 X = set.cameras()[c.cam_index].world_to_camera().apply(transform.apply(c.point3d));
    if (X.z() > 0.0) ++n;
  }
  return n;
}

CalibrationReport calibrate(const CorrespondenceSet& set, const RansacConfig& ransac_cfg,
                            const RefineConfig& refine_cfg,
                            const std::optional<RigidTransform>& gt) {
  ransac_cfg.validate();
  refine_cfg.validate();
  const auto start = Clock::now();

  CalibrationReport report;
  report.ransac_config = ransac_cfg;
  report.refine_config = refine_cfg;
  report.seed = ransac_cfg.seed;
  report.n_frames = set.dims().n_frames;

  const Hypothesis h = run_ransac(set, ransac_cfg);
  report.timing.ransac_ms = elapsed_ms(start);
  report.inlier_ratio = h.inlier_ratio();
  report.inlier_count = h.inlier_count;
  report.mpjpe_init = compute_mpjpe(set, h.transform);

  const auto refine_start = Clock::now();
  std::optional<std::vector<std::size_t>> inliers;
  if (refine_cfg.inliers_only) inliers = count_inliers(set, h.transform, ransac_cfg.tau, 1).ids;
  const RefineResult refined =
      refine_pose(set, h.transform, refine_cfg, inliers ? &*inliers : nullptr);
  report.timing.refine_ms = elapsed_ms(refine_start);
  report.refine_initial_loss = refined.initial_loss;
  report.refine_final_loss = refined.loss;
  report.refine_best_step = refined.best_step;
  report.refine_active_count =
      loss_and_gradient(set, refined.pose, refine_cfg.fine_stride, inliers ? &*inliers : nullptr)
          .active_count;

  const std::optional<double> mpjpe_refined = try_compute_mpjpe(set, refined.transform);
  if (mpjpe_refined && *mpjpe_refined <= report.mpjpe_init) {
    report.transform = refined.transform;
    report.mpjpe_refined = *mpjpe_refined;
  } else {
    report.transform = h.transform;
    report.mpjpe_refined = report.mpjpe_init;
    report.refinement_rejected = true;
    report.warnings.push_back("refined pose raised the all-frame MPJPE; kept the RANSAC pose");
  }
  report.euler = to_euler_pose(report.transform);

  report.counts.total = set.dims().total();
  report.counts.valid = set.valid_count();
  report.counts.positive_depth = count_positive_depth(set, report.transform);

  if (gt) {
    report.mpjpe_gt = try_compute_mpjpe(set, *gt);
    report.rotation_error_deg = rotation_geodesic_deg(report.transform.rotation(), gt->rotation());
    report.translation_error_m = (report.transform.translation() - gt->translation()).norm();
  }

  report.timing.total_ms = elapsed_ms(start);
  report.timing.ms_per_frame =
      report.n_frames > 0 ? report.timing.total_ms / report.n_frames : 0.0;
  return report;
}

}  // namespace mocalib
