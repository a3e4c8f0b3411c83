#include <gtest/gtest.h>

#include <cstdlib>

#include "mocalib/error.h"
#include "mocalib/ransac.h"
#include "mocalib/synth.h"
#include "test_util.h"

namespace mocalib {
namespace {

SynthSession session(double sigma, double outliers, std::uint64_t seed, int frames = 100) {
  SynthConfig cfg;
  cfg.n_cameras = 2;
  cfg.n_joints = 17;
  cfg.n_frames = frames;
  cfg.noise_sigma = sigma;
  cfg.outlier_fraction = outliers;
  cfg.seed = seed;
  return generate(cfg);
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidArgument;
}

CorrespondenceSet single_entry_set(const Vec2& observed) {
  Mat3 K;
  K << 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Correspondence c;
  c.point3d = Vec3(0, 0, 1);
  c.point2d = observed;
  return CorrespondenceSet({CameraModel(K, Mat3::Identity(), Vec3::Zero())}, {c}, Dims{1, 1, 1});
}

TEST(Residual, SelfConsistent) {
  const SynthSession s = session(0.0, 0.0, 1, 10);
  for (const Correspondence& c : s.set.entries()) {
    if (!c.valid) continue;
    EXPECT_LT(residual(c, s.set.cameras()[c.cam_index], s.gt_extrinsic).r.norm(), 1e-10);
  }
}

TEST(Residual, ShiftedObservation) {
  const SynthSession s = session(0.0, 0.0, 2, 5);
  Correspondence c = s.set.entries()[3];
  c.point2d += Vec2(3, 4);
  const Residual r = residual(c, s.set.cameras()[c.cam_index], s.gt_extrinsic);
  EXPECT_NEAR(r.r.x(), -3.0, 1e-9);
  EXPECT_NEAR(r.r.y(), -4.0, 1e-9);
  EXPECT_NEAR(r.r.norm(), 5.0, 1e-9);
}

TEST(Residual, BehindCameraReportsNegativeDepth) {
  const CorrespondenceSet set = single_entry_set(Vec2::Zero());
  const RigidTransform flip(Mat3::Identity(), Vec3(0, 0, -3));
  EXPECT_LT(residual(set.entries()[0], set.cameras()[0], flip).depth, 0.0);
}

TEST(CountInliers, ExactProjectionAllInliers) {
  const SynthSession s = session(0.0, 0.0, 3, 40);
  const InlierSet inliers = count_inliers(s.set, s.gt_extrinsic, 1.0, 3);
  std::size_t expected = 0;
  for (const Correspondence& c : s.set.entries()) {
    if (c.valid && c.frame_index % 3 == 0) ++expected;
  }
  EXPECT_EQ(inliers.ids.size(), expected);
  EXPECT_EQ(inliers.scored, expected);
  EXPECT_LT(inliers.mean_residual, 1e-9);
}

TEST(CountInliers, TranslatedTransformHasNoInliers) {
  const SynthSession s = session(0.0, 0.0, 4, 40);
  const RigidTransform moved(s.gt_extrinsic.rotation(),
                             s.gt_extrinsic.translation() + Vec3(0, 0, 10));
  // Oracle: every positive-depth residual is far above tau.
  for (const Correspondence& c : s.set.entries()) {
    const Residual r = residual(c, s.set.cameras()[c.cam_index], moved);
    if (r.depth > 0) EXPECT_GT(r.r.norm(), 100.0);
  }
  const InlierSet inliers = count_inliers(s.set, moved, 1.0, 1);
  EXPECT_TRUE(inliers.ids.empty());
  EXPECT_EQ(inliers.mean_residual, 0.0);
}

TEST(CountInliers, ThresholdIsStrict) {
  const CorrespondenceSet set = single_entry_set(Vec2(3, 4));
  EXPECT_TRUE(count_inliers(set, RigidTransform(), 5.0, 1).ids.empty());
  EXPECT_EQ(count_inliers(set, RigidTransform(), 5.0 + 1e-9, 1).ids.size(), 1u);
}

TEST(CountInliers, BehindCameraIsNeverInlier) {
  // Behind the camera the projection lands back on the observation, so only
  // the depth gate keeps it out.
  const CorrespondenceSet set = single_entry_set(Vec2::Zero());
  const RigidTransform flip(Mat3::Identity(), Vec3(0, 0, -2));
  EXPECT_TRUE(count_inliers(set, flip, 1e6, 1).ids.empty());
}

TEST(Ransac, NoiselessRecovery) {
  const SynthSession s = session(0.0, 0.0, 5);
  RansacConfig cfg;
  cfg.tau = 2.0;
  cfg.iterations = 500;
  cfg.seed = 5;
  const Hypothesis h = run_ransac(s.set, cfg);
  EXPECT_LT(rotation_geodesic_deg(h.transform.rotation(), s.gt_extrinsic.rotation()), 1e-6);
  EXPECT_LT((h.transform.translation() - s.gt_extrinsic.translation()).norm(), 1e-6);
  EXPECT_EQ(h.inlier_ratio(), 1.0);
}

TEST(Ransac, RobustToThirtyPercentOutliers) {
  const SynthSession s = session(0.0, 0.3, 6);
  RansacConfig cfg;
  cfg.tau = 2.0;
  cfg.iterations = 500;
  cfg.seed = 6;
  const Hypothesis h = run_ransac(s.set, cfg);
  EXPECT_LT(rotation_geodesic_deg(h.transform.rotation(), s.gt_extrinsic.rotation()), 0.5);
  EXPECT_LT((h.transform.translation() - s.gt_extrinsic.translation()).norm(), 0.02);
  EXPECT_GE(h.inlier_ratio(), 0.65);
}

TEST(Ransac, AllInvalidIsNoValidSample) {
  SynthConfig cfg;
  cfg.n_frames = 10;
  cfg.invalid_fraction = 1.0;
  const SynthSession s = generate(cfg);
  EXPECT_EQ(kind_of([&] { run_ransac(s.set, RansacConfig{}); }), ErrorKind::NoValidSample);
}

TEST(Ransac, InsufficientConsensus) {
  const SynthSession s = session(0.0, 0.9, 7, 30);
  RansacConfig cfg;
  cfg.iterations = 50;
  cfg.min_inlier_ratio = 0.5;
  EXPECT_EQ(kind_of([&] { run_ransac(s.set, cfg); }), ErrorKind::InsufficientConsensus);
}

TEST(Ransac, InvalidConfig) {
  const SynthSession s = session(0.0, 0.0, 8, 5);
  RansacConfig cfg;
  cfg.tau = 0.0;
  EXPECT_EQ(kind_of([&] { run_ransac(s.set, cfg); }), ErrorKind::InvalidArgument);
}

TEST(Ransac, DeterministicAcrossWorkerCounts) {
  const SynthSession s = session(2.0, 0.2, 9);
  RansacConfig cfg;
  cfg.iterations = 300;
  cfg.seed = 42;
  setenv("RPGD_THREADS", "1", 1);
  const Hypothesis a = run_ransac(s.set, cfg);
  setenv("RPGD_THREADS", "7", 1);
  const Hypothesis b = run_ransac(s.set, cfg);
  unsetenv("RPGD_THREADS");
  EXPECT_EQ(a.transform, b.transform);
  EXPECT_EQ(a.inlier_count, b.inlier_count);
  EXPECT_EQ(a.mean_inlier_residual, b.mean_inlier_residual);
  EXPECT_EQ(a.iteration, b.iteration);
  EXPECT_EQ(a.solution, b.solution);
}

TEST(Ransac, BestCountNonDecreasingInIterations) {
  const SynthSession s = session(2.0, 0.3, 10);
  RansacConfig cfg;
  cfg.seed = 3;
  for (const int k : {5, 20, 80}) {
    cfg.iterations = k;
    const Hypothesis a = run_ransac(s.set, cfg);
    cfg.iterations = 2 * k;
    const Hypothesis b = run_ransac(s.set, cfg);
    EXPECT_GE(b.inlier_count, a.inlier_count);
  }
}

TEST(Ransac, StoredCountMatchesRecount) {
  const SynthSession s = session(2.0, 0.2, 11);
  RansacConfig cfg;
  cfg.iterations = 200;
  const Hypothesis h = run_ransac(s.set, cfg);
  const InlierSet recount = count_inliers(s.set, h.transform, cfg.tau, cfg.coarse_stride);
  EXPECT_EQ(recount.ids.size(), h.inlier_count);
  EXPECT_EQ(recount.mean_residual, h.mean_inlier_residual);
  for (const std::size_t id : recount.ids) {
    const Correspondence& c = s.set.entries()[id];
    EXPECT_GT(residual(c, s.set.cameras()[c.cam_index], h.transform).depth, 0.0);
  }
}

TEST(Ransac, TinyThresholdStillFullConsensusWithoutNoise) {
  const SynthSession s = session(0.0, 0.0, 12, 30);
  RansacConfig cfg;
  cfg.tau = 1e-6;
  cfg.iterations = 50;
  EXPECT_EQ(run_ransac(s.set, cfg).inlier_ratio(), 1.0);
}

TEST(Ransac, HandlesDistortedCameras) {
  SynthConfig scfg;
  scfg.n_frames = 60;
  scfg.distortion = DistortionCoeffs{-0.15, 0.03, 0.0, 0.0005, -0.0008};
  scfg.seed = 13;
  const SynthSession s = generate(scfg);
  RansacConfig cfg;
  cfg.tau = 1.0;
  cfg.iterations = 100;
  const Hypothesis h = run_ransac(s.set, cfg);
  EXPECT_EQ(h.inlier_ratio(), 1.0);
  EXPECT_LT(rotation_geodesic_deg(h.transform.rotation(), s.gt_extrinsic.rotation()), 1e-5);
}

TEST(BetterHypothesis, TotalOrder) {
  Hypothesis a, b;
  a.inlier_count = 10;
  b.inlier_count = 9;
  EXPECT_TRUE(better_hypothesis(a, b));
  b.inlier_count = 10;
  a.mean_inlier_residual = 1.0;
  b.mean_inlier_residual = 2.0;
  EXPECT_TRUE(better_hypothesis(a, b));
  EXPECT_FALSE(better_hypothesis(b, a));
  b.mean_inlier_residual = 1.0;
  a.iteration = 3;
  b.iteration = 3;
  a.solution = 0;
  b.solution = 1;
  EXPECT_TRUE(better_hypothesis(a, b));
  EXPECT_FALSE(better_hypothesis(a, a));
}

}  // namespace
}  // namespace mocalib
