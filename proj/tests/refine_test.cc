#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include <Eigen/Geometry>

#include "mocalib/error.h"
#include "mocalib/random.h"
#include "mocalib/ransac.h"
#include "mocalib/refine.h"
#include "mocalib/synth.h"
#include "test_util.h"

namespace mocalib {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

SynthSession session(double sigma, double outliers, std::uint64_t seed, int frames = 60,
                     std::optional<DistortionCoeffs> distortion = std::nullopt) {
  SynthConfig cfg;
  cfg.n_frames = frames;
  cfg.noise_sigma = sigma;
  cfg.outlier_fraction = outliers;
  cfg.distortion = distortion;
  cfg.seed = seed;
  return generate(cfg);
}

// Direct evaluation of 1/(2|S|) sum ||r||^2 through the projection routine.
double oracle_loss(const CorrespondenceSet& set, const EulerPose& pose, int stride) {
  const RigidTransform T = to_rigid_transform(pose);
  double sum = 0.0;
  std::size_t n = 0;
  for (const Correspondence& c : set.entries()) {
    if (!c.valid || c.frame_index % stride != 0) continue;
    const Residual r = residual(c, set.cameras()[c.cam_index], T);
    if (r.depth <= 0) continue;
    sum += r.r.squaredNorm();
    ++n;
  }
  return n ? sum / (2.0 * n) : 0.0;
}

EulerPose shifted(EulerPose p, int k, double h) {
  if (k == 0) p.alpha += h;
  else if (k == 1) p.beta += h;
  else if (k == 2) p.gamma += h;
  else p.translation[k - 3] += h;
  return p;
}

Vec6 finite_difference(const CorrespondenceSet& set, const EulerPose& pose, int stride) {
  Vec6 g;
  const double h = 1e-6;
  for (int k = 0; k < 6; ++k) {
    g[k] = (oracle_loss(set, shifted(pose, k, h), stride) -
            oracle_loss(set, shifted(pose, k, -h), stride)) /
           (2.0 * h);
  }
  return g;
}

EulerPose perturb(const RigidTransform& T, double angle_deg, double shift_m, Rng& rng) {
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  Vec3 dir(rng.normal(), rng.normal(), rng.normal());
  dir.normalize();
  const Mat3 dR = Eigen::AngleAxisd(angle_deg * kDeg, axis).toRotationMatrix();
  return to_euler_pose(RigidTransform(nearest_rotation(dR * T.rotation()),
                                      T.translation() + shift_m * dir));
}

TEST(LossAndGradient, SingleEntryHandValue) {
  Mat3 K = Mat3::Identity();
  Correspondence c;
  c.point3d = Vec3(0, 0, 1);
  c.point2d = Vec2(1, 0);
  const CorrespondenceSet set({CameraModel(K, Mat3::Identity(), Vec3::Zero())}, {c},
                              Dims{1, 1, 1});
  const LossReport r = loss_and_gradient(set, EulerPose{}, 1);
  EXPECT_DOUBLE_EQ(r.loss, 0.5);
  EXPECT_EQ(r.active_count, 1u);
  // r = (-1, 0) at xy = (0, 0), z = 1: dL/dtx = -1, dL/dbeta = -1.
  EXPECT_NEAR(r.gradient[3], -1.0, 1e-15);
  EXPECT_NEAR(r.gradient[1], -1.0, 1e-15);
}

TEST(LossAndGradient, ZeroAtGroundTruth) {
  const SynthSession s = session(0.0, 0.0, 1);
  const LossReport r = loss_and_gradient(s.set, to_euler_pose(s.gt_extrinsic), 1);
  EXPECT_LT(r.loss, 1e-18);
  EXPECT_LT(r.gradient.norm(), 1e-9);
  EXPECT_EQ(r.active_count, s.set.valid_count());
}

TEST(LossAndGradient, MatchesOracleLoss) {
  const SynthSession s = session(1.0, 0.1, 2);
  Rng rng(2);
  const EulerPose pose = perturb(s.gt_extrinsic, 3.0, 0.1, rng);
  for (const int stride : {1, 3}) {
    const LossReport r = loss_and_gradient(s.set, pose, stride);
    EXPECT_NEAR(r.loss, oracle_loss(s.set, pose, stride), 1e-9 * r.loss);
  }
}

TEST(LossAndGradient, MatchesCentralDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto distortion = trial % 2 ? std::optional(DistortionCoeffs{-0.1, 0.02, 0.001, 0.0005,
                                                                      -0.0007})
                                      : std::nullopt;
    const SynthSession s = session(2.0, 0.0, 100 + trial, 10, distortion);
    const EulerPose pose = perturb(s.gt_extrinsic, 5.0, 0.2, rng);
    const Vec6 analytic = loss_and_gradient(s.set, pose, 1).gradient;
    const Vec6 numeric = finite_difference(s.set, pose, 1);
    for (int k = 0; k < 6; ++k) {
      if (std::abs(numeric[k]) < 1e-8) continue;
      EXPECT_LT(std::abs(analytic[k] - numeric[k]) / std::abs(numeric[k]), 1e-4)
          << "trial " << trial << " component " << k;
    }
  }
}

TEST(LossAndGradient, BehindCameraEntryIgnored) {
  const Mat3 K = testing::simple_intrinsics();
  Correspondence front, back;
  front.point3d = Vec3(0.1, 0.2, 3.0);
  front.point2d = Vec2(600, 400);
  back.joint_index = 1;
  back.point3d = Vec3(0.3, -0.1, -2.0);
  back.point2d = Vec2(10, 20);
  const CameraModel cam(K, Mat3::Identity(), Vec3::Zero());
  const CorrespondenceSet a({cam}, {front, back}, Dims{1, 2, 1});
  back.point2d = Vec2(1500, -300);
  const CorrespondenceSet b({cam}, {front, back}, Dims{1, 2, 1});
  const LossReport ra = loss_and_gradient(a, EulerPose{}, 1);
  const LossReport rb = loss_and_gradient(b, EulerPose{}, 1);
  EXPECT_EQ(ra.active_count, 1u);
  EXPECT_EQ(ra.loss, rb.loss);
  EXPECT_EQ(ra.gradient, rb.gradient);
}

TEST(LossAndGradient, EmptyActiveSetIsZero) {
  const SynthSession s = session(0.0, 0.0, 4, 5);
  const std::vector<std::size_t> none;
  const LossReport r = loss_and_gradient(s.set, to_euler_pose(s.gt_extrinsic), 1, &none);
  EXPECT_EQ(r.active_count, 0u);
  EXPECT_EQ(r.loss, 0.0);
  EXPECT_EQ(r.gradient, Vec6::Zero());
}

TEST(LossAndGradient, RestrictToSelectsEntries) {
  const SynthSession s = session(2.0, 0.0, 5, 20);
  const EulerPose pose = to_euler_pose(s.gt_extrinsic);
  std::vector<std::size_t> ids;
  std::vector<Correspondence> kept;
  for (std::size_t k = 0; k < s.set.entries().size(); k += 3) {
    ids.push_back(k);
    kept.push_back(s.set.entries()[k]);
  }
  const CorrespondenceSet subset(s.set.cameras(), kept, s.set.dims());
  const LossReport a = loss_and_gradient(s.set, pose, 1, &ids);
  const LossReport b = loss_and_gradient(subset, pose, 1);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
  EXPECT_EQ(a.active_count, b.active_count);
}

TEST(LossAndGradient, StrideConsistency) {
  const SynthSession s = session(2.0, 0.1, 6, 40);
  std::vector<Correspondence> kept;
  for (const Correspondence& c : s.set.entries()) {
    if (c.frame_index % 4 == 0) kept.push_back(c);
  }
  const CorrespondenceSet subsampled(s.set.cameras(), kept, s.set.dims());
  const EulerPose pose = to_euler_pose(s.gt_extrinsic);
  const LossReport a = loss_and_gradient(s.set, pose, 4);
  const LossReport b = loss_and_gradient(subsampled, pose, 1);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
}

TEST(LossAndGradient, IndependentOfWorkerCount) {
  const SynthSession s = session(2.0, 0.2, 7, 400);
  Rng rng(7);
  const EulerPose pose = perturb(s.gt_extrinsic, 1.0, 0.05, rng);
  setenv("RPGD_THREADS", "1", 1);
  const LossReport a = loss_and_gradient(s.set, pose, 1);
  setenv("RPGD_THREADS", "5", 1);
  const LossReport b = loss_and_gradient(s.set, pose, 1);
  unsetenv("RPGD_THREADS");
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
}

TEST(CosineLr, Endpoints) {
  EXPECT_EQ(cosine_lr(0, 100, 0.5, 0.1), 0.5);
  EXPECT_NEAR(cosine_lr(99, 100, 0.5, 0.0), 0.0, 1e-18);
  EXPECT_NEAR(cosine_lr(99, 100, 0.5, 0.1), 0.05, 1e-15);
  EXPECT_NEAR(cosine_lr(50, 101, 0.5, 0.0), 0.25, 1e-15);
  EXPECT_EQ(cosine_lr(0, 1, 0.5, 0.1), 0.5);
}

TEST(CosineLr, NonIncreasing) {
  for (int k = 1; k < 200; ++k) EXPECT_LE(cosine_lr(k, 200, 1.0, 0.01), cosine_lr(k - 1, 200, 1.0, 0.01));
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  AdamState state;
  EXPECT_EQ(adam_step(state, Vec6::Zero(), 1e-3, 1e-2, 0.9, 0.999, 1e-8), Vec6::Zero());
  EXPECT_EQ(state.t, 1);
}

TEST(Adam, ComponentwiseUpdate) {
  AdamState state;
  Vec6 g = Vec6::Zero();
  g[0] = 1.0;
  const Vec6 d = adam_step(state, g, 1e-3, 1e-2, 0.9, 0.999, 1e-8);
  EXPECT_LT(d[0], 0.0);
  for (int k = 1; k < 6; ++k) EXPECT_EQ(d[k], 0.0);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  AdamState state;
  Vec6 g;
  g << 0.3, -2.0, 5.0, 1e-3, -7.0, 0.5;
  Vec6 d;
  for (int t = 0; t < 1000; ++t) d = adam_step(state, g, 1e-3, 1e-2, 0.9, 0.999, 1e-8);
  for (int k = 0; k < 6; ++k) {
    const double lr = k < 3 ? 1e-3 : 1e-2;
    EXPECT_NEAR(d[k], -lr * (g[k] > 0 ? 1.0 : -1.0), 1e-5 * lr) << k;
  }
}

TEST(RefineConfig, Validation) {
  auto kind = [](RefineConfig c) {
    try {
      c.validate();
    } catch (const Error& e) {
      return e.kind() == ErrorKind::InvalidArgument;
    }
    return false;
  };
  RefineConfig c;
  EXPECT_NO_THROW(c.validate());
  c.steps = 0;
  EXPECT_TRUE(kind(c));
  c = {};
  c.lr_rotation = 0;
  EXPECT_TRUE(kind(c));
  c = {};
  c.adam_beta1 = 1.0;
  EXPECT_TRUE(kind(c));
  c = {};
  c.adam_epsilon = 0;
  EXPECT_TRUE(kind(c));
  c = {};
  c.fine_stride = 0;
  EXPECT_TRUE(kind(c));
}

TEST(RefinePose, StartingAtOptimumStaysThere) {
  const SynthSession s = session(0.0, 0.0, 8, 30);
  RefineConfig cfg;
  cfg.steps = 50;
  const RefineResult r = refine_pose(s.set, s.gt_extrinsic, cfg);
  EXPECT_LT(rotation_geodesic_deg(r.transform.rotation(), s.gt_extrinsic.rotation()), 1e-9);
  EXPECT_LT((r.transform.translation() - s.gt_extrinsic.translation()).norm(), 1e-9);
  EXPECT_EQ(r.loss_trace.size(), 51u);
}

TEST(RefinePose, ConvergesFromPerturbation) {
  Rng rng(9);
  for (std::uint64_t seed = 10; seed < 13; ++seed) {
    const SynthSession s = session(0.0, 0.0, seed, 100);
    const EulerPose start = perturb(s.gt_extrinsic, 2.0, 0.05, rng);
    RefineConfig cfg;
    cfg.steps = 500;
    cfg.lr_rotation = 2e-2;
    cfg.lr_translation = 5e-2;
    const RefineResult r = refine_pose(s.set, to_rigid_transform(start), cfg);
    EXPECT_LT(rotation_geodesic_deg(r.transform.rotation(), s.gt_extrinsic.rotation()), 1e-4);
    EXPECT_LT((r.transform.translation() - s.gt_extrinsic.translation()).norm(), 1e-5);
    EXPECT_LT(r.loss_trace.back(), 1e-10);
    EXPECT_TRUE(is_rotation(r.transform.rotation()));
  }
}

TEST(RefinePose, DefaultScheduleConverges) {
  Rng rng(16);
  for (std::uint64_t seed = 10; seed < 16; ++seed) {
    const SynthSession s = session(0.0, 0.0, seed, 100);
    const EulerPose start = perturb(s.gt_extrinsic, 2.0, 0.05, rng);
    const RefineResult r = refine_pose(s.set, to_rigid_transform(start), RefineConfig{});
    EXPECT_LT(rotation_geodesic_deg(r.transform.rotation(), s.gt_extrinsic.rotation()), 1e-3);
    EXPECT_LT((r.transform.translation() - s.gt_extrinsic.translation()).norm(), 1e-4);
  }
}

TEST(RefinePose, NeverWorseThanInit) {
  Rng rng(14);
  const SynthSession s = session(3.0, 0.3, 14, 40);
  RefineConfig cfg;
  cfg.steps = 100;
  cfg.lr_rotation = 0.05;
  cfg.lr_translation = 0.5;
  cfg.inliers_only = false;
  const RigidTransform init = to_rigid_transform(perturb(s.gt_extrinsic, 1.0, 0.02, rng));
  const RefineResult r = refine_pose(s.set, init, cfg);
  EXPECT_LE(r.loss, r.initial_loss);
  EXPECT_LE(r.loss, *std::min_element(r.loss_trace.begin(), r.loss_trace.end()));
  EXPECT_NEAR(loss_and_gradient(s.set, to_euler_pose(r.transform), cfg.fine_stride).loss, r.loss,
              1e-9 * r.loss);
}

TEST(RefinePose, EmptyActiveSetThrows) {
  const SynthSession s = session(0.0, 0.0, 15, 5);
  const std::vector<std::size_t> none;
  try {
    refine_pose(s.set, s.gt_extrinsic, RefineConfig{}, &none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyActiveSet);
  }
}

}  // namespace
}  // namespace mocalib
