#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mocalib/error.h"
#include "mocalib/ransac.h"
#include "mocalib/synth.h"

namespace mocalib {
namespace {

double residual_norm(const SynthSession& s, std::size_t id) {
  const Correspondence& c = s.set.entries()[id];
  return residual(c, s.set.cameras()[c.cam_index], s.gt_extrinsic).r.norm();
}

TEST(Synth, NoiselessEntriesReprojectExactly) {
  SynthConfig cfg;
  cfg.n_frames = 50;
  cfg.seed = 3;
  const SynthSession s = generate(cfg);
  ASSERT_EQ(s.set.entries().size(), 2u * 17u * 50u);
  for (std::size_t k = 0; k < s.set.entries().size(); ++k) {
    if (!s.set.entries()[k].valid) continue;
    EXPECT_EQ(s.corruption_mask[k], Corruption::clean);
    EXPECT_LT(residual_norm(s, k), 1e-9);
  }
}

TEST(Synth, EntriesFollowCameraFrameJointOrder) {
  SynthConfig cfg;
  cfg.n_cameras = 3;
  cfg.n_joints = 4;
  cfg.n_frames = 5;
  const SynthSession s = generate(cfg);
  std::size_t k = 0;
  for (int i = 0; i < 3; ++i)
    for (int t = 0; t < 5; ++t)
      for (int j = 0; j < 4; ++j, ++k) {
        const Correspondence& c = s.set.entries()[k];
        EXPECT_EQ(std::tie(c.cam_index, c.frame_index, c.joint_index), std::tie(i, t, j));
      }
}

TEST(Synth, SeedDeterminism) {
  SynthConfig cfg;
  cfg.n_frames = 40;
  cfg.noise_sigma = 1.5;
  cfg.outlier_fraction = 0.1;
  cfg.invalid_fraction = 0.1;
  cfg.seed = 99;
  const SynthSession a = generate(cfg);
  const SynthSession b = generate(cfg);
  EXPECT_EQ(a.set, b.set);
  EXPECT_EQ(a.gt_extrinsic, b.gt_extrinsic);
  EXPECT_EQ(a.corruption_mask, b.corruption_mask);
  cfg.seed = 100;
  EXPECT_FALSE(generate(cfg).set == a.set);
}

TEST(Synth, InfeasibleRig) {
  SynthConfig cfg;
  cfg.rig_radius = 2.0;
  cfg.motion_extent = 2.0;
  try {
    generate(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InfeasibleRig);
  }
}

TEST(Synth, RayleighMeanOfGaussianNoise) {
  SynthConfig cfg;
  cfg.n_cameras = 4;
  cfg.n_joints = 25;
  cfg.n_frames = 1000;  // 10^5 entries
  cfg.noise_sigma = 2.0;
  cfg.seed = 5;
  const SynthSession s = generate(cfg);
  const auto ids = entries_labeled(s, Corruption::gaussian);
  ASSERT_EQ(ids.size(), 100000u);
  double sum = 0.0;
  for (const std::size_t id : ids) sum += residual_norm(s, id);
  const double expected = 2.0 * std::sqrt(std::numbers::pi / 2.0);
  EXPECT_NEAR(sum / ids.size(), expected, 0.02 * expected);
}

TEST(Synth, OutlierCountIsBinomial) {
  SynthConfig cfg;
  cfg.n_cameras = 4;
  cfg.n_joints = 25;
  cfg.n_frames = 1000;
  cfg.outlier_fraction = 0.2;
  cfg.seed = 6;
  const SynthSession s = generate(cfg);
  const double n = 100000.0;
  const double count = static_cast<double>(entries_labeled(s, Corruption::outlier).size());
  EXPECT_NEAR(count, 0.2 * n, 3.0 * std::sqrt(n * 0.2 * 0.8));
}

TEST(Synth, InvalidFractionIsBinomial) {
  SynthConfig cfg;
  cfg.n_cameras = 4;
  cfg.n_joints = 25;
  cfg.n_frames = 1000;
  cfg.invalid_fraction = 0.15;
  cfg.seed = 7;
  const SynthSession s = generate(cfg);
  const double n = 100000.0;
  const auto invalid = entries_labeled(s, Corruption::invalid);
  EXPECT_NEAR(static_cast<double>(invalid.size()), 0.15 * n, 3.0 * std::sqrt(n * 0.15 * 0.85));
  for (const std::size_t id : invalid) EXPECT_FALSE(s.set.entries()[id].valid);
}

// Kolmogorov-Smirnov against Rayleigh(sigma), alpha = 0.01.
TEST(Synth, GaussianResidualsPassRayleighKsTest) {
  SynthConfig cfg;
  cfg.n_cameras = 2;
  cfg.n_joints = 20;
  cfg.n_frames = 250;  // 10^4 entries
  cfg.noise_sigma = 2.0;
  cfg.outlier_fraction = 0.1;
  cfg.seed = 8;
  const SynthSession s = generate(cfg);
  std::vector<double> r;
  for (const std::size_t id : entries_labeled(s, Corruption::gaussian)) {
    r.push_back(residual_norm(s, id));
  }
  std::sort(r.begin(), r.end());
  const double n = static_cast<double>(r.size());
  double d = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    const double cdf = 1.0 - std::exp(-r[k] * r[k] / (2.0 * 4.0));
    d = std::max({d, std::abs(cdf - k / n), std::abs((k + 1) / n - cdf)});
  }
  EXPECT_LT(d, 1.628 / std::sqrt(n));
}

TEST(Synth, DistortedSessionStillExact) {
  SynthConfig cfg;
  cfg.n_frames = 20;
  cfg.distortion = DistortionCoeffs{-0.1, 0.02, 0.0, 0.001, -0.001};
  const SynthSession s = generate(cfg);
  for (std::size_t k = 0; k < s.set.entries().size(); ++k) {
    if (s.set.entries()[k].valid) EXPECT_LT(residual_norm(s, k), 1e-9);
  }
}

}  // namespace
}  // namespace mocalib
