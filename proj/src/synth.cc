#include "mocalib/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "mocalib/error.h"
#include "mocalib/random.h"

namespace mocalib {

namespace {

constexpr double kCameraHeight = 1.2;
constexpr double kRootHeight = 1.0;
constexpr double kRootStep = 0.05;      // m per frame, per axis
constexpr double kHeadingStep = 0.05;   // rad per frame
constexpr double kJointJitter = 0.03;   // m per frame, per axis
constexpr double kMinValidDepth = 1e-6;

// Stream ids; frame and view streams are offset so they never collide.
constexpr std::uint64_t kGtStream = 0;
constexpr std::uint64_t kSkeletonStream = 1;
constexpr std::uint64_t kFrameStreamBase = 1ULL << 20;
constexpr std::uint64_t kViewStreamBase = 1ULL << 40;

CameraModel ring_camera(const SynthConfig& cfg, int index) {
  const double phi = 2.0 * std::numbers::pi * index / cfg.n_cameras;
  const Vec3 center(cfg.rig_radius * std::cos(phi), cfg.rig_radius * std::sin(phi),
                    kCameraHeight);
  const Vec3 forward = (Vec3(0, 0, kRootHeight) - center).normalized();
  const Vec3 right = forward.cross(Vec3::UnitZ()).normalized();
  const Vec3 down = forward.cross(right);
  Mat3 R;
  R.row(0) = right;
  R.row(1) = down;
  R.row(2) = forward;
  Mat3 K;
  K << cfg.focal_px, 0, cfg.image_size.width / 2.0, 0, cfg.focal_px,
      cfg.image_size.height / 2.0, 0, 0, 1;
  return CameraModel(K, nearest_rotation(R), -(nearest_rotation(R) * center),
                     cfg.distortion, cfg.image_size);
}

RigidTransform random_extrinsic(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return RigidTransform(nearest_rotation(q.toRotationMatrix()),
                        Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
}

// World-frame joint positions, frame-major: out[t * J + j].
std::vector<Vec3> simulate_motion(const SynthConfig& cfg) {
  Rng skeleton_rng(cfg.seed, kSkeletonStream);
  std::vector<Vec3> offsets(cfg.n_joints);
  for (Vec3& o : offsets) {
    o = Vec3(skeleton_rng.uniform(-0.3, 0.3), skeleton_rng.uniform(-0.3, 0.3),
             skeleton_rng.uniform(-0.9, 0.8));
  }

  const double half = cfg.motion_extent / 2.0;
  const Vec3 lo(-half, -half, kRootHeight - 0.1 * cfg.motion_extent);
  const Vec3 hi(half, half, kRootHeight + 0.1 * cfg.motion_extent);
  Vec3 root(0, 0, kRootHeight);
  double heading = 0.0;

  std::vector<Vec3> points(static_cast<std::size_t>(cfg.n_frames) * cfg.n_joints);
  for (int t = 0; t < cfg.n_frames; ++t) {
    Rng rng(cfg.seed, kFrameStreamBase + static_cast<std::uint64_t>(t));
    if (t > 0) {
      root += kRootStep * Vec3(rng.normal(), rng.normal(), rng.normal());
      root = root.cwiseMax(lo).cwiseMin(hi);
      heading += kHeadingStep * rng.normal();
    }
    const Mat3 turn = rotation_z(heading);
    for (int j = 0; j < cfg.n_joints; ++j) {
      const Vec3 jitter = kJointJitter * Vec3(rng.normal(), rng.normal(), rng.normal());
      points[static_cast<std::size_t>(t) * cfg.n_joints + j] = root + turn * offsets[j] + jitter;
    }
  }
  return points;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_cameras < 1 || n_joints < 3 || n_frames < 1) {
    throw Error(ErrorKind::InvalidArgument, "need >= 1 camera, >= 3 joints, >= 1 frame");
  }
  auto fraction = [](double f) { return f >= 0.0 && f <= 1.0; };
  if (!fraction(outlier_fraction) || !fraction(invalid_fraction)) {
    throw Error(ErrorKind::InvalidArgument, "fractions must lie in [0, 1]");
  }
  if (!(noise_sigma >= 0.0) || !(focal_px > 0.0) || !(motion_extent >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "sigma, focal and extent must be non-negative");
  }
  if (image_size.width <= 0 || image_size.height <= 0) {
    throw Error(ErrorKind::InvalidArgument, "image size must be positive");
  }
  if (!(rig_radius > motion_extent)) {
    throw Error(ErrorKind::InfeasibleRig, "rig radius " + std::to_string(rig_radius) +
                                              " m does not exceed motion extent " +
                                              std::to_string(motion_extent) + " m");
  }
}

SynthSession generate(const SynthConfig& cfg) {
  cfg.validate();

  RigidTransform gt;
  if (cfg.gt_extrinsic) {
    gt = *cfg.gt_extrinsic;
  } else {
    Rng gt_rng(cfg.seed, kGtStream);
    gt = random_extrinsic(gt_rng);
  }
  const RigidTransform mocap_from_world = gt.inverse();

  std::vector<CameraModel> cameras;
  for (int i = 0; i < cfg.n_cameras; ++i) cameras.push_back(ring_camera(cfg, i));

  const std::vector<Vec3> world = simulate_motion(cfg);

  std::vector<Correspondence> entries;
  std::vector<Corruption> mask;
  entries.reserve(static_cast<std::size_t>(cfg.n_cameras) * world.size());
  mask.reserve(entries.capacity());

  for (int i = 0; i < cfg.n_cameras; ++i) {
    const CameraModel& cam = cameras[i];
    for (int t = 0; t < cfg.n_frames; ++t) {
      Rng rng(cfg.seed, kViewStreamBase +
                            static_cast<std::uint64_t>(t) * cfg.n_cameras + i);
      for (int j = 0; j < cfg.n_joints; ++j) {
        const Vec3& X = world[static_cast<std::size_t>(t) * cfg.n_joints + j];
        Correspondence c;
        c.cam_index = i;
        c.joint_index = j;
        c.frame_index = t;
        c.point3d = mocap_from_world.apply(X);

        const Vec3 Xc = cam.world_to_camera().apply(X);
        // Draws happen unconditionally so the stream layout is fixed.
        const bool drop = rng.bernoulli(cfg.invalid_fraction);
        const bool outlier = rng.bernoulli(cfg.outlier_fraction);
        const Vec2 uniform_pixel(rng.uniform(0, cfg.image_size.width),
                                 rng.uniform(0, cfg.image_size.height));
        const Vec2 noise(rng.normal(), rng.normal());

        Corruption label;
        if (!(Xc.z() > kMinValidDepth) || drop) {
          label = Corruption::invalid;
          c.valid = false;
          c.point2d = Xc.z() > kMinValidDepth ? cam.normalized_to_pixel(Xc.head<2>() / Xc.z())
                                             : Vec2::Zero();
        } else if (outlier) {
          label = Corruption::outlier;
          c.point2d = uniform_pixel;
        } else {
          c.point2d = cam.normalized_to_pixel(Xc.head<2>() / Xc.z());
          if (cfg.noise_sigma > 0.0) {
            label = Corruption::gaussian;
            c.point2d += cfg.noise_sigma * noise;
          } else {
            label = Corruption::clean;
          }
        }
        entries.push_back(c);
        mask.push_back(label);
      }
    }
  }

  CorrespondenceSet set(std::move(cameras), std::move(entries),
                        Dims{cfg.n_cameras, cfg.n_joints, cfg.n_frames});
  return SynthSession{std::move(set), gt, std::move(mask)};
}

std::vector<std::size_t> entries_labeled(const SynthSession& session, Corruption label) {
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < session.corruption_mask.size(); ++k) {
    if (session.corruption_mask[k] == label) ids.push_back(k);
  }
  return ids;
}

}  // namespace mocalib
