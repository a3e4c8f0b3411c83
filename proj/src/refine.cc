#include "mocalib/refine.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mocalib/error.h"
#include "mocalib/parallel.h"

namespace mocalib {

namespace {

constexpr std::size_t kEntriesPerChunk = 4096;
constexpr double kMinDepth = 1e-12;

// Per-camera partial sums in the camera frame: g = J_pix^T r summed, and
// M = sum g W^T so that dL/dtheta_k = <R_c dR_k, M>.
struct CameraSums {
  double sq = 0.0;
  Vec3 g = Vec3::Zero();
  Mat3 M = Mat3::Zero();
  std::size_t count = 0;
};

std::vector<std::size_t> candidate_entries(const CorrespondenceSet& set, int stride,
                                           const std::vector<std::size_t>* restrict_to) {
  const auto& entries = set.entries();
  auto keep = [&](std::size_t k) {
    return k < entries.size() && entries[k].valid && entries[k].frame_index % stride == 0;
  };
  std::vector<std::size_t> ids;
  if (restrict_to) {
    ids.reserve(restrict_to->size());
    for (const std::size_t k : *restrict_to) {
      if (keep(k)) ids.push_back(k);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  } else {
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (keep(k)) ids.push_back(k);
    }
  }
  return ids;
}

LossReport evaluate(const CorrespondenceSet& set, const std::vector<std::size_t>& ids,
                    const EulerPose& pose) {
  const auto& cameras = set.cameras();
  const auto& entries = set.entries();
  const std::size_t n_cams = cameras.size();

  const Mat3 Rm = euler_to_rotation(pose);
  std::vector<Mat3> A(n_cams);
  std::vector<Vec3> b(n_cams);
  for (std::size_t i = 0; i < n_cams; ++i) {
    A[i] = cameras[i].rot_wc() * Rm;
    b[i] = cameras[i].rot_wc() * pose.translation + cameras[i].trans_wc();
  }

  const std::size_t n_chunks = (ids.size() + kEntriesPerChunk - 1) / kEntriesPerChunk;
  std::vector<std::vector<CameraSums>> partial(n_chunks, std::vector<CameraSums>(n_cams));
  parallel_for(n_chunks, [&](std::size_t chunk) {
    auto& sums = partial[chunk];
    const std::size_t end = std::min(ids.size(), (chunk + 1) * kEntriesPerChunk);
    for (std::size_t n = chunk * kEntriesPerChunk; n < end; ++n) {
      const Correspondence& c = entries[ids[n]];
      const CameraModel& cam = cameras[c.cam_index];
      const Vec3 X = A[c.cam_index] * c.point3d + b[c.cam_index];
      if (!(X.z() > kMinDepth)) continue;
      const double inv_z = 1.0 / X.z();
      const Vec2 xy = X.head<2>() * inv_z;
      const Vec2 r = cam.normalized_to_pixel(xy) - c.point2d;
      const Vec2 jr = cam.normalized_to_pixel_jacobian(xy).transpose() * r;
      // d(xy)/dX = [1/z 0 -x/z; 0 1/z -y/z]
      const Vec3 g(jr.x() * inv_z, jr.y() * inv_z, -(jr.x() * xy.x() + jr.y() * xy.y()) * inv_z);
      CameraSums& s = sums[c.cam_index];
      s.sq += r.squaredNorm();
      s.g += g;
      s.M.noalias() += g * c.point3d.transpose();
      ++s.count;
    }
  });

  std::vector<CameraSums> per_cam(n_cams);
  for (const auto& sums : partial) {
    for (std::size_t i = 0; i < n_cams; ++i) {
      per_cam[i].sq += sums[i].sq;
      per_cam[i].g += sums[i].g;
      per_cam[i].M += sums[i].M;
      per_cam[i].count += sums[i].count;
    }
  }

  LossReport out;
  for (const CameraSums& s : per_cam) out.active_count += s.count;
  if (out.active_count == 0) return out;

  const auto dR = euler_rotation_derivatives(pose);
  double sq = 0.0;
  for (std::size_t i = 0; i < n_cams; ++i) {
    const CameraSums& s = per_cam[i];
    if (s.count == 0) continue;
    const Mat3& Rc = cameras[i].rot_wc();
    sq += s.sq;
    for (int k = 0; k < 3; ++k) out.gradient[k] += (Rc * dR[k]).cwiseProduct(s.M).sum();
    out.gradient.tail<3>() += Rc.transpose() * s.g;
  }
  const double inv_n = 1.0 / static_cast<double>(out.active_count);
  out.loss = 0.5 * sq * inv_n;
  out.gradient *= inv_n;
  return out;
}

EulerPose apply_delta(const EulerPose& pose, const Vec6& delta) {
  EulerPose next = pose;
  next.alpha += delta[0];
  next.beta += delta[1];
  next.gamma += delta[2];
  next.translation += delta.tail<3>();
  return next;
}

}  // namespace

void RefineConfig::validate() const {
  auto unit_open = [](double x) { return x > 0.0 && x < 1.0; };
  if (steps < 1) throw Error(ErrorKind::InvalidArgument, "steps must be >= 1");
  if (!(lr_rotation > 0.0) || !(lr_translation > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "learning rates must be positive");
  }
  if (!unit_open(adam_beta1) || !unit_open(adam_beta2)) {
    throw Error(ErrorKind::InvalidArgument, "Adam betas must lie in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon must be positive");
  if (fine_stride < 1) throw Error(ErrorKind::InvalidArgument, "fine_stride must be >= 1");
  if (!(cosine_floor >= 0.0 && cosine_floor <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "cosine_floor must lie in [0, 1]");
  }
  if (!std::isfinite(lr_rotation) || !std::isfinite(lr_translation)) {
    throw Error(ErrorKind::InvalidArgument, "learning rates must be finite");
  }
}

LossReport loss_and_gradient(const CorrespondenceSet& set, const EulerPose& pose, int stride,
                             const std::vector<std::size_t>* restrict_to) {
  if (stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
  return evaluate(set, candidate_entries(set, stride, restrict_to), pose);
}

double cosine_lr(int step, int total, double lr0, double floor_frac) {
  if (total <= 1) return lr0;
  const double floor = floor_frac * lr0;
  const double phase = std::numbers::pi * static_cast<double>(step) / (total - 1);
  return floor + (lr0 - floor) * (1.0 + std::cos(phase)) / 2.0;
}

Vec6 adam_step(AdamState& state, const Vec6& gradient, double lr_rotation,
               double lr_translation, double beta1, double beta2, double epsilon) {
  ++state.t;
  state.m = beta1 * state.m + (1.0 - beta1) * gradient;
  state.v = beta2 * state.v + (1.0 - beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, state.t);
  const double c2 = 1.0 - std::pow(beta2, state.t);
  Vec6 delta;
  for (int k = 0; k < 6; ++k) {
    const double lr = k < 3 ? lr_rotation : lr_translation;
    delta[k] = -lr * (state.m[k] / c1) / (std::sqrt(state.v[k] / c2) + epsilon);
  }
  return delta;
}

RefineResult refine_pose(const CorrespondenceSet& set, const RigidTransform& init,
                         const RefineConfig& cfg, const std::vector<std::size_t>* restrict_to) {
  cfg.validate();
  const auto ids = candidate_entries(set, cfg.fine_stride, restrict_to);

  EulerPose pose = to_euler_pose(init);
  LossReport report = evaluate(set, ids, pose);
  if (report.active_count == 0) {
    throw Error(ErrorKind::EmptyActiveSet, "no correspondence with positive depth at init");
  }

  RefineResult out;
  out.initial_loss = report.loss;
  out.loss = report.loss;
  out.pose = pose;
  out.loss_trace.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  out.loss_trace.push_back(report.loss);

  AdamState adam;
  for (int step = 0; step < cfg.steps; ++step) {
    const double lr_rot = cosine_lr(step, cfg.steps, cfg.lr_rotation, cfg.cosine_floor);
    const double lr_trans = cosine_lr(step, cfg.steps, cfg.lr_translation, cfg.cosine_floor);
    pose = apply_delta(pose, adam_step(adam, report.gradient, lr_rot, lr_trans, cfg.adam_beta1,
                                       cfg.adam_beta2, cfg.adam_epsilon));
    report = evaluate(set, ids, pose);
    out.loss_trace.push_back(report.loss);
    if (report.active_count > 0 && report.loss < out.loss) {
      out.loss = report.loss;
      out.pose = pose;
      out.best_step = step + 1;
    }
  }

  out.transform = out.best_step == 0 ? init : to_rigid_transform(out.pose);
  return out;
}

}  // namespace mocalib
