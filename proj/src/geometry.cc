#include "mocalib/geometry.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "mocalib/error.h"

namespace mocalib {

namespace {

constexpr double kGimbalCosTolerance = 1e-9;
constexpr double kPrincipalPlaneDepth = 1e-12;
constexpr int kUndistortIterations = 10;
constexpr double kUndistortTolerance = 1e-10;

}  // namespace

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorKind::NoValidSample: return "NoValidSample";
    case ErrorKind::InsufficientConsensus: return "InsufficientConsensus";
    case ErrorKind::EmptyActiveSet: return "EmptyActiveSet";
    case ErrorKind::InfeasibleRig: return "InfeasibleRig";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

bool DistortionCoeffs::is_finite() const {
  return std::isfinite(k1) && std::isfinite(k2) && std::isfinite(k3) &&
         std::isfinite(p1) && std::isfinite(p2);
}

bool DistortionCoeffs::is_zero() const {
  return k1 == 0.0 && k2 == 0.0 && k3 == 0.0 && p1 == 0.0 && p2 == 0.0;
}

bool is_rotation(const Mat3& R, double tol) {
  if (!R.allFinite()) return false;
  const double ortho = (R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff();
  return ortho <= tol && std::abs(R.determinant() - 1.0) <= tol;
}

Mat3 nearest_rotation(const Mat3& M) {
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 D = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) {
    D(2, 2) = -1.0;
  }
  return svd.matrixU() * D * svd.matrixV().transpose();
}

// -- RigidTransform ----------------------------------------------------------

RigidTransform::RigidTransform()
    : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (!is_rotation(rotation)) {
    throw Error(ErrorKind::InvalidArgument,
                "rotation is not orthonormal with det +1");
  }
  if (!translation.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "translation is not finite");
  }
}

RigidTransform RigidTransform::inverse() const {
  const Mat3 Rt = rotation_.transpose();
  return RigidTransform(Rt, -(Rt * translation_));
}

RigidTransform RigidTransform::operator*(const RigidTransform& rhs) const {
  return RigidTransform(rotation_ * rhs.rotation_,
                        rotation_ * rhs.translation_ + translation_);
}

bool RigidTransform::operator==(const RigidTransform& other) const {
  return rotation_ == other.rotation_ && translation_ == other.translation_;
}

// -- CameraModel -------------------------------------------------------------

CameraModel::CameraModel(const Mat3& intrinsics, const Mat3& rot_wc,
                         const Vec3& trans_wc,
                         std::optional<DistortionCoeffs> distortion,
                         std::optional<ImageSize> image_size)
    : intrinsics_(intrinsics),
      extrinsics_(rot_wc, trans_wc),
      distortion_(distortion),
      image_size_(image_size) {
  if (!intrinsics.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "intrinsics are not finite");
  }
  if (intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0 || intrinsics(2, 2) != 1.0) {
    throw Error(ErrorKind::InvalidArgument, "intrinsics last row must be [0 0 1]");
  }
  if (intrinsics(1, 0) != 0.0) {
    throw Error(ErrorKind::InvalidArgument, "intrinsics K[1][0] must be 0");
  }
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "focal lengths must be positive");
  }
  if (distortion_ && !distortion_->is_finite()) {
    throw Error(ErrorKind::InvalidArgument, "distortion coefficients are not finite");
  }
  if (image_size_ && (image_size_->width <= 0 || image_size_->height <= 0)) {
    throw Error(ErrorKind::InvalidArgument, "image size must be positive");
  }
}

Vec2 CameraModel::normalized_to_pixel(const Vec2& xy) const {
  const Vec2 d = distortion_ ? distort_normalized(*distortion_, xy) : xy;
  const Mat3& K = intrinsics_;
  return {K(0, 0) * d.x() + K(0, 1) * d.y() + K(0, 2), K(1, 1) * d.y() + K(1, 2)};
}

Mat2 CameraModel::normalized_to_pixel_jacobian(const Vec2& xy) const {
  Mat2 Kp;
  Kp << intrinsics_(0, 0), intrinsics_(0, 1), 0.0, intrinsics_(1, 1);
  return distortion_ ? Mat2(Kp * distort_jacobian(*distortion_, xy)) : Kp;
}

Vec2 CameraModel::pixel_to_normalized(const Vec2& pixel) const {
  const Mat3& K = intrinsics_;
  const double y = (pixel.y() - K(1, 2)) / K(1, 1);
  const double x = (pixel.x() - K(0, 2) - K(0, 1) * y) / K(0, 0);
  return distortion_ ? undistort_normalized(*distortion_, {x, y}) : Vec2(x, y);
}

bool CameraModel::operator==(const CameraModel& other) const {
  return intrinsics_ == other.intrinsics_ && extrinsics_ == other.extrinsics_ &&
         distortion_ == other.distortion_ && image_size_ == other.image_size_;
}

// -- Rotations ---------------------------------------------------------------

Mat3 rotation_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << 1, 0, 0, 0, c, -s, 0, s, c;
  return R;
}

Mat3 rotation_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, 0, s, 0, 1, 0, -s, 0, c;
  return R;
}

Mat3 rotation_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return R;
}

Mat3 euler_to_rotation(const EulerPose& pose) {
  return rotation_z(pose.gamma) * rotation_y(pose.beta) * rotation_x(pose.alpha);
}

EulerPose rotation_to_euler(const Mat3& R) {
  EulerPose pose;
  const double cos_beta = std::hypot(R(0, 0), R(1, 0));
  pose.beta = std::atan2(-R(2, 0), cos_beta);
  if (cos_beta < kGimbalCosTolerance) {
    // Only alpha - gamma (beta = +pi/2) or alpha + gamma (beta = -pi/2) is
    // observable; either way R(0,1) = -sin(gamma), R(1,1) = cos(gamma).
    pose.beta = R(2, 0) < 0.0 ? std::numbers::pi / 2 : -std::numbers::pi / 2;
    pose.alpha = 0.0;
    pose.gamma = std::atan2(-R(0, 1), R(1, 1));
  } else {
    pose.alpha = std::atan2(R(2, 1), R(2, 2));
    pose.gamma = std::atan2(R(1, 0), R(0, 0));
  }
  return pose;
}

std::array<Mat3, 3> euler_rotation_derivatives(const EulerPose& pose) {
  const double ca = std::cos(pose.alpha), sa = std::sin(pose.alpha);
  const double cb = std::cos(pose.beta), sb = std::sin(pose.beta);
  const double cg = std::cos(pose.gamma), sg = std::sin(pose.gamma);
  Mat3 dRx, dRy, dRz;
  dRx << 0, 0, 0, 0, -sa, -ca, 0, ca, -sa;
  dRy << -sb, 0, cb, 0, 0, 0, -cb, 0, -sb;
  dRz << -sg, -cg, 0, cg, -sg, 0, 0, 0, 0;
  const Mat3 Rx = rotation_x(pose.alpha);
  const Mat3 Ry = rotation_y(pose.beta);
  const Mat3 Rz = rotation_z(pose.gamma);
  return {Rz * Ry * dRx, Rz * dRy * Rx, dRz * Ry * Rx};
}

RigidTransform to_rigid_transform(const EulerPose& pose) {
  return RigidTransform(euler_to_rotation(pose), pose.translation);
}

EulerPose to_euler_pose(const RigidTransform& transform) {
  EulerPose pose = rotation_to_euler(transform.rotation());
  pose.translation = transform.translation();
  return pose;
}

// -- Distortion --------------------------------------------------------------

Vec2 distort_normalized(const DistortionCoeffs& d, const Vec2& xy) {
  const double x = xy.x(), y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
  return {x * radial + 2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x),
          y * radial + d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y};
}

Mat2 distort_jacobian(const DistortionCoeffs& d, const Vec2& xy) {
  const double x = xy.x(), y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
  // d(radial)/d(r2)
  const double dradial = d.k1 + r2 * (2.0 * d.k2 + 3.0 * d.k3 * r2);
  const double drx = 2.0 * x * dradial;
  const double dry = 2.0 * y * dradial;
  Mat2 J;
  J(0, 0) = radial + x * drx + 2.0 * d.p1 * y + 6.0 * d.p2 * x;
  J(0, 1) = x * dry + 2.0 * d.p1 * x + 2.0 * d.p2 * y;
  J(1, 0) = y * drx + 2.0 * d.p1 * x + 2.0 * d.p2 * y;
  J(1, 1) = radial + y * dry + 6.0 * d.p1 * y + 2.0 * d.p2 * x;
  return J;
}

Vec2 undistort_normalized(const DistortionCoeffs& d, const Vec2& xy) {
  Vec2 p = xy;
  for (int it = 0; it < kUndistortIterations; ++it) {
    const double x = p.x(), y = p.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (d.k1 + r2 * (d.k2 + r2 * d.k3));
    const Vec2 tangential(2.0 * d.p1 * x * y + d.p2 * (r2 + 2.0 * x * x),
                          d.p1 * (r2 + 2.0 * y * y) + 2.0 * d.p2 * x * y);
    const Vec2 next = (xy - tangential) / radial;
    const double step = (next - p).norm();
    p = next;
    if (step < kUndistortTolerance) break;
  }
  return p;
}

// -- Projection & metrics ----------------------------------------------------

Projection project(const CameraModel& cam, const RigidTransform& extrinsic,
                   const Vec3& point_mocap) {
  if (!point_mocap.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "point is not finite");
  }
  const Vec3 X_cam = cam.world_to_camera().apply(extrinsic.apply(point_mocap));
  const double depth = X_cam.z();
  if (std::abs(depth) < kPrincipalPlaneDepth) {
    throw Error(ErrorKind::NonFinite, "point lies on the principal plane");
  }
  return {cam.normalized_to_pixel(X_cam.head<2>() / depth), depth};
}

double rotation_geodesic_deg(const Mat3& Ra, const Mat3& Rb) {
  // atan2(sin, cos) of the relative angle; equal to the clamped arccos of
  // (trace - 1) / 2 but without its loss of precision near 0 and 180.
  const Mat3 D = Ra * Rb.transpose();
  const double cos_angle = std::clamp((D.trace() - 1.0) / 2.0, -1.0, 1.0);
  const Vec3 axis(D(2, 1) - D(1, 2), D(0, 2) - D(2, 0), D(1, 0) - D(0, 1));
  const double sin_angle = std::min(axis.norm() / 2.0, 1.0);
  return std::atan2(sin_angle, cos_angle) * 180.0 / std::numbers::pi;
}

}  // namespace mocalib
