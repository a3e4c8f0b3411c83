#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>

namespace mocalib {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// Tolerance on ||R^T R - I|| and |det R - 1| for every stored rotation.
inline constexpr double kRotationTolerance = 1e-9;

// Brown-Conrady coefficients in normalized camera coordinates.
struct DistortionCoeffs {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  bool is_finite() const;
  bool is_zero() const;
  bool operator==(const DistortionCoeffs&) const = default;
};

struct ImageSize {
  int width = 0;
  int height = 0;
  bool operator==(const ImageSize&) const = default;
};

bool is_rotation(const Mat3& R, double tol = kRotationTolerance);

// Nearest rotation in the Frobenius sense (polar decomposition via SVD).
Mat3 nearest_rotation(const Mat3& M);

// Rotation + translation acting on column vectors: x -> R x + t.
class RigidTransform {
 public:
  RigidTransform();
  RigidTransform(const Mat3& rotation, const Vec3& translation);

  static RigidTransform identity() { return {}; }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  Vec3 apply(const Vec3& x) const { return rotation_ * x + translation_; }
  RigidTransform inverse() const;

  // (a * b).apply(x) == a.apply(b.apply(x))
  RigidTransform operator*(const RigidTransform& rhs) const;

  bool operator==(const RigidTransform& other) const;

 private:
  Mat3 rotation_;
  Vec3 translation_;
};

// MoCap -> world transform parameterized as R = Rz(gamma) Ry(beta) Rx(alpha).
struct EulerPose {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  Vec3 translation = Vec3::Zero();

  bool operator==(const EulerPose&) const = default;
};

struct Projection {
  Vec2 pixel;
  double depth;
};

// Pinhole camera with optional distortion. rot_wc / trans_wc map world points
// into the camera frame.
class CameraModel {
 public:
  CameraModel(const Mat3& intrinsics, const Mat3& rot_wc, const Vec3& trans_wc,
              std::optional<DistortionCoeffs> distortion = std::nullopt,
              std::optional<ImageSize> image_size = std::nullopt);

  const Mat3& intrinsics() const { return intrinsics_; }
  const Mat3& rot_wc() const { return extrinsics_.rotation(); }
  const Vec3& trans_wc() const { return extrinsics_.translation(); }
  const RigidTransform& world_to_camera() const { return extrinsics_; }
  const std::optional<DistortionCoeffs>& distortion() const { return distortion_; }
  const std::optional<ImageSize>& image_size() const { return image_size_; }

  // Normalized coordinates (x/z, y/z) -> pixels, distortion included.
  Vec2 normalized_to_pixel(const Vec2& xy) const;
  // d(pixel)/d(normalized), distortion Jacobian included.
  Mat2 normalized_to_pixel_jacobian(const Vec2& xy) const;
  // Pixels -> undistorted normalized coordinates.
  Vec2 pixel_to_normalized(const Vec2& pixel) const;

  bool operator==(const CameraModel& other) const;

 private:
  Mat3 intrinsics_;
  RigidTransform extrinsics_;
  std::optional<DistortionCoeffs> distortion_;
  std::optional<ImageSize> image_size_;
};

Mat3 rotation_x(double angle);
Mat3 rotation_y(double angle);
Mat3 rotation_z(double angle);

Mat3 euler_to_rotation(const EulerPose& pose);

// Inverse of euler_to_rotation with beta in [-pi/2, pi/2]. At gimbal lock
// (|cos beta| < 1e-9) alpha is pinned to 0 and gamma carries the rest.
// The returned translation is zero.
EulerPose rotation_to_euler(const Mat3& R);

// dR/dalpha, dR/dbeta, dR/dgamma.
std::array<Mat3, 3> euler_rotation_derivatives(const EulerPose& pose);

RigidTransform to_rigid_transform(const EulerPose& pose);
EulerPose to_euler_pose(const RigidTransform& transform);

Vec2 distort_normalized(const DistortionCoeffs& d, const Vec2& xy);
Mat2 distort_jacobian(const DistortionCoeffs& d, const Vec2& xy);
// Fixed-point inverse of distort_normalized (10 iterations, tol 1e-10).
Vec2 undistort_normalized(const DistortionCoeffs& d, const Vec2& xy);

// Projects a MoCap-frame point through extrinsic (MoCap -> world) and the
// camera. Negative depth is reported, not rejected; throws NonFinite only
// when the point lies on the principal plane.
Projection project(const CameraModel& cam, const RigidTransform& extrinsic,
                   const Vec3& point_mocap);

double rotation_geodesic_deg(const Mat3& Ra, const Mat3& Rb);

}  // namespace mocalib
