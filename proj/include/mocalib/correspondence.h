#pragma once

#include <cstddef>
#include <vector>

#include "mocalib/geometry.h"

namespace mocalib {

// One (camera, joint, frame) pairing of a MoCap point with a 2D keypoint.
struct Correspondence {
  int cam_index = 0;
  int joint_index = 0;
  int frame_index = 0;
  Vec3 point3d = Vec3::Zero();  // meters, MoCap frame
  Vec2 point2d = Vec2::Zero();  // pixels
  bool valid = true;

  bool operator==(const Correspondence&) const = default;
};

struct Dims {
  int n_cameras = 0;
  int n_joints = 0;
  int n_frames = 0;

  std::size_t total() const {
    return static_cast<std::size_t>(n_cameras) * n_joints * n_frames;
  }
  bool operator==(const Dims&) const = default;
};

class CorrespondenceSet {
 public:
  // Throws InvalidArgument if there is no camera, an index falls outside
  // dims, the camera count disagrees with dims, or a valid entry is not
  // finite.
  CorrespondenceSet(std::vector<CameraModel> cameras,
                    std::vector<Correspondence> entries, Dims dims);

  const std::vector<CameraModel>& cameras() const { return cameras_; }
  const std::vector<Correspondence>& entries() const { return entries_; }
  const Dims& dims() const { return dims_; }

  std::size_t valid_count() const;

  // Same set restricted to valid entries, order preserved.
  CorrespondenceSet compact() const;

  bool operator==(const CorrespondenceSet&) const = default;

 private:
  std::vector<CameraModel> cameras_;
  std::vector<Correspondence> entries_;
  Dims dims_;
};

}  // namespace mocalib
