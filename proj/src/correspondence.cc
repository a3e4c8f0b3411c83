#include "mocalib/correspondence.h"

#include <algorithm>
#include <string>

#include "mocalib/error.h"

namespace mocalib {

CorrespondenceSet::CorrespondenceSet(std::vector<CameraModel> cameras,
                                     std::vector<Correspondence> entries, Dims dims)
    : cameras_(std::move(cameras)), entries_(std::move(entries)), dims_(dims) {
  if (cameras_.empty()) {
    throw Error(ErrorKind::InvalidArgument, "correspondence set needs at least one camera");
  }
  if (dims_.n_cameras != static_cast<int>(cameras_.size())) {
    throw Error(ErrorKind::InvalidArgument,
                "dims declare " + std::to_string(dims_.n_cameras) + " cameras but " +
                    std::to_string(cameras_.size()) + " were given");
  }
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    const Correspondence& c = entries_[k];
    if (c.cam_index < 0 || c.cam_index >= dims_.n_cameras || c.joint_index < 0 ||
        c.joint_index >= dims_.n_joints || c.frame_index < 0 ||
        c.frame_index >= dims_.n_frames) {
      throw Error(ErrorKind::InvalidArgument,
                  "entry " + std::to_string(k) + " has indices outside dims");
    }
    if (c.valid && !(c.point3d.allFinite() && c.point2d.allFinite())) {
      throw Error(ErrorKind::InvalidArgument,
                  "valid entry " + std::to_string(k) + " is not finite");
    }
  }
}

std::size_t CorrespondenceSet::valid_count() const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [](const Correspondence& c) { return c.valid; }));
}

CorrespondenceSet CorrespondenceSet::compact() const {
  std::vector<Correspondence> valid;
  valid.reserve(entries_.size());
  std::copy_if(entries_.begin(), entries_.end(), std::back_inserter(valid),
               [](const Correspondence& c) { return c.valid; });
  return CorrespondenceSet(cameras_, std::move(valid), dims_);
}

}  // namespace mocalib
