#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mocalib/correspondence.h"
#include "mocalib/geometry.h"
#include "mocalib/pipeline.h"

namespace mocalib {

inline constexpr int kFormatVersion = 1;

struct SessionData {
  CorrespondenceSet set;
  std::optional<RigidTransform> gt_extrinsic;
  std::vector<std::string> warnings;  // e.g. re-orthonormalized rotations
};

// Session document (JSON):
//   format_version  1
//   units           {"length": "m" | "mm", "pixels": "px"}
//   cameras         [{intrinsics[9], rotation[9] (world -> camera),
//                     translation[3], distortion[5]? (k1, k2, p1, p2, k3),
//                     image_size[2]?}]
//   keypoints3d     T x J x 3, MoCap frame
//   keypoints2d     N x T x J x 3, last channel validity 0 | 1
//   gt_extrinsic    12 numbers, R row-major then t (optional)
//
// Loading yields one correspondence per valid (camera, frame, joint) in that
// nesting order. Lengths in mm are converted to m. Rotations off by at most
// 1e-6 are projected back onto SO(3) with a warning.
// Throws ParseError, DimensionMismatch, UnsupportedVersion, NonFiniteValue,
// IoError; messages name the offending location.
SessionData parse_session(const std::string& text);
SessionData load_session(const std::filesystem::path& path);

// Entries missing from the set are written with validity 0. Throws
// InvalidArgument if two cameras disagree on the 3D point of a (frame,
// joint).
std::string session_to_string(const CorrespondenceSet& set,
                              const std::optional<RigidTransform>& gt = std::nullopt);
void save_session(const std::filesystem::path& path, const CorrespondenceSet& set,
                  const std::optional<RigidTransform>& gt = std::nullopt);

// Report document with a fixed key order; every double round-trips
// bit-exactly. The "timing" block is written last.
std::string report_to_string(const CalibrationReport& report);
CalibrationReport parse_report(const std::string& text);
void save_report(const std::filesystem::path& path, const CalibrationReport& report);
CalibrationReport load_report(const std::filesystem::path& path);

// Reads a whole file; throws IoError.
std::string read_file(const std::filesystem::path& path);
// Writes a whole file; throws IoError.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mocalib
