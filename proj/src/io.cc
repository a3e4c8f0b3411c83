#include "mocalib/io.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/LU>
#include <json.hpp>

#include "mocalib/error.h"

namespace mocalib {

namespace {

using json = nlohmann::ordered_json;

constexpr double kReorthonormalizeTolerance = 1e-6;

[[noreturn]] void fail(ErrorKind kind, const std::string& where, const std::string& what) {
  throw Error(kind, where + ": " + what);
}

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string child(const std::string& path, std::size_t index) {
  return path + "[" + std::to_string(index) + "]";
}

std::string line_column(const std::string& text, std::size_t offset) {
  std::size_t line = 1, column = 1;
  for (std::size_t k = 0; k < std::min(offset, text.size()); ++k) {
    if (text[k] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError,
                line_column(text, e.byte > 0 ? e.byte - 1 : 0) + ": malformed document");
  } catch (const json::out_of_range& e) {
    // Raised for numbers outside the double range; the message quotes the token.
    const std::string what = e.what();
    const std::size_t open = what.find('\'');
    const std::size_t close = what.rfind('\'');
    std::size_t at = std::string::npos;
    if (open != std::string::npos && close > open) at = text.find(what.substr(open + 1, close - open - 1));
    throw Error(ErrorKind::NonFiniteValue,
                (at == std::string::npos ? std::string("document") : line_column(text, at)) +
                    ": number out of range");
  }
}

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(ErrorKind::ParseError, path.empty() ? "document" : path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(ErrorKind::ParseError, child(path, key), "missing field");
  return *it;
}

const json* optional_field(const json& obj, const std::string& key) {
  const auto it = obj.find(key);
  return it == obj.end() || it->is_null() ? nullptr : &*it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) fail(ErrorKind::ParseError, path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(ErrorKind::NonFiniteValue, path, "value is not finite");
  return x;
}

std::int64_t integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) fail(ErrorKind::ParseError, path, "expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t unsigned_integer(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) fail(ErrorKind::ParseError, path, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

bool boolean(const json& v, const std::string& path) {
  if (!v.is_boolean()) fail(ErrorKind::ParseError, path, "expected true or false");
  return v.get<bool>();
}

std::string string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(ErrorKind::ParseError, path, "expected a string");
  return v.get<std::string>();
}

const json& array(const json& v, const std::string& path) {
  if (!v.is_array()) fail(ErrorKind::ParseError, path, "expected an array");
  return v;
}

const json& sized_array(const json& v, std::size_t n, const std::string& path) {
  array(v, path);
  if (v.size() != n) {
    fail(ErrorKind::DimensionMismatch, path,
         "expected " + std::to_string(n) + " elements, found " + std::to_string(v.size()));
  }
  return v;
}

std::vector<double> numbers(const json& v, std::size_t n, const std::string& path) {
  sized_array(v, n, path);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = number(v[k], child(path, k));
  return out;
}

Mat3 matrix(const std::vector<double>& v) {
  Mat3 M;
  M << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  return M;
}

json to_array(const Mat3& M) {
  json a = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(M(r, c));
  return a;
}

json to_array(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

double rotation_deviation(const Mat3& R) {
  return std::max((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff(),
                  std::abs(R.determinant() - 1.0));
}

Mat3 checked_rotation(const Mat3& R, const std::string& path, std::vector<std::string>& warnings) {
  const double dev = rotation_deviation(R);
  if (dev <= kRotationTolerance) return R;
  std::ostringstream msg;
  msg << "deviation from a rotation is " << dev;
  if (dev > kReorthonormalizeTolerance) fail(ErrorKind::ParseError, path, msg.str());
  warnings.push_back(path + ": re-orthonormalized, " + msg.str());
  return nearest_rotation(R);
}

CameraModel read_camera(const json& cam, const std::string& path, double length_scale,
                        std::vector<std::string>& warnings) {
  const Mat3 K = matrix(numbers(field(cam, "intrinsics", path), 9, child(path, "intrinsics")));
  const Mat3 R = checked_rotation(
      matrix(numbers(field(cam, "rotation", path), 9, child(path, "rotation"))),
      child(path, "rotation"), warnings);
  const auto t = numbers(field(cam, "translation", path), 3, child(path, "translation"));
  std::optional<DistortionCoeffs> distortion;
  if (const json* d = optional_field(cam, "distortion")) {
    const auto c = numbers(*d, 5, child(path, "distortion"));
    distortion = DistortionCoeffs{.k1 = c[0], .k2 = c[1], .k3 = c[4], .p1 = c[2], .p2 = c[3]};
  }
  std::optional<ImageSize> image_size;
  if (const json* s = optional_field(cam, "image_size")) {
    sized_array(*s, 2, child(path, "image_size"));
    image_size = ImageSize{static_cast<int>(integer((*s)[0], child(child(path, "image_size"), 0))),
                           static_cast<int>(integer((*s)[1], child(child(path, "image_size"), 1)))};
  }
  try {
    return CameraModel(K, R, length_scale * Vec3(t[0], t[1], t[2]), distortion, image_size);
  } catch (const Error& e) {
    fail(ErrorKind::ParseError, path, e.what());
  }
}

json camera_to_json(const CameraModel& cam) {
  json j;
  j["intrinsics"] = to_array(cam.intrinsics());
  j["rotation"] = to_array(cam.rot_wc());
  j["translation"] = to_array(cam.trans_wc());
  if (const auto& d = cam.distortion()) j["distortion"] = json::array({d->k1, d->k2, d->p1, d->p2, d->k3});
  if (const auto& s = cam.image_size()) j["image_size"] = json::array({s->width, s->height});
  return j;
}

RigidTransform read_transform_12(const json& v, const std::string& path, double length_scale,
                                 std::vector<std::string>& warnings) {
  const auto n = numbers(v, 12, path);
  const Mat3 R = checked_rotation(matrix(n), path, warnings);
  return RigidTransform(R, length_scale * Vec3(n[9], n[10], n[11]));
}

json transform_to_12(const RigidTransform& T) {
  json a = to_array(T.rotation());
  for (int k = 0; k < 3; ++k) a.push_back(T.translation()[k]);
  return a;
}

json ransac_to_json(const RansacConfig& c) {
  json j;
  j["tau"] = c.tau;
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["coarse_stride"] = c.coarse_stride;
  j["min_inlier_ratio"] = c.min_inlier_ratio;
  j["minimal_cheirality"] = c.minimal_cheirality;
  return j;
}

RansacConfig ransac_from_json(const json& j, const std::string& p) {
  RansacConfig c;
  c.tau = number(field(j, "tau", p), child(p, "tau"));
  c.iterations = static_cast<int>(integer(field(j, "iterations", p), child(p, "iterations")));
  c.seed = unsigned_integer(field(j, "seed", p), child(p, "seed"));
  c.coarse_stride = static_cast<int>(integer(field(j, "coarse_stride", p), child(p, "coarse_stride")));
  c.min_inlier_ratio = number(field(j, "min_inlier_ratio", p), child(p, "min_inlier_ratio"));
  c.minimal_cheirality = boolean(field(j, "minimal_cheirality", p), child(p, "minimal_cheirality"));
  return c;
}

json refine_to_json(const RefineConfig& c) {
  json j;
  j["steps"] = c.steps;
  j["lr_rotation"] = c.lr_rotation;
  j["lr_translation"] = c.lr_translation;
  j["adam_beta1"] = c.adam_beta1;
  j["adam_beta2"] = c.adam_beta2;
  j["adam_epsilon"] = c.adam_epsilon;
  j["fine_stride"] = c.fine_stride;
  j["inliers_only"] = c.inliers_only;
  j["cosine_floor"] = c.cosine_floor;
  return j;
}

RefineConfig refine_from_json(const json& j, const std::string& p) {
  RefineConfig c;
  auto num = [&](const char* key) { return number(field(j, key, p), child(p, key)); };
  c.steps = static_cast<int>(integer(field(j, "steps", p), child(p, "steps")));
  c.lr_rotation = num("lr_rotation");
  c.lr_translation = num("lr_translation");
  c.adam_beta1 = num("adam_beta1");
  c.adam_beta2 = num("adam_beta2");
  c.adam_epsilon = num("adam_epsilon");
  c.fine_stride = static_cast<int>(integer(field(j, "fine_stride", p), child(p, "fine_stride")));
  c.inliers_only = boolean(field(j, "inliers_only", p), child(p, "inliers_only"));
  c.cosine_floor = num("cosine_floor");
  return c;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional_number(const json& obj, const std::string& key,
                                           const std::string& path) {
  const json& v = field(obj, key, path);
  if (v.is_null()) return std::nullopt;
  return number(v, child(path, key));
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::IoError, "failed reading " + path.string());
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

SessionData parse_session(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) fail(ErrorKind::ParseError, "document", "expected an object");

  const std::int64_t version = integer(field(doc, "format_version", ""), "format_version");
  if (version != kFormatVersion) {
    fail(ErrorKind::UnsupportedVersion, "format_version",
         "version " + std::to_string(version) + " is not supported");
  }

  const json& units = field(doc, "units", "");
  const std::string length = string(field(units, "length", "units"), "units.length");
  double scale = 1.0;
  if (length == "mm") {
    scale = 1e-3;
  } else if (length != "m") {
    fail(ErrorKind::ParseError, "units.length", "expected \"m\" or \"mm\", found \"" + length + "\"");
  }
  if (string(field(units, "pixels", "units"), "units.pixels") != "px") {
    fail(ErrorKind::ParseError, "units.pixels", "expected \"px\"");
  }

  std::vector<std::string> warnings;

  const json& cams = array(field(doc, "cameras", ""), "cameras");
  if (cams.empty()) fail(ErrorKind::DimensionMismatch, "cameras", "at least one camera is required");
  std::vector<CameraModel> cameras;
  for (std::size_t i = 0; i < cams.size(); ++i) {
    cameras.push_back(read_camera(cams[i], child("cameras", i), scale, warnings));
  }

  const json& k3 = array(field(doc, "keypoints3d", ""), "keypoints3d");
  const std::size_t T = k3.size();
  if (T == 0) fail(ErrorKind::DimensionMismatch, "keypoints3d", "no frames");
  const std::size_t J = array(k3[0], "keypoints3d[0]").size();
  if (J == 0) fail(ErrorKind::DimensionMismatch, "keypoints3d[0]", "no joints");
  std::vector<Vec3> points(T * J);
  for (std::size_t t = 0; t < T; ++t) {
    const std::string pt = child("keypoints3d", t);
    const json& frame = sized_array(k3[t], J, pt);
    for (std::size_t j = 0; j < J; ++j) {
      const auto p = numbers(frame[j], 3, child(pt, j));
      points[t * J + j] = scale * Vec3(p[0], p[1], p[2]);
    }
  }

  const json& k2 = field(doc, "keypoints2d", "");
  sized_array(k2, cameras.size(), "keypoints2d");
  std::vector<Correspondence> entries;
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const std::string pi = child("keypoints2d", i);
    const json& cam_block = sized_array(k2[i], T, pi);
    for (std::size_t t = 0; t < T; ++t) {
      const std::string pt = child(pi, t);
      const json& frame = sized_array(cam_block[t], J, pt);
      for (std::size_t j = 0; j < J; ++j) {
        const std::string pj = child(pt, j);
        const auto w = numbers(frame[j], 3, pj);
        if (w[2] != 0.0 && w[2] != 1.0) {
          fail(ErrorKind::ParseError, child(pj, 2), "validity must be 0 or 1");
        }
        if (w[2] == 0.0) continue;
        Correspondence c;
        c.cam_index = static_cast<int>(i);
        c.frame_index = static_cast<int>(t);
        c.joint_index = static_cast<int>(j);
        c.point3d = points[t * J + j];
        c.point2d = Vec2(w[0], w[1]);
        entries.push_back(c);
      }
    }
  }

  std::optional<RigidTransform> gt;
  if (const json* g = optional_field(doc, "gt_extrinsic")) {
    gt = read_transform_12(*g, "gt_extrinsic", scale, warnings);
  }

  CorrespondenceSet set(std::move(cameras), std::move(entries),
                        Dims{static_cast<int>(cams.size()), static_cast<int>(J),
                             static_cast<int>(T)});
  return SessionData{std::move(set), gt, std::move(warnings)};
}

SessionData load_session(const std::filesystem::path& path) {
  return parse_session(read_file(path));
}

std::string session_to_string(const CorrespondenceSet& set, const std::optional<RigidTransform>& gt) {
  const Dims& d = set.dims();
  const std::size_t N = d.n_cameras, T = d.n_frames, J = d.n_joints;

  std::vector<std::optional<Vec3>> points(T * J);
  std::vector<const Correspondence*> slots(N * T * J, nullptr);
  for (const Correspondence& c : set.entries()) {
    const std::size_t tj = static_cast<std::size_t>(c.frame_index) * J + c.joint_index;
    auto& p = points[tj];
    if (p && *p != c.point3d) {
      throw Error(ErrorKind::InvalidArgument,
                  "frame " + std::to_string(c.frame_index) + ", joint " +
                      std::to_string(c.joint_index) + " has conflicting 3D points");
    }
    p = c.point3d;
    const Correspondence*& slot = slots[c.cam_index * T * J + tj];
    if (slot) {
      throw Error(ErrorKind::InvalidArgument, "duplicate correspondence for camera " +
                                                  std::to_string(c.cam_index) + ", frame " +
                                                  std::to_string(c.frame_index) + ", joint " +
                                                  std::to_string(c.joint_index));
    }
    slot = &c;
  }

  json doc;
  doc["format_version"] = kFormatVersion;
  doc["units"] = {{"length", "m"}, {"pixels", "px"}};
  doc["cameras"] = json::array();
  for (const CameraModel& cam : set.cameras()) doc["cameras"].push_back(camera_to_json(cam));

  json k3 = json::array();
  for (std::size_t t = 0; t < T; ++t) {
    json frame = json::array();
    for (std::size_t j = 0; j < J; ++j) frame.push_back(to_array(points[t * J + j].value_or(Vec3::Zero())));
    k3.push_back(std::move(frame));
  }
  doc["keypoints3d"] = std::move(k3);

  json k2 = json::array();
  for (std::size_t i = 0; i < N; ++i) {
    json cam_block = json::array();
    for (std::size_t t = 0; t < T; ++t) {
      json frame = json::array();
      for (std::size_t j = 0; j < J; ++j) {
        const Correspondence* c = slots[i * T * J + t * J + j];
        if (c) {
          frame.push_back(json::array({c->point2d.x(), c->point2d.y(), c->valid ? 1 : 0}));
        } else {
          frame.push_back(json::array({0.0, 0.0, 0}));
        }
      }
      cam_block.push_back(std::move(frame));
    }
    k2.push_back(std::move(cam_block));
  }
  doc["keypoints2d"] = std::move(k2);
  if (gt) doc["gt_extrinsic"] = transform_to_12(*gt);
  return doc.dump() + "\n";
}

void save_session(const std::filesystem::path& path, const CorrespondenceSet& set,
                  const std::optional<RigidTransform>& gt) {
  write_file(path, session_to_string(set, gt));
}

std::string report_to_string(const CalibrationReport& r) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["transform"] = {{"rotation", to_array(r.transform.rotation())},
                      {"translation", to_array(r.transform.translation())}};
  doc["euler"] = {{"alpha", r.euler.alpha},
                  {"beta", r.euler.beta},
                  {"gamma", r.euler.gamma},
                  {"translation", to_array(r.euler.translation)}};
  doc["mpjpe"] = {{"init", r.mpjpe_init},
                  {"refined", r.mpjpe_refined},
                  {"gt", optional_number(r.mpjpe_gt)}};
  doc["gt_error"] = {{"rotation_deg", optional_number(r.rotation_error_deg)},
                     {"translation_m", optional_number(r.translation_error_m)}};
  doc["inliers"] = {{"ratio", r.inlier_ratio}, {"count", r.inlier_count}};
  doc["refinement"] = {{"active_count", r.refine_active_count},
                       {"initial_loss", r.refine_initial_loss},
                       {"final_loss", r.refine_final_loss},
                       {"best_step", r.refine_best_step},
                       {"rejected", r.refinement_rejected}};
  doc["counts"] = {{"total", r.counts.total},
                   {"valid", r.counts.valid},
                   {"positive_depth", r.counts.positive_depth}};
  doc["n_frames"] = r.n_frames;
  doc["seed"] = r.seed;
  doc["config"] = {{"ransac", ransac_to_json(r.ransac_config)},
                   {"refine", refine_to_json(r.refine_config)}};
  doc["warnings"] = r.warnings;
  doc["timing"] = {{"ransac_ms", r.timing.ransac_ms},
                   {"refine_ms", r.timing.refine_ms},
                   {"total_ms", r.timing.total_ms},
                   {"ms_per_frame", r.timing.ms_per_frame}};
  return doc.dump(2) + "\n";
}

CalibrationReport parse_report(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object()) fail(ErrorKind::ParseError, "document", "expected an object");
  const std::int64_t version = integer(field(doc, "format_version", ""), "format_version");
  if (version != kFormatVersion) {
    fail(ErrorKind::UnsupportedVersion, "format_version",
         "version " + std::to_string(version) + " is not supported");
  }

  CalibrationReport r;
  auto vec3 = [](const std::vector<double>& v) { return Vec3(v[0], v[1], v[2]); };

  const json& tr = field(doc, "transform", "");
  const Mat3 R = matrix(numbers(field(tr, "rotation", "transform"), 9, "transform.rotation"));
  if (!is_rotation(R)) fail(ErrorKind::ParseError, "transform.rotation", "not a rotation");
  r.transform = RigidTransform(
      R, vec3(numbers(field(tr, "translation", "transform"), 3, "transform.translation")));

  const json& eu = field(doc, "euler", "");
  r.euler.alpha = number(field(eu, "alpha", "euler"), "euler.alpha");
  r.euler.beta = number(field(eu, "beta", "euler"), "euler.beta");
  r.euler.gamma = number(field(eu, "gamma", "euler"), "euler.gamma");
  r.euler.translation = vec3(numbers(field(eu, "translation", "euler"), 3, "euler.translation"));

  const json& mp = field(doc, "mpjpe", "");
  r.mpjpe_init = number(field(mp, "init", "mpjpe"), "mpjpe.init");
  r.mpjpe_refined = number(field(mp, "refined", "mpjpe"), "mpjpe.refined");
  r.mpjpe_gt = read_optional_number(mp, "gt", "mpjpe");

  const json& ge = field(doc, "gt_error", "");
  r.rotation_error_deg = read_optional_number(ge, "rotation_deg", "gt_error");
  r.translation_error_m = read_optional_number(ge, "translation_m", "gt_error");

  const json& in = field(doc, "inliers", "");
  r.inlier_ratio = number(field(in, "ratio", "inliers"), "inliers.ratio");
  r.inlier_count = unsigned_integer(field(in, "count", "inliers"), "inliers.count");

  const json& rf = field(doc, "refinement", "");
  r.refine_active_count =
      unsigned_integer(field(rf, "active_count", "refinement"), "refinement.active_count");
  r.refine_initial_loss = number(field(rf, "initial_loss", "refinement"), "refinement.initial_loss");
  r.refine_final_loss = number(field(rf, "final_loss", "refinement"), "refinement.final_loss");
  r.refine_best_step =
      static_cast<int>(integer(field(rf, "best_step", "refinement"), "refinement.best_step"));
  r.refinement_rejected = boolean(field(rf, "rejected", "refinement"), "refinement.rejected");

  const json& ct = field(doc, "counts", "");
  r.counts.total = unsigned_integer(field(ct, "total", "counts"), "counts.total");
  r.counts.valid = unsigned_integer(field(ct, "valid", "counts"), "counts.valid");
  r.counts.positive_depth =
      unsigned_integer(field(ct, "positive_depth", "counts"), "counts.positive_depth");

  r.n_frames = static_cast<int>(integer(field(doc, "n_frames", ""), "n_frames"));
  r.seed = unsigned_integer(field(doc, "seed", ""), "seed");

  const json& cfg = field(doc, "config", "");
  r.ransac_config = ransac_from_json(field(cfg, "ransac", "config"), "config.ransac");
  r.refine_config = refine_from_json(field(cfg, "refine", "config"), "config.refine");

  const json& warnings = array(field(doc, "warnings", ""), "warnings");
  for (std::size_t k = 0; k < warnings.size(); ++k) {
    r.warnings.push_back(string(warnings[k], child("warnings", k)));
  }

  const json& tm = field(doc, "timing", "");
  r.timing.ransac_ms = number(field(tm, "ransac_ms", "timing"), "timing.ransac_ms");
  r.timing.refine_ms = number(field(tm, "refine_ms", "timing"), "timing.refine_ms");
  r.timing.total_ms = number(field(tm, "total_ms", "timing"), "timing.total_ms");
  r.timing.ms_per_frame = number(field(tm, "ms_per_frame", "timing"), "timing.ms_per_frame");
  return r;
}

void save_report(const std::filesystem::path& path, const CalibrationReport& report) {
  write_file(path, report_to_string(report));
}

CalibrationReport load_report(const std::filesystem::path& path) {
  return parse_report(read_file(path));
}

}  // namespace mocalib
