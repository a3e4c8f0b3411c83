#include <algorithm>
#include <filesystem>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "mocalib/error.h"
#include "mocalib/io.h"
#include "mocalib/pipeline.h"
#include "mocalib/synth.h"

namespace fs = std::filesystem;
using namespace mocalib;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNoConsensus = 2;
constexpr int kExitInput = 3;
constexpr int kExitUsage = 64;

std::string read_input(const std::string& path) {
  if (path == "-") {
    return std::string(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
  }
  return read_file(path);
}

void write_output(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    write_file(path, text);
  }
}

struct CalibrateArgs {
  std::string session;
  std::string out;
  RansacConfig ransac;
  RefineConfig refine;
};

int run_calibrate(const CalibrateArgs& args) {
  const SessionData data = parse_session(read_input(args.session));
  for (const std::string& w : data.warnings) std::cerr << "warning: " << w << "\n";
  CalibrationReport report = calibrate(data.set, args.ransac, args.refine, data.gt_extrinsic);
  report.warnings.insert(report.warnings.begin(), data.warnings.begin(), data.warnings.end());
  write_output(args.out, report_to_string(report));
  std::cerr << fmt::format("mpjpe init {:.6f} px, refined {:.6f} px, inlier ratio {:.4f}\n",
                           report.mpjpe_init, report.mpjpe_refined, report.inlier_ratio);
  return kExitOk;
}

RigidTransform parse_extrinsic(const std::vector<std::string>& tokens) {
  if (tokens.size() == 1 && fs::is_regular_file(tokens[0])) return load_report(tokens[0]).transform;
  std::string joined;
  for (const std::string& t : tokens) joined += t + " ";
  std::replace(joined.begin(), joined.end(), ',', ' ');
  std::istringstream in(joined);
  std::vector<double> v;
  std::string word;
  while (in >> word) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(word, &used));
      if (used != word.size()) throw std::invalid_argument(word);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::ParseError, "--extrinsic: '" + word + "' is not a number");
    }
  }
  if (v.size() != 12) {
    throw Error(ErrorKind::DimensionMismatch,
                "--extrinsic: expected a report path or 12 numbers, got " + std::to_string(v.size()));
  }
  Mat3 R;
  R << v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8];
  if (!is_rotation(R, 1e-6)) throw Error(ErrorKind::ParseError, "--extrinsic: not a rotation");
  return RigidTransform(nearest_rotation(R), Vec3(v[9], v[10], v[11]));
}

int run_eval(const std::string& session, const std::vector<std::string>& extrinsic) {
  const SessionData data = parse_session(read_input(session));
  const RigidTransform T = parse_extrinsic(extrinsic);
  fmt::print("mpjpe_px {:.17g}\n", compute_mpjpe(data.set, T));
  if (data.gt_extrinsic) {
    fmt::print("rotation_error_deg {:.17g}\n",
               rotation_geodesic_deg(T.rotation(), data.gt_extrinsic->rotation()));
    fmt::print("translation_error_m {:.17g}\n",
               (T.translation() - data.gt_extrinsic->translation()).norm());
  }
  return kExitOk;
}

int run_synth(const SynthConfig& cfg, const std::string& out) {
  const SynthSession s = generate(cfg);
  write_output(out, session_to_string(s.set, s.gt_extrinsic));
  return kExitOk;
}

std::string optional_cell(const std::optional<double>& v) {
  return v ? fmt::format("{:.17g}", *v) : std::string();
}

const char* kCsvHeader =
    "name,mpjpe_init_px,mpjpe_refined_px,mpjpe_gt_px,rotation_error_deg,translation_error_m,"
    "inlier_ratio,refinement_rejected,total_ms,ms_per_frame";

std::string csv_row(const std::string& name, const CalibrationReport& r) {
  return fmt::format("{},{:.17g},{:.17g},{},{},{},{:.17g},{},{:.17g},{:.17g}", name, r.mpjpe_init,
                     r.mpjpe_refined, optional_cell(r.mpjpe_gt),
                     optional_cell(r.rotation_error_deg), optional_cell(r.translation_error_m),
                     r.inlier_ratio, r.refinement_rejected ? 1 : 0, r.timing.total_ms,
                     r.timing.ms_per_frame);
}

void print_table(const std::string& name, const CalibrationReport& r) {
  const Mat3& R = r.transform.rotation();
  const Vec3& t = r.transform.translation();
  fmt::print("report            {}\n", name);
  for (int k = 0; k < 3; ++k) {
    fmt::print("{:<18}[{:>12.8f} {:>12.8f} {:>12.8f} | {:>12.6f}]\n", k == 0 ? "transform" : "",
               R(k, 0), R(k, 1), R(k, 2), t[k]);
  }
  fmt::print("euler (rad)       alpha {:.8f}  beta {:.8f}  gamma {:.8f}\n", r.euler.alpha,
             r.euler.beta, r.euler.gamma);
  fmt::print("mpjpe init        {:.6f} px\n", r.mpjpe_init);
  fmt::print("mpjpe refined     {:.6f} px{}\n", r.mpjpe_refined,
             r.refinement_rejected ? "  (refinement rejected)" : "");
  if (r.mpjpe_gt) fmt::print("mpjpe gt          {:.6f} px\n", *r.mpjpe_gt);
  if (r.rotation_error_deg) fmt::print("rotation error    {:.6g} deg\n", *r.rotation_error_deg);
  if (r.translation_error_m) fmt::print("translation error {:.6g} m\n", *r.translation_error_m);
  fmt::print("inliers           {} ({:.4f})\n", r.inlier_count, r.inlier_ratio);
  fmt::print("correspondences   {} total, {} valid, {} in front\n", r.counts.total,
             r.counts.valid, r.counts.positive_depth);
  fmt::print("time              {:.1f} ms total ({:.1f} ransac, {:.1f} refine), {:.3f} ms/frame\n",
             r.timing.total_ms, r.timing.ransac_ms, r.timing.refine_ms, r.timing.ms_per_frame);
  for (const std::string& w : r.warnings) fmt::print("warning           {}\n", w);
}

std::optional<double> mean_of(const std::vector<CalibrationReport>& reports,
                              std::optional<double> (*get)(const CalibrationReport&)) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const CalibrationReport& r : reports) {
    if (const auto v = get(r)) {
      sum += *v;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

int run_report(const std::string& in, bool csv) {
  if (!fs::is_directory(in)) {
    const CalibrationReport r = parse_report(read_input(in));
    if (csv) {
      fmt::print("{}\n{}\n", kCsvHeader, csv_row(fs::path(in).stem().string(), r));
    } else {
      print_table(in, r);
    }
    return kExitOk;
  }

  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(in)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") paths.push_back(entry.path());
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) throw Error(ErrorKind::IoError, in + ": no .json reports");
  std::vector<CalibrationReport> reports;
  for (const fs::path& p : paths) reports.push_back(load_report(p));

  // Each report is one sequence; the aggregate is the mean of sequence means.
  const auto init = mean_of(reports, [](const CalibrationReport& r) -> std::optional<double> {
    return r.mpjpe_init;
  });
  const auto refined = mean_of(reports, [](const CalibrationReport& r) -> std::optional<double> {
    return r.mpjpe_refined;
  });
  const auto gt = mean_of(reports, [](const CalibrationReport& r) { return r.mpjpe_gt; });
  const auto ms = mean_of(reports, [](const CalibrationReport& r) -> std::optional<double> {
    return r.timing.ms_per_frame;
  });

  if (csv) {
    fmt::print("{}\n", kCsvHeader);
    for (std::size_t k = 0; k < reports.size(); ++k) {
      fmt::print("{}\n", csv_row(paths[k].stem().string(), reports[k]));
    }
    fmt::print("mean,{:.17g},{:.17g},{},,,,,,{:.17g}\n", *init, *refined, optional_cell(gt), *ms);
  } else {
    fmt::print("{:<24} {:>14} {:>14} {:>14}\n", "sequence", "init px", "refined px", "gt px");
    for (std::size_t k = 0; k < reports.size(); ++k) {
      fmt::print("{:<24} {:>14.6f} {:>14.6f} {:>14}\n", paths[k].stem().string(),
                 reports[k].mpjpe_init, reports[k].mpjpe_refined,
                 reports[k].mpjpe_gt ? fmt::format("{:.6f}", *reports[k].mpjpe_gt) : "-");
    }
    fmt::print("{:<24} {:>14.6f} {:>14.6f} {:>14}\n", "mean of sequences", *init, *refined,
               gt ? fmt::format("{:.6f}", *gt) : "-");
    fmt::print("mean ms/frame {:.3f}\n", *ms);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MoCap-to-camera extrinsic calibration"};
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* calibrate_cmd = app.add_subcommand("calibrate", "Estimate the MoCap -> world transform");
  calibrate_cmd->add_option("--session", cal.session, "Session file ('-' for stdin)")->required();
  calibrate_cmd->add_option("--out", cal.out, "Report file ('-' for stdout)")->required();
  calibrate_cmd->add_option("--tau", cal.ransac.tau, "Inlier threshold in pixels")->capture_default_str();
  calibrate_cmd->add_option("--ransac-iters", cal.ransac.iterations, "RANSAC iterations")
      ->capture_default_str();
  calibrate_cmd->add_option("--coarse-stride", cal.ransac.coarse_stride, "RANSAC frame stride")
      ->capture_default_str();
  calibrate_cmd->add_option("--fine-stride", cal.refine.fine_stride, "Refinement frame stride")
      ->capture_default_str();
  calibrate_cmd->add_option("--steps", cal.refine.steps, "Refinement steps")->capture_default_str();
  calibrate_cmd->add_option("--lr-rot", cal.refine.lr_rotation, "Rotation learning rate")
      ->capture_default_str();
  calibrate_cmd->add_option("--lr-trans", cal.refine.lr_translation, "Translation learning rate")
      ->capture_default_str();
  calibrate_cmd->add_option("--inliers-only", cal.refine.inliers_only,
                            "Refine on the RANSAC inliers only")
      ->capture_default_str();
  calibrate_cmd->add_option("--seed", cal.ransac.seed, "RANSAC seed")->capture_default_str();

  std::string eval_session;
  std::vector<std::string> eval_extrinsic;
  auto* eval_cmd = app.add_subcommand("eval", "MPJPE of a given transform over a session");
  eval_cmd->add_option("--session", eval_session, "Session file ('-' for stdin)")->required();
  eval_cmd->add_option("--extrinsic", eval_extrinsic, "Report file or 12 numbers (R row-major, t)")
      ->required()
      ->allow_extra_args();

  SynthConfig syn;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic session with ground truth");
  synth_cmd->add_option("--out", synth_out, "Session file ('-' for stdout)")->required();
  synth_cmd->add_option("--cams", syn.n_cameras, "Cameras")->capture_default_str();
  synth_cmd->add_option("--joints", syn.n_joints, "Joints")->capture_default_str();
  synth_cmd->add_option("--frames", syn.n_frames, "Frames")->capture_default_str();
  synth_cmd->add_option("--sigma", syn.noise_sigma, "Gaussian pixel noise")->capture_default_str();
  synth_cmd->add_option("--outliers", syn.outlier_fraction, "Outlier fraction")->capture_default_str();
  synth_cmd->add_option("--invalid", syn.invalid_fraction, "Invalid fraction")->capture_default_str();
  synth_cmd->add_option("--seed", syn.seed, "Seed")->capture_default_str();

  std::string report_in;
  bool report_csv = false;
  auto* report_cmd = app.add_subcommand("report", "Render a report or a directory of reports");
  report_cmd->add_option("--in", report_in, "Report file or directory")->required();
  report_cmd->add_flag("--csv", report_csv, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*calibrate_cmd) return run_calibrate(cal);
    if (*eval_cmd) return run_eval(eval_session, eval_extrinsic);
    if (*synth_cmd) return run_synth(syn, synth_out);
    if (*report_cmd) return run_report(report_in, report_csv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::InsufficientConsensus ? kExitNoConsensus : kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
