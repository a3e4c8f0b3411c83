#include "mocalib/ransac.h"

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>

#include <Eigen/Geometry>

#include "mocalib/error.h"
#include "mocalib/p3p.h"
#include "mocalib/parallel.h"
#include "mocalib/random.h"

namespace mocalib {

namespace {

constexpr int kIterationsPerTask = 16;
constexpr double kMinDepth = 1e-12;

// Per-camera composite MoCap -> camera transforms for one hypothesis.
std::vector<RigidTransform> camera_from_mocap(const CorrespondenceSet& set,
                                              const RigidTransform& transform) {
  std::vector<RigidTransform> out;
  out.reserve(set.cameras().size());
  for (const CameraModel& cam : set.cameras()) out.push_back(cam.world_to_camera() * transform);
  return out;
}

std::vector<std::size_t> scored_entries(const CorrespondenceSet& set, int stride) {
  std::vector<std::size_t> ids;
  const auto& entries = set.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].valid && entries[k].frame_index % stride == 0) ids.push_back(k);
  }
  return ids;
}

// Returns (inlier count, mean inlier residual); optionally collects ids.
std::pair<std::size_t, double> score(const CorrespondenceSet& set,
                                     const std::vector<std::size_t>& ids,
                                     const RigidTransform& transform, double tau,
                                     std::vector<std::size_t>* inliers) {
  const auto composite = camera_from_mocap(set, transform);
  const auto& entries = set.entries();
  const auto& cameras = set.cameras();
  std::size_t count = 0;
  double sum = 0.0;
  for (const std::size_t id : ids) {
    const Correspondence& c = entries[id];
    const Vec3 X = composite[c.cam_index].apply(c.point3d);
    if (!(X.z() > kMinDepth)) continue;
    const Vec2 pixel = cameras[c.cam_index].normalized_to_pixel(X.head<2>() / X.z());
    const double norm = (pixel - c.point2d).norm();
    if (norm < tau) {
      ++count;
      sum += norm;
      if (inliers) inliers->push_back(id);
    }
  }
  return {count, count ? sum / count : 0.0};
}

struct SamplePool {
  int cam_index;
  std::vector<std::size_t> ids;  // valid entries of one (camera, frame)
};

std::vector<SamplePool> sample_pools(const CorrespondenceSet& set) {
  std::map<std::pair<int, int>, std::vector<std::size_t>> by_view;
  const auto& entries = set.entries();
  for (std::size_t k = 0; k < entries.size(); ++k) {
    if (entries[k].valid) by_view[{entries[k].cam_index, entries[k].frame_index}].push_back(k);
  }
  std::vector<SamplePool> pools;
  for (auto& [key, ids] : by_view) {
    if (ids.size() >= 3) pools.push_back({key.first, std::move(ids)});
  }
  return pools;
}

// Three distinct positions in [0, m), uniform without replacement.
std::array<std::size_t, 3> draw_three(Rng& rng, std::size_t m) {
  const std::size_t a = rng.index(m);
  std::size_t b = rng.index(m - 1);
  if (b >= a) ++b;
  std::size_t c = rng.index(m - 2);
  const std::size_t lo = std::min(a, b), hi = std::max(a, b);
  if (c >= lo) ++c;
  if (c >= hi) ++c;
  return {a, b, c};
}

}  // namespace

void RansacConfig::validate() const {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
  if (iterations < 1) throw Error(ErrorKind::InvalidArgument, "iterations must be >= 1");
  if (coarse_stride < 1) throw Error(ErrorKind::InvalidArgument, "coarse_stride must be >= 1");
  if (!(min_inlier_ratio >= 0.0 && min_inlier_ratio <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "min_inlier_ratio must be in [0, 1]");
  }
}

bool better_hypothesis(const Hypothesis& a, const Hypothesis& b) {
  if (a.inlier_count != b.inlier_count) return a.inlier_count > b.inlier_count;
  if (a.mean_inlier_residual != b.mean_inlier_residual) {
    return a.mean_inlier_residual < b.mean_inlier_residual;
  }
  return std::pair(a.iteration, a.solution) < std::pair(b.iteration, b.solution);
}

Residual residual(const Correspondence& corr, const CameraModel& cam,
                  const RigidTransform& transform) {
  const Projection p = project(cam, transform, corr.point3d);
  return {p.pixel - corr.point2d, p.depth};
}

InlierSet count_inliers(const CorrespondenceSet& set, const RigidTransform& transform,
                        double tau, int stride) {
  if (!(tau > 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be positive");
  if (stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
  const auto ids = scored_entries(set, stride);
  InlierSet out;
  out.scored = ids.size();
  out.mean_residual = score(set, ids, transform, tau, &out.ids).second;
  return out;
}

Hypothesis run_ransac(const CorrespondenceSet& set, const RansacConfig& cfg) {
  cfg.validate();
  const auto pools = sample_pools(set);
  if (pools.empty()) {
    throw Error(ErrorKind::NoValidSample,
                "no (camera, frame) pair has three valid correspondences");
  }
  const auto ids = scored_entries(set, cfg.coarse_stride);
  const auto& entries = set.entries();
  const P3POptions p3p_options{.enforce_cheirality = cfg.minimal_cheirality};

  const std::size_t n_tasks =
      (static_cast<std::size_t>(cfg.iterations) + kIterationsPerTask - 1) / kIterationsPerTask;
  std::vector<std::optional<Hypothesis>> task_best(n_tasks);

  parallel_for(n_tasks, [&](std::size_t task) {
    const int first = static_cast<int>(task) * kIterationsPerTask;
    const int last = std::min(cfg.iterations, first + kIterationsPerTask);
    std::optional<Hypothesis>& best = task_best[task];
    for (int k = first; k < last; ++k) {
      Rng rng(cfg.seed, static_cast<std::uint64_t>(k));
      const SamplePool& pool = pools[rng.index(pools.size())];
      const auto picks = draw_three(rng, pool.ids.size());
      const CameraModel& cam = set.cameras()[pool.cam_index];

      MinimalProblem problem;
      for (int s = 0; s < 3; ++s) {
        const Correspondence& c = entries[pool.ids[picks[s]]];
        problem.world_points[s] = c.point3d;
        problem.bearings[s] = cam.pixel_to_normalized(c.point2d).homogeneous().normalized();
      }
      if (is_degenerate(problem)) continue;

      const P3PSolutionSet solutions = solve_p3p(problem, p3p_options);
      for (std::size_t l = 0; l < solutions.solutions.size(); ++l) {
        Hypothesis h;
        h.transform = recover_mocap_pose(solutions.solutions[l], cam);
        std::tie(h.inlier_count, h.mean_inlier_residual) =
            score(set, ids, h.transform, cfg.tau, nullptr);
        h.scored_count = ids.size();
        h.iteration = k;
        h.solution = static_cast<int>(l);
        if (!best || better_hypothesis(h, *best)) best = h;
      }
    }
  });

  std::optional<Hypothesis> best;
  for (const auto& candidate : task_best) {
    if (candidate && (!best || better_hypothesis(*candidate, *best))) best = candidate;
  }
  if (!best) {
    throw Error(ErrorKind::InsufficientConsensus, "every minimal sample was degenerate");
  }
  if (best->inlier_ratio() < cfg.min_inlier_ratio) {
    throw Error(ErrorKind::InsufficientConsensus,
                "best inlier ratio " + std::to_string(best->inlier_ratio()) +
                    " is below " + std::to_string(cfg.min_inlier_ratio));
  }
  return *best;
}

}  // namespace mocalib
