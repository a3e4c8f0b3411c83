#include "mocalib/p3p.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include <Eigen/Dense>

#include "mocalib/error.h"

namespace mocalib {

namespace {

constexpr double kImaginaryTolerance = 1e-8;
constexpr double kBearingNormTolerance = 1e-12;
constexpr double kDuplicateTolerance = 1e-10;
constexpr int kRootPolishSteps = 2;
constexpr int kDepthPolishSteps = 8;

// Coefficients in ascending order: c[0] + c[1] x + ...
using Poly = std::vector<double>;

Poly poly_mul(const Poly& a, const Poly& b) {
  Poly r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

Poly poly_add(Poly a, const Poly& b, double scale = 1.0) {
  if (a.size() < b.size()) a.resize(b.size(), 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) a[i] += scale * b[i];
  return a;
}

std::pair<double, double> poly_eval(const Poly& p, double x) {
  double value = 0.0, derivative = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) {
    derivative = derivative * x + value;
    value = value * x + p[i];
  }
  return {value, derivative};
}

// Real roots via companion-matrix eigenvalues, each polished by Newton.
std::vector<double> real_roots(Poly p) {
  const double scale = std::accumulate(p.begin(), p.end(), 0.0,
                                       [](double m, double c) { return std::max(m, std::abs(c)); });
  std::vector<double> roots;
  if (scale == 0.0) return roots;
  for (double& c : p) c /= scale;
  while (p.size() > 1 && std::abs(p.back()) < 1e-14) p.pop_back();
  const int degree = static_cast<int>(p.size()) - 1;
  if (degree < 1) return roots;

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
  for (int i = 0; i < degree; ++i) companion(0, i) = -p[degree - 1 - i] / p[degree];
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
  const Eigen::VectorXcd eig = solver.eigenvalues();

  for (int i = 0; i < eig.size(); ++i) {
    if (std::abs(eig[i].imag()) > kImaginaryTolerance * std::max(1.0, std::abs(eig[i].real()))) {
      continue;
    }
    double x = eig[i].real();
    for (int s = 0; s < kRootPolishSteps; ++s) {
      const auto [f, df] = poly_eval(p, x);
      if (df == 0.0) break;
      const double next = x - f / df;
      if (std::abs(poly_eval(p, next).first) > std::abs(f)) break;
      x = next;
    }
    roots.push_back(x);
  }
  return roots;
}

struct TriangleGeometry {
  double a2, b2, c2;                 // squared side lengths |P2P3|, |P1P3|, |P1P2|
  double cos_a, cos_b, cos_g;        // bearing angles b2.b3, b1.b3, b1.b2
};

// Newton on the three law-of-cosines equations in the depths.
Vec3 polish_depths(const TriangleGeometry& g, Vec3 s) {
  auto residual = [&](const Vec3& d) {
    return Vec3(d[0] * d[0] + d[1] * d[1] - 2.0 * d[0] * d[1] * g.cos_g - g.c2,
                d[0] * d[0] + d[2] * d[2] - 2.0 * d[0] * d[2] * g.cos_b - g.b2,
                d[1] * d[1] + d[2] * d[2] - 2.0 * d[1] * d[2] * g.cos_a - g.a2);
  };
  Vec3 F = residual(s);
  for (int it = 0; it < kDepthPolishSteps; ++it) {
    Mat3 J;
    J << 2.0 * (s[0] - s[1] * g.cos_g), 2.0 * (s[1] - s[0] * g.cos_g), 0.0,
        2.0 * (s[0] - s[2] * g.cos_b), 0.0, 2.0 * (s[2] - s[0] * g.cos_b),
        0.0, 2.0 * (s[1] - s[2] * g.cos_a), 2.0 * (s[2] - s[1] * g.cos_a);
    const Vec3 step = J.partialPivLu().solve(F);
    if (!step.allFinite()) break;
    const Vec3 next = s - step;
    const Vec3 F_next = residual(next);
    if (F_next.norm() >= F.norm()) break;
    s = next;
    F = F_next;
  }
  return s;
}

// Right-handed orthonormal frame attached to a triangle (columns).
Mat3 triangle_frame(const Vec3& p1, const Vec3& p2, const Vec3& p3) {
  const Vec3 e1 = (p2 - p1).normalized();
  const Vec3 e3 = (p2 - p1).cross(p3 - p1).normalized();
  Mat3 F;
  F.col(0) = e1;
  F.col(1) = e3.cross(e1);
  F.col(2) = e3;
  return F;
}

bool reprojects(const MinimalProblem& problem, const Mat3& R, const Vec3& t,
                bool enforce_cheirality) {
  for (int k = 0; k < 3; ++k) {
    const Vec3 X = R * problem.world_points[k] + t;
    const Vec3& b = problem.bearings[k];
    if (enforce_cheirality && !(X.z() > 0.0)) return false;
    double err;
    if (b.z() > 1e-6 && std::abs(X.z()) > 1e-12) {
      err = (X.head<2>() / X.z() - b.head<2>() / b.z()).norm();
    } else {
      err = X.normalized().cross(b).norm();
    }
    if (!(err < kP3PReprojectionTolerance)) return false;
  }
  return true;
}

}  // namespace

bool is_degenerate(const MinimalProblem& problem) {
  const auto& P = problem.world_points;
  for (int i = 0; i < 3; ++i) {
    if ((P[i] - P[(i + 1) % 3]).norm() <= kMinPointSeparation) return true;
  }
  return 0.5 * (P[1] - P[0]).cross(P[2] - P[0]).norm() < kMinTriangleArea;
}

P3PSolutionSet solve_p3p(const MinimalProblem& problem, const P3POptions& options) {
  const auto& P = problem.world_points;
  const auto& B = problem.bearings;
  for (int k = 0; k < 3; ++k) {
    if (!P[k].allFinite() || !B[k].allFinite()) {
      throw Error(ErrorKind::InvalidArgument, "minimal problem is not finite");
    }
    if (std::abs(B[k].norm() - 1.0) > kBearingNormTolerance) {
      throw Error(ErrorKind::InvalidArgument, "bearing is not unit length");
    }
    if ((P[k] - P[(k + 1) % 3]).norm() <= kMinPointSeparation) {
      throw Error(ErrorKind::InvalidArgument, "world points are not distinct");
    }
  }
  if (is_degenerate(problem)) {
    throw Error(ErrorKind::DegenerateConfiguration, "world points are collinear");
  }

  TriangleGeometry g;
  g.a2 = (P[1] - P[2]).squaredNorm();
  g.b2 = (P[0] - P[2]).squaredNorm();
  g.c2 = (P[0] - P[1]).squaredNorm();
  g.cos_a = B[1].dot(B[2]);
  g.cos_b = B[0].dot(B[2]);
  g.cos_g = B[0].dot(B[1]);

  // With u = s2/s1, v = s3/s1 and q(v) = 1 + v^2 - 2 v cos_b:
  //   u^2 - 2 u cos_g + 1 - (c2/b2) q(v) = 0
  //   u^2 + v^2 - 2 u v cos_a - (a2/b2) q(v) = 0
  // Their difference is linear in u, u = N(v) / D(v); substituting back
  // gives the quartic N^2 - 2 cos_g N D + (1 - (c2/b2) q) D^2 = 0.
  const double ra = g.a2 / g.b2;
  const double rc = g.c2 / g.b2;
  const Poly q = {1.0, -2.0 * g.cos_b, 1.0};
  const Poly N = poly_add({1.0, 0.0, -1.0}, q, -(rc - ra));
  const Poly D = {2.0 * g.cos_g, -2.0 * g.cos_a};
  Poly quartic = poly_mul(N, N);
  quartic = poly_add(quartic, poly_mul(N, D), -2.0 * g.cos_g);
  quartic = poly_add(quartic, poly_mul(poly_add({1.0}, q, -rc), poly_mul(D, D)));

  P3PSolutionSet result;
  const Mat3 world_frame = triangle_frame(P[0], P[1], P[2]);
  const Vec3 world_centroid = (P[0] + P[1] + P[2]) / 3.0;

  for (const double v : real_roots(quartic)) {
    const double qv = 1.0 + v * v - 2.0 * v * g.cos_b;
    if (!(qv > 0.0)) continue;
    const double s1 = std::sqrt(g.b2 / qv);

    // u candidates: the linear formula, or both quadratic roots when D(v)
    // is near zero and the formula is ill-conditioned.
    std::vector<double> u_candidates;
    const double Nv = poly_eval(N, v).first;
    const double Dv = poly_eval(D, v).first;
    if (std::abs(Dv) > 1e-6) {
      u_candidates.push_back(Nv / Dv);
    } else {
      const double disc = g.cos_g * g.cos_g - 1.0 + rc * qv;
      if (disc < 0.0) continue;
      u_candidates.push_back(g.cos_g + std::sqrt(disc));
      u_candidates.push_back(g.cos_g - std::sqrt(disc));
    }

    for (const double u : u_candidates) {
      const Vec3 depths = polish_depths(g, Vec3(s1, u * s1, v * s1));
      if (options.enforce_cheirality && !(depths.minCoeff() > 0.0)) continue;
      const std::array<Vec3, 3> X = {depths[0] * B[0], depths[1] * B[1], depths[2] * B[2]};
      const Vec3 cross = (X[1] - X[0]).cross(X[2] - X[0]);
      if (!(cross.norm() > 0.0)) continue;
      const Mat3 R = triangle_frame(X[0], X[1], X[2]) * world_frame.transpose();
      const Vec3 t = (X[0] + X[1] + X[2]) / 3.0 - R * world_centroid;
      if (!reprojects(problem, R, t, options.enforce_cheirality)) continue;

      const bool duplicate = std::any_of(
          result.solutions.begin(), result.solutions.end(), [&](const RigidTransform& s) {
            return (s.rotation() - R).norm() < kDuplicateTolerance &&
                   (s.translation() - t).norm() < kDuplicateTolerance;
          });
      if (!duplicate && result.solutions.size() < 4) result.solutions.emplace_back(R, t);
    }
  }
  return result;
}

RigidTransform recover_mocap_pose(const RigidTransform& cam_from_mocap,
                                  const CameraModel& cam) {
  const Mat3 Rc_t = cam.rot_wc().transpose();
  return RigidTransform(Rc_t * cam_from_mocap.rotation(),
                        Rc_t * (cam_from_mocap.translation() - cam.trans_wc()));
}

}  // namespace mocalib
