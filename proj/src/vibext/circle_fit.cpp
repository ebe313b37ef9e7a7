#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mmvib/core/error.hpp"
#include "mmvib/vibext/vibext.hpp"

namespace mmvib::vibext {
namespace {

// Points shifted to their centroid and scaled to unit RMS radius, so the
// step tolerance is independent of the IQ units.
struct Normalized {
  std::vector<Eigen::Vector2d> p;
  Eigen::Vector2d offset;
  double scale = 1.0;
};

Normalized normalize(std::span<const cplx> points) {
  require(points.size() >= 3, ErrorKind::DegenerateFit, "circle fit needs at least 3 points");
  Normalized n;
  cplx mean = 0.0;
  for (const auto& z : points) {
    require(std::isfinite(z.real()) && std::isfinite(z.imag()), ErrorKind::Parameter, "circle fit points must be finite");
    mean += z;
  }
  mean /= static_cast<double>(points.size());
  double ms = 0.0;
  for (const auto& z : points) ms += std::norm(z - mean);
  n.scale = std::sqrt(ms / static_cast<double>(points.size()));
  require(n.scale > 0.0, ErrorKind::DegenerateFit, "circle fit points are all identical");
  n.offset = {mean.real(), mean.imag()};
  n.p.reserve(points.size());
  for (const auto& z : points) n.p.emplace_back((z.real() - mean.real()) / n.scale, (z.imag() - mean.imag()) / n.scale);

  // Collinear points have a rank-1 scatter matrix.
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& q : n.p) scatter += q * q.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);
  require(es.eigenvalues()(0) > 1e-12 * es.eigenvalues()(1), ErrorKind::DegenerateFit, "circle fit points are collinear");
  return n;
}

struct Params {
  Eigen::Vector2d c;
  double r = 0.0;
};

Params kasa_normalized(const Normalized& n) {
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const auto& q : n.p) {
    const Eigen::Vector3d row(q.x(), q.y(), 1.0);
    ata += row * row.transpose();
    atb -= row * q.squaredNorm();
  }
  const Eigen::Vector3d sol = ata.ldlt().solve(atb);
  Params p;
  p.c = {-sol(0) / 2.0, -sol(1) / 2.0};
  const double r2 = p.c.squaredNorm() - sol(2);
  require(std::isfinite(r2) && r2 > 0.0, ErrorKind::DegenerateFit, "algebraic circle fit has no real radius");
  p.r = std::sqrt(r2);
  return p;
}

double cost(const Normalized& n, const Params& p) {
  double s = 0.0;
  for (const auto& q : n.p) {
    const double e = (q - p.c).norm() - p.r;
    s += e * e;
  }
  return s;
}

CircleFit to_fit(const Normalized& n, const Params& p, std::span<const cplx> points, double radius) {
  CircleFit f;
  f.center = cplx(n.offset.x() + n.scale * p.c.x(), n.offset.y() + n.scale * p.c.y());
  f.radius = radius;
  f.residual = std::sqrt(circle_objective(points, f.center, f.radius) / static_cast<double>(points.size()));
  return f;
}

}  // namespace

double circle_objective(std::span<const cplx> points, cplx center, double radius) {
  double s = 0.0;
  for (const auto& z : points) {
    const double e = std::abs(z - center) - radius;
    s += e * e;
  }
  return s;
}

CircleFit kasa_fit(std::span<const cplx> points) {
  const auto n = normalize(points);
  const Params p = kasa_normalized(n);
  return to_fit(n, p, points, p.r * n.scale);
}

CircleFit fit_circle(std::span<const cplx> points, std::optional<RadiusConstraint> constraint, const FitOptions& options) {
  const auto n = normalize(points);
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  if (constraint) {
    require(constraint->r0 > 0.0 && constraint->gamma >= 0.0 && constraint->gamma < 1.0, ErrorKind::Parameter,
            "radius constraint needs r0 > 0 and 0 <= gamma < 1");
    lo = (1.0 - constraint->gamma) * constraint->r0 / n.scale;
    hi = (1.0 + constraint->gamma) * constraint->r0 / n.scale;
  }
  const bool fixed_radius = constraint && constraint->gamma == 0.0;

  Params p;
  if (options.initial_center) {
    p.c = {(options.initial_center->real() - n.offset.x()) / n.scale, (options.initial_center->imag() - n.offset.y()) / n.scale};
    p.r = constraint ? constraint->r0 / n.scale : kasa_normalized(n).r;
  } else {
    p = kasa_normalized(n);
  }
  p.r = std::clamp(p.r, lo, hi);
  double f = cost(n, p);
  double lambda = 1e-3;
  CircleFit out;

  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    Eigen::Matrix3d jtj = Eigen::Matrix3d::Zero();
    Eigen::Vector3d jte = Eigen::Vector3d::Zero();
    for (const auto& q : n.p) {
      const Eigen::Vector2d d = q - p.c;
      const double dist = d.norm();
      if (dist == 0.0) continue;
      const Eigen::Vector3d j(-d.x() / dist, -d.y() / dist, -1.0);
      const double e = dist - p.r;
      jtj += j * j.transpose();
      jte += j * e;
    }
    // Radius leaves the problem when it is pinned: fixed, or on a bound with
    // the descent direction pointing outward.
    const double grad_r = jte(2);
    const bool pin_r = fixed_radius || (p.r <= lo && grad_r > 0.0) || (p.r >= hi && grad_r < 0.0);
    const int dim = pin_r ? 2 : 3;

    bool accepted = false;
    double step_norm = 0.0;
    while (lambda < 1e20) {
      Eigen::Matrix3d a = jtj;
      for (int k = 0; k < 3; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      Eigen::Vector3d delta = Eigen::Vector3d::Zero();
      delta.head(dim) = a.topLeftCorner(dim, dim).ldlt().solve(-jte.head(dim));
      Params trial{p.c + delta.head<2>(), std::clamp(p.r + delta(2), lo, hi)};
      const double ft = cost(n, trial);
      if (ft < f) {
        step_norm = std::sqrt((trial.c - p.c).squaredNorm() + (trial.r - p.r) * (trial.r - p.r));
        p = trial;
        f = ft;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      step_norm = delta.norm();
      if (step_norm < options.step_tolerance) break;
      lambda *= 10.0;
    }
    if (!accepted || step_norm < options.step_tolerance) {
      out.converged = true;
      break;
    }
  }

  double radius = p.r * n.scale;
  if (constraint) {
    radius = fixed_radius ? constraint->r0
                          : std::clamp(radius, (1.0 - constraint->gamma) * constraint->r0, (1.0 + constraint->gamma) * constraint->r0);
  }
  const auto fit = to_fit(n, p, points, radius);
  out.center = fit.center;
  out.radius = fit.radius;
  out.residual = fit.residual;
  return out;
}

}  // namespace mmvib::vibext
