#pragma once

// Planar convex hull and direct least-squares ellipse fitting.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "rfiqkd/error.hpp"

namespace rfiqkd::geometry {

using Point = Eigen::Vector2d;
using Points = std::vector<Point, Eigen::aligned_allocator<Point>>;

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

/// Andrew's monotone chain. Counterclockwise, starting from the lowest-x
/// (then lowest-y) point; collinear and duplicate points are dropped.
inline Points convex_hull(Points pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a == b; }), pts.end());
  if (pts.size() < 3) return pts;

  Points hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Conic a x^2 + b xy + c y^2 + d x + e y + f = 0.
struct Conic {
  Eigen::Matrix<double, 6, 1> coeffs = Eigen::Matrix<double, 6, 1>::Zero();

  double operator()(const Point& p) const {
    const double x = p.x(), y = p.y();
    return coeffs(0) * x * x + coeffs(1) * x * y + coeffs(2) * y * y + coeffs(3) * x + coeffs(4) * y + coeffs(5);
  }
  double discriminant() const { return 4.0 * coeffs(0) * coeffs(2) - coeffs(1) * coeffs(1); }
};

/// Ellipse in centre form (v - w)^T A (v - w) = 1 with A positive definite.
struct Ellipse {
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  double form(const Point& p) const { return (p - center).dot(a * (p - center)); }

  /// Semi-axes, ascending.
  Eigen::Vector2d semi_axes() const {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
    return es.eigenvalues().cwiseInverse().cwiseSqrt().reverse();
  }

  Point at(double theta) const {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(a);
    const Eigen::Vector2d r = es.eigenvalues().cwiseInverse().cwiseSqrt();
    return center + es.eigenvectors() * Eigen::Vector2d(r(0) * std::cos(theta), r(1) * std::sin(theta));
  }
};

/// Conic -> centre form. w = -A^{-1}(d,e)/2 and C = w^T A w - f; dividing by C
/// gives the unit form. Anything that is not a real ellipse is rejected.
inline Ellipse to_ellipse(const Conic& conic) {
  const auto& k = conic.coeffs;
  if (!(conic.discriminant() > 0.0)) fail(ErrorCode::NotAnEllipse, "conic is not elliptic");
  Eigen::Matrix2d a;
  a << k(0), 0.5 * k(1), 0.5 * k(1), k(2);
  const Eigen::Vector2d w = -0.5 * a.inverse() * Eigen::Vector2d(k(3), k(4));
  const double c = w.dot(a * w) - k(5);
  Ellipse e;
  e.a = a / c;
  e.center = w;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(e.a, Eigen::EigenvaluesOnly);
  if (!std::isfinite(c) || !(es.eigenvalues().minCoeff() > 0.0))
    fail(ErrorCode::NotAnEllipse, "conic describes an imaginary ellipse");
  return e;
}

/// Halir-Flusser numerically stable variant of Fitzgibbon's direct
/// ellipse-specific least squares. Points are centred and scaled first.
inline Conic fit_conic(const Points& pts) {
  if (pts.size() < 5) fail(ErrorCode::DegenerateHull, "ellipse fit needs at least 5 points");
  const auto n = static_cast<Eigen::Index>(pts.size());

  Point mean = Point::Zero();
  for (const auto& p : pts) mean += p;
  mean /= double(n);
  double scale = 0.0;
  for (const auto& p : pts) scale += (p - mean).squaredNorm();
  scale = std::sqrt(scale / double(n));
  if (!(scale > 0.0)) fail(ErrorCode::NotAnEllipse, "all points coincide");

  Eigen::MatrixXd d1(n, 3), d2(n, 3);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point u = (pts[std::size_t(i)] - mean) / scale;
    d1.row(i) << u.x() * u.x(), u.x() * u.y(), u.y() * u.y();
    d2.row(i) << u.x(), u.y(), 1.0;
  }
  const Eigen::Matrix3d s1 = d1.transpose() * d1;
  const Eigen::Matrix3d s2 = d1.transpose() * d2;
  const Eigen::Matrix3d s3 = d2.transpose() * d2;
  const Eigen::Matrix3d t = -s3.fullPivLu().solve(s2.transpose());
  const Eigen::Matrix3d m = s1 + s2 * t;
  Eigen::Matrix3d mc;  // C1^{-1} M
  mc.row(0) = m.row(2) / 2.0;
  mc.row(1) = -m.row(1);
  mc.row(2) = m.row(0) / 2.0;

  Eigen::EigenSolver<Eigen::Matrix3d> es(mc);
  double best_res = std::numeric_limits<double>::infinity();
  Eigen::Matrix<double, 6, 1> best;
  bool found = false;
  for (int j = 0; j < 3; ++j) {
    const Eigen::Vector3d a1 = es.eigenvectors().col(j).real();
    if (!(4.0 * a1(0) * a1(2) - a1(1) * a1(1) > 0.0)) continue;
    Eigen::Matrix<double, 6, 1> v;
    v << a1, t * a1;
    v.normalize();
    const double res = (d1 * v.head<3>() + d2 * v.tail<3>()).squaredNorm();
    if (res < best_res) {
      best_res = res;
      best = v;
      found = true;
    }
  }
  if (!found) fail(ErrorCode::NotAnEllipse, "no elliptic solution of the constrained fit");

  // Undo the normalisation: u = (x - mean)/scale.
  const double a = best(0), b = best(1), c = best(2), d = best(3), e = best(4), f = best(5);
  const double mx = mean.x(), my = mean.y(), s = scale;
  Conic out;
  out.coeffs(0) = a / (s * s);
  out.coeffs(1) = b / (s * s);
  out.coeffs(2) = c / (s * s);
  out.coeffs(3) = (-2 * a * mx - b * my) / (s * s) + d / s;
  out.coeffs(4) = (-2 * c * my - b * mx) / (s * s) + e / s;
  out.coeffs(5) = (a * mx * mx + b * mx * my + c * my * my) / (s * s) - (d * mx + e * my) / s + f;
  return out;
}

inline Ellipse fit_ellipse(const Points& pts) { return to_ellipse(fit_conic(pts)); }

/// Largest-gap complement: angular span (degrees) of the points as seen from `center`.
inline double angular_coverage_deg(const Points& pts, const Point& center) {
  if (pts.empty()) return 0.0;
  std::vector<double> ang;
  ang.reserve(pts.size());
  for (const auto& p : pts) ang.push_back(std::atan2(p.y() - center.y(), p.x() - center.x()));
  std::sort(ang.begin(), ang.end());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double gap = ang.front() + two_pi - ang.back();
  for (std::size_t i = 1; i < ang.size(); ++i) gap = std::max(gap, ang[i] - ang[i - 1]);
  return (two_pi - gap) * 180.0 / std::numbers::pi;
}

}  // namespace rfiqkd::geometry
