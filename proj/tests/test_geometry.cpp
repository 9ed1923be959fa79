#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "rfiqkd/geometry.hpp"

using namespace rfiqkd;
using namespace rfiqkd::geometry;

namespace {

Points ellipse_points(double ax, double by, int n, double x0 = 0.0, double y0 = 0.0, double rot = 0.0) {
  Points p;
  for (int i = 0; i < n; ++i) {
    const double th = 2.0 * std::numbers::pi * i / n;
    const double x = ax * std::cos(th), y = by * std::sin(th);
    p.emplace_back(x0 + std::cos(rot) * x - std::sin(rot) * y, y0 + std::sin(rot) * x + std::cos(rot) * y);
  }
  return p;
}

bool contains(const Points& set, const Point& q) {
  for (const auto& p : set)
    if (p == q) return true;
  return false;
}

}  // namespace

TEST(ConvexHull, SquareWithCentre) {
  Points p = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  EXPECT_EQ(convex_hull(p).size(), 4u);
}

TEST(ConvexHull, RegularDodecagon) {
  const auto p = ellipse_points(1, 1, 12);
  EXPECT_EQ(convex_hull(p).size(), 12u);
}

TEST(ConvexHull, CollinearAndDuplicatesDropped) {
  Points p = {{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 0}, {0, 0}};
  EXPECT_EQ(convex_hull(p).size(), 4u);
}

TEST(ConvexHull, CounterClockwise) {
  const auto h = convex_hull(ellipse_points(2, 1, 30, 0.3, -0.2, 0.4));
  double area = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& a = h[i];
    const auto& b = h[(i + 1) % h.size()];
    area += a.x() * b.y() - a.y() * b.x();
  }
  EXPECT_GT(area, 0.0);
}

TEST(ConvexHull, EllipsePlusInteriorNoise) {
  const auto ring = ellipse_points(2, 1, 100);
  Points all = ring;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  for (int i = 0; i < 500; ++i) all.emplace_back(u(rng), u(rng));
  const auto h = convex_hull(all);
  for (const auto& v : h) EXPECT_TRUE(contains(ring, v));
}

TEST(EllipseFit, ExactAxisAligned) {
  const auto p = ellipse_points(2, 3, 50);
  const auto e = fit_ellipse(p);
  const auto ax = e.semi_axes();
  EXPECT_NEAR(ax(0), 2.0, 1e-9);
  EXPECT_NEAR(ax(1), 3.0, 1e-9);
  EXPECT_LT(e.center.norm(), 1e-9);
  for (const auto& q : p) EXPECT_NEAR(e.form(q), 1.0, 1e-9);
}

TEST(EllipseFit, FivePointCircle) {
  const auto e = fit_ellipse(ellipse_points(1, 1, 5));
  EXPECT_NEAR(e.semi_axes()(0), 1.0, 1e-9);
  EXPECT_NEAR(e.semi_axes()(1), 1.0, 1e-9);
  EXPECT_LT(e.center.norm(), 1e-9);
}

TEST(EllipseFit, RotatedOffsetSmallScale) {
  // Scale of reduced frequency data.
  const auto p = ellipse_points(0.09, 0.03, 40, 0.01, -0.02, 0.7);
  const auto e = fit_ellipse(p);
  EXPECT_NEAR(e.semi_axes()(0), 0.03, 1e-10);
  EXPECT_NEAR(e.semi_axes()(1), 0.09, 1e-10);
  EXPECT_NEAR(e.center.x(), 0.01, 1e-10);
  EXPECT_NEAR(e.center.y(), -0.02, 1e-10);
}

TEST(EllipseFit, TooFewPoints) {
  try {
    (void)fit_conic(ellipse_points(1, 1, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateHull);
  }
}

TEST(EllipseFit, HyperbolaRejected) {
  Conic c;
  c.coeffs << 1, 0, -1, 0, 0, -1;
  try {
    (void)to_ellipse(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotAnEllipse);
  }
}

TEST(EllipseFit, ImaginaryRejected) {
  Conic c;
  c.coeffs << 1, 0, 1, 0, 0, 1;
  try {
    (void)to_ellipse(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotAnEllipse);
  }
}

TEST(Coverage, FullAndHalf) {
  const auto full = ellipse_points(1, 1, 36);
  EXPECT_NEAR(angular_coverage_deg(full, Point::Zero()), 350.0, 1e-9);
  Points half;
  for (const auto& p : full)
    if (p.y() >= -1e-12) half.push_back(p);
  EXPECT_NEAR(angular_coverage_deg(half, Point::Zero()), 180.0, 1e-9);
}
