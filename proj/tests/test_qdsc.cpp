#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "golden.hpp"
#include "rfiqkd/qdsc.hpp"
#include "support.hpp"

using namespace rfiqkd;
using namespace rfiqkd::qdsc;
using quantum::Channel;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::DomainError;
}

sim::WindowCounts central_counts(std::int64_t id, std::array<std::uint64_t, 4> c) {
  sim::WindowCounts w;
  w.window_id = id;
  for (Channel ch : quantum::kChannels) w.at(ch, sim::Peak::Central) = c[quantum::index(ch)];
  return w;
}

}  // namespace

TEST(Frequencies, ExactDivision) {
  const auto fm = normalize_frequencies({central_counts(0, {500, 0, 250, 250})}, 10);
  EXPECT_DOUBLE_EQ(fm.p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(fm.p(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(fm.p(2, 0), 0.25);
  EXPECT_DOUBLE_EQ(fm.p(3, 0), 0.25);
}

TEST(Frequencies, LowCountWindowSkipped) {
  const auto fm = normalize_frequencies({central_counts(0, {10, 10, 10, 10}), central_counts(1, {500, 500, 500, 500})});
  EXPECT_EQ(fm.size(), 1);
  ASSERT_EQ(fm.skipped.size(), 1u);
  EXPECT_EQ(fm.skipped[0], 0);
  EXPECT_EQ(fm.warnings.size(), 1u);
}

TEST(Frequencies, AllSkipped) {
  EXPECT_EQ(code_of([] { (void)normalize_frequencies({central_counts(0, {10, 10, 10, 10})}); }), ErrorCode::EmptyInput);
}

TEST(Reduce, IdenticalColumns) {
  Eigen::Matrix4Xd p(4, 20);
  p.colwise() = Eigen::Vector4d(0.4, 0.1, 0.3, 0.2);
  EXPECT_EQ(code_of([&] { (void)center_and_reduce(frequency_matrix(p)); }), ErrorCode::InsufficientPhaseCoverage);
}

TEST(Reduce, IdealCircle) {
  const auto rd = center_and_reduce(frequency_matrix(testkit::born_matrix(quantum::ideal_povm(), 72)));
  EXPECT_NEAR(rd.singular_values(0), rd.singular_values(1), 1e-12);
  EXPECT_LT(rd.singular_values(2), 1e-12);
  EXPECT_LT(rd.third_row_max, 1e-12);
}

TEST(Reduce, PresetThirdRowNearZero) {
  sim::DriftProcess d;
  d.kind = sim::DriftProcess::Kind::UniformGrid;
  sim::Acquisition acq;
  acq.mean_detections = 960000;
  const auto run = sim::simulate_run(sim::DeviceModel::paper_fig4(), d, 200, acq, 8);
  const auto rd = center_and_reduce(normalize_frequencies(run.windows));
  EXPECT_FALSE(rd.third_row_flag);
  EXPECT_LT(rd.third_row_max, rd.noise_scale);
}

TEST(Boundary, TooFewVertices) {
  geometry::Points sq = {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  EXPECT_EQ(code_of([&] { (void)convex_hull_boundary(sq); }), ErrorCode::DegenerateHull);
}

TEST(Fit, NegatedFormMatchesEllipse) {
  const auto rd = center_and_reduce(frequency_matrix(testkit::born_matrix(sim::ground_truth_povms(sim::DeviceModel::paper_fig4()), 72)));
  const auto fit = fit_ellipse(convex_hull_boundary(rd));
  const Eigen::Matrix3d neg = fit.negated_form();
  EXPECT_LT((neg.topLeftCorner<2, 2>() + fit.ellipse.a).norm(), 1e-12);
  EXPECT_LT((neg * fit.q3 + Eigen::Vector3d(1, 1, 0).asDiagonal().toDenseMatrix()).norm(), 1e-9);
  EXPECT_LT(fit.residual_rms, 1e-9);
}

// The published 3x3 block and 4x4 matrix are related by the back-map: with
// any orthonormal U whose span carries the ellipse, Q4 = -pinv(U Q3 U^+).
TEST(BackMap, ReferenceSpectrumAndMatrix) {
  const Eigen::Matrix3d q3 = golden::q3();
  const Eigen::Matrix2d inv = (-q3.topLeftCorner<2, 2>()).inverse();
  const quantum::ResponseRange printed = golden::response_range();

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es4(printed.q);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es2(inv);
  EXPECT_NEAR(es4.eigenvalues()(3), es2.eigenvalues()(1), 1e-4);
  EXPECT_NEAR(es4.eigenvalues()(2), es2.eigenvalues()(0), 1e-4);

  // U maps the fit plane onto the two leading eigenvectors of the printed Q4.
  Eigen::Matrix<double, 4, 2> v;
  v.col(0) = es4.eigenvectors().col(3);
  v.col(1) = es4.eigenvectors().col(2);
  Eigen::Matrix2d w;
  w.col(0) = es2.eigenvectors().col(1);
  w.col(1) = es2.eigenvectors().col(0);
  ReducedData rd;
  rd.u.leftCols<2>() = v * w.transpose();
  rd.u.col(2) = es4.eigenvectors().col(1);
  rd.mean_p = printed.t;

  EllipseFit fit;
  fit.q3.topLeftCorner<2, 2>() = inv;
  const auto rr = to_response_range(fit, rd);
  EXPECT_LT((rr.q - printed.q).cwiseAbs().maxCoeff(), 5e-3);
  EXPECT_LT((rr.t - printed.t).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(BackMap, DegenerateEllipse) {
  EllipseFit fit;
  ReducedData rd;
  rd.u.setIdentity();
  rd.mean_p.setConstant(0.25);
  EXPECT_EQ(code_of([&] { (void)to_response_range(fit, rd); }), ErrorCode::InconsistentFit);
}

TEST(BackMap, PositivityViolation) {
  // Response wider than any POVM with these offsets allows.
  ReducedData rd;
  rd.u.setZero();
  rd.u(0, 0) = std::sqrt(0.5);
  rd.u(1, 0) = -std::sqrt(0.5);
  rd.u(2, 1) = std::sqrt(0.5);
  rd.u(3, 1) = -std::sqrt(0.5);
  rd.u(0, 2) = 0.5;
  rd.u(1, 2) = 0.5;
  rd.u(2, 2) = -0.5;
  rd.u(3, 2) = -0.5;
  rd.mean_p.setConstant(0.25);
  EllipseFit fit;
  fit.q3.topLeftCorner<2, 2>() = Eigen::Matrix2d::Identity() * 0.5;
  EXPECT_EQ(code_of([&] { (void)to_response_range(fit, rd); }), ErrorCode::InconsistentFit);
  EXPECT_NO_THROW((void)to_response_range(fit, rd, std::numeric_limits<double>::infinity()));
}

TEST(SolvePovms, IdealRoundTrip) {
  const auto p = solve_povms(quantum::qt_from_povm(quantum::ideal_povm()));
  const auto f = quantum::fidelities(quantum::ideal_povm(), p);
  for (double x : f) EXPECT_NEAR(x, 1.0, 1e-6);
}

TEST(SolvePovms, RankThreeRejected) {
  auto rr = quantum::qt_from_povm(quantum::ideal_povm());
  rr.q += 0.01 * Eigen::Vector4d(1, 1, -1, -1).normalized() * Eigen::Vector4d(1, 1, -1, -1).normalized().transpose();
  EXPECT_EQ(code_of([&] { (void)solve_povms(rr); }), ErrorCode::GramInconsistent);
}

TEST(SolvePovms, GaugeConvention) {
  const auto p = solve_povms(golden::response_range());
  const auto d = quantum::pauli_decompose(p[Channel::D]);
  const auto l = quantum::pauli_decompose(p[Channel::L]);
  EXPECT_NEAR(d.m.y(), 0.0, 1e-12);
  EXPECT_GT(d.m.x(), 0.0);
  EXPECT_GT(l.m.y(), 0.0);
  for (Channel c : quantum::kChannels) EXPECT_NEAR(quantum::pauli_decompose(p[c]).m.z(), 0.0, 1e-12);
}

TEST(RunQdsc, IdealClosedLoop) {
  const auto res = run_qdsc(frequency_matrix(testkit::born_matrix(quantum::ideal_povm(), 72)));
  const auto f = quantum::fidelities(quantum::ideal_povm(), res.povm);
  for (double x : f) EXPECT_GE(x, 1.0 - 1e-6);
  EXPECT_EQ(res.diagnostics.hull_size, 72u);
  EXPECT_LT(res.diagnostics.fit_residual_rms, 1e-9);
}

TEST(RunQdsc, IdealSimulatedRun) {
  sim::DriftProcess d;
  sim::Acquisition acq;
  acq.mean_detections = 960000;
  const auto run = sim::simulate_run(sim::DeviceModel::ideal(), d, 600, acq, 21);
  const auto res = run_qdsc(run.windows);
  const auto f = quantum::fidelities(quantum::gauge_align(run.truth), res.povm);
  for (double x : f) EXPECT_GE(x, 0.999);
}

TEST(RunQdsc, FewWindows) {
  sim::DriftProcess d;
  d.kind = sim::DriftProcess::Kind::UniformGrid;
  sim::Acquisition acq;
  acq.mean_detections = 100000;
  const auto run = sim::simulate_run(sim::DeviceModel::ideal(), d, 10, acq, 2);
  const auto res = run_qdsc(run.windows);
  EXPECT_GE(res.diagnostics.hull_size, 5u);
  const auto few = sim::simulate_run(sim::DeviceModel::ideal(), d, 5, acq, 2);
  const ErrorCode c = code_of([&] { (void)run_qdsc(few.windows); });
  EXPECT_TRUE(c == ErrorCode::InsufficientPhaseCoverage || c == ErrorCode::DegenerateHull);
}

TEST(RunQdsc, PartialCoverageRejected) {
  Eigen::Matrix4Xd p = testkit::born_matrix(quantum::ideal_povm(), 72);
  Eigen::Matrix4Xd half = p.leftCols(24);  // 120 degrees of phase
  EXPECT_EQ(code_of([&] { (void)run_qdsc(frequency_matrix(half)); }), ErrorCode::CoverageTooLow);
}

TEST(RunQdsc, PresetInTableBand) {
  sim::DriftProcess d;
  sim::Acquisition acq;
  acq.mean_detections = 960000;
  const auto run = sim::simulate_run(sim::DeviceModel::paper_fig4(), d, 1800, acq, 77);
  const auto res = run_qdsc(run.windows);
  const auto ft = quantum::fidelities(quantum::gauge_align(run.truth), res.povm);
  const auto fi = quantum::fidelities(quantum::ideal_povm(), res.povm);
  for (int k = 0; k < 4; ++k) {
    EXPECT_GE(ft[k], 0.99);
    EXPECT_GE(fi[k], 0.93);
    EXPECT_LE(fi[k], 0.99);
  }
}
