#pragma once

// Detector self-characterization: outcome frequencies of uncharacterized
// equatorial probe states -> response-range ellipse -> POVM elements.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rfiqkd/error.hpp"
#include "rfiqkd/geometry.hpp"
#include "rfiqkd/quantum.hpp"
#include "rfiqkd/receiver_sim.hpp"

namespace rfiqkd::qdsc {

using quantum::Channel;
using quantum::Gauge;
using quantum::Povm;
using quantum::ResponseRange;

inline constexpr std::uint64_t kDefaultMinCounts = 1000;
inline constexpr double kPinvCutoff = 1e-10;
inline constexpr double kGramTol = 1e-3;
inline constexpr double kPositivityTol = 1e-6;
inline constexpr double kMinCoverageDeg = 270.0;

/// Columns are windows, rows the channels (D, A, L, R).
struct FrequencyMatrix {
  Eigen::Matrix4Xd p;
  std::vector<std::int64_t> window_ids;
  double min_total = std::numeric_limits<double>::infinity();  ///< smallest per-window count used
  std::vector<std::int64_t> skipped;
  std::vector<std::string> warnings;

  Eigen::Index size() const { return p.cols(); }
};

/// Central-peak counts of each window divided by their sum. Windows under
/// `min_counts` are skipped with a warning.
inline FrequencyMatrix normalize_frequencies(const std::vector<sim::WindowCounts>& windows,
                                             std::uint64_t min_counts = kDefaultMinCounts) {
  FrequencyMatrix fm;
  std::vector<Eigen::Vector4d> cols;
  for (const auto& w : windows) {
    const std::uint64_t total = w.peak_total(sim::Peak::Central);
    if (total < min_counts || total == 0) {
      fm.skipped.push_back(w.window_id);
      fm.warnings.push_back("window " + std::to_string(w.window_id) + " skipped: " + std::to_string(total) +
                            " central counts < " + std::to_string(min_counts));
      continue;
    }
    Eigen::Vector4d c;
    for (Channel ch : quantum::kChannels) c(quantum::index(ch)) = double(w.at(ch, sim::Peak::Central));
    cols.push_back(c / double(total));
    fm.window_ids.push_back(w.window_id);
    fm.min_total = std::min(fm.min_total, double(total));
  }
  if (cols.empty()) fail(ErrorCode::EmptyInput, "no window has enough central-peak counts");
  fm.p.resize(4, Eigen::Index(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) fm.p.col(Eigen::Index(j)) = cols[j];
  return fm;
}

/// Exact frequencies (noiseless studies); columns must already sum to one.
inline FrequencyMatrix frequency_matrix(const Eigen::Matrix4Xd& p) {
  if (p.cols() == 0) fail(ErrorCode::EmptyInput, "empty frequency matrix");
  for (Eigen::Index j = 0; j < p.cols(); ++j) {
    if (std::abs(p.col(j).sum() - 1.0) > 1e-9) fail(ErrorCode::DomainError, "frequency column does not sum to 1");
    if (p.col(j).minCoeff() < 0.0 || p.col(j).maxCoeff() > 1.0) fail(ErrorCode::DomainError, "frequency outside [0,1]");
  }
  FrequencyMatrix fm;
  fm.p = p;
  for (Eigen::Index j = 0; j < p.cols(); ++j) fm.window_ids.push_back(j);
  return fm;
}

struct ReducedData {
  Eigen::Matrix3Xd a_tilde;
  Eigen::Matrix<double, 4, 3> u;
  Eigen::Vector3d singular_values;
  Eigen::Vector4d mean_p;
  double third_row_max = 0.0;
  double noise_scale = 0.0;  ///< 5/sqrt(N_min); zero for exact data
  bool third_row_flag = false;
};

/// Subtract the mean column and keep the three leading left singular vectors.
inline ReducedData center_and_reduce(const FrequencyMatrix& fm) {
  const Eigen::Index m = fm.size();
  if (m < 8) fail(ErrorCode::InsufficientPhaseCoverage, "need at least 8 windows, got " + std::to_string(m));
  ReducedData rd;
  rd.mean_p = fm.p.rowwise().mean();
  const Eigen::Matrix4Xd a = fm.p.colwise() - rd.mean_p;

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullU);
  const Eigen::Vector4d s = svd.singularValues().head<4>();
  rd.singular_values = s.head<3>();
  if (!(s(0) > 1e-12) || s(1) <= kPinvCutoff * s(0))
    fail(ErrorCode::InsufficientPhaseCoverage, "centered frequencies have rank < 2 (phase never drifted)");
  rd.u = svd.matrixU().leftCols<3>();
  for (int c = 0; c < 3; ++c) {
    Eigen::Index i;
    rd.u.col(c).cwiseAbs().maxCoeff(&i);
    if (rd.u(i, c) < 0) rd.u.col(c) *= -1.0;
  }
  rd.a_tilde = rd.u.transpose() * a;
  rd.third_row_max = rd.a_tilde.row(2).cwiseAbs().maxCoeff();
  if (std::isfinite(fm.min_total)) {
    rd.noise_scale = 5.0 / std::sqrt(fm.min_total);
    rd.third_row_flag = rd.third_row_max > rd.noise_scale;
  }
  return rd;
}

struct BoundarySet {
  geometry::Points points;  ///< counterclockwise
};

inline BoundarySet convex_hull_boundary(const geometry::Points& cloud) {
  BoundarySet b{geometry::convex_hull(cloud)};
  if (b.points.size() < 5)
    fail(ErrorCode::DegenerateHull, "convex hull has " + std::to_string(b.points.size()) + " vertices (< 5)");
  return b;
}

inline BoundarySet convex_hull_boundary(const ReducedData& rd) {
  geometry::Points cloud;
  cloud.reserve(std::size_t(rd.a_tilde.cols()));
  for (Eigen::Index j = 0; j < rd.a_tilde.cols(); ++j) cloud.emplace_back(rd.a_tilde(0, j), rd.a_tilde(1, j));
  return convex_hull_boundary(cloud);
}

struct EllipseFit {
  Eigen::Matrix3d q3 = Eigen::Matrix3d::Zero();  ///< PSD: A^{-1} embedded, third row/col zero
  Eigen::Vector3d center_w = Eigen::Vector3d::Zero();
  double residual_rms = 0.0;
  geometry::Ellipse ellipse;

  /// Minus the unit-form quadratic matrix, i.e. -pinv(q3). This is the sign
  /// convention the reference characterization reports its 3x3 block in.
  Eigen::Matrix3d negated_form() const {
    Eigen::Matrix3d out = Eigen::Matrix3d::Zero();
    out.topLeftCorner<2, 2>() = -ellipse.a;
    return out;
  }
};

inline EllipseFit fit_ellipse(const BoundarySet& boundary) {
  if (boundary.points.size() < 5) fail(ErrorCode::DegenerateHull, "ellipse fit needs at least 5 boundary points");
  EllipseFit fit;
  fit.ellipse = geometry::fit_ellipse(boundary.points);
  fit.q3.topLeftCorner<2, 2>() = fit.ellipse.a.inverse();
  fit.q3 = (0.5 * (fit.q3 + fit.q3.transpose())).eval();
  fit.center_w.head<2>() = fit.ellipse.center;
  double ss = 0.0;
  for (const auto& p : boundary.points) {
    const double r = 1.0 - fit.ellipse.form(p);
    ss += r * r;
  }
  fit.residual_rms = std::sqrt(ss / double(boundary.points.size()));
  return fit;
}

namespace detail {

inline Eigen::MatrixXd pinv(const Eigen::MatrixXd& m, double rel_cutoff = kPinvCutoff) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  const double cut = s.size() > 0 ? rel_cutoff * s(0) : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace detail

/// Smallest t_k^2 - Q_kk; negative means some effect would have |m| > t.
inline double positivity_margin(const ResponseRange& rr) {
  double m = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 4; ++k) m = std::min(m, rr.t(k) * rr.t(k) - rr.q(k, k));
  return m;
}

/// Back-map of the planar fit to the four-outcome space:
/// Q4 = -pinv(U Q3' pinv(U)) with Q3' the published-sign matrix, and
/// t = mean + U w. `positivity_tol` = infinity skips the positivity check.
inline ResponseRange to_response_range(const EllipseFit& fit, const ReducedData& rd, double positivity_tol = kPositivityTol) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(fit.q3, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = es.eigenvalues();
  if (!fit.q3.allFinite() || !(ev(1) > 1e-14))
    fail(ErrorCode::InconsistentFit, "fitted ellipse is degenerate (rank < 2)");

  const Eigen::MatrixXd u = rd.u;
  const Eigen::MatrixXd q3p = -detail::pinv(fit.q3);
  const Eigen::MatrixXd inner = u * q3p * detail::pinv(u);
  ResponseRange rr;
  rr.q = -detail::pinv(inner);
  rr.q = (0.5 * (rr.q + rr.q.transpose())).eval();
  rr.t = rd.mean_p + rd.u * fit.center_w;

  const double margin = positivity_margin(rr);
  if (margin < -positivity_tol)
    fail(ErrorCode::InconsistentFit, "response range violates t_k^2 >= Q_kk (margin " + std::to_string(margin) + ")");
  return rr;
}

struct GramFactor {
  std::array<Eigen::Vector3d, 4> m;
  double residual = 0.0;
};

/// Rank-2 factorization Q = M M^T; rows of M (embedded with z = 0) are the
/// Bloch vectors up to an orthogonal transformation.
inline GramFactor gram_factor(const Eigen::Matrix4d& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(q);
  const Eigen::Vector4d ev = es.eigenvalues();  // ascending
  if (!(ev(2) > 0.0)) fail(ErrorCode::GramInconsistent, "Q has fewer than two positive eigenvalues");
  Eigen::Matrix<double, 4, 2> mm;
  mm.col(0) = std::sqrt(ev(3)) * es.eigenvectors().col(3);
  mm.col(1) = std::sqrt(ev(2)) * es.eigenvectors().col(2);
  GramFactor g;
  g.residual = (q - mm * mm.transpose()).cwiseAbs().maxCoeff();
  for (int k = 0; k < 4; ++k) g.m[std::size_t(k)] = Eigen::Vector3d(mm(k, 0), mm(k, 1), 0.0);
  return g;
}

/// Bloch vectors from the Gram relations, oriented by the gauge, weights
/// from range.t. With `repair` the result goes through project_to_valid_povm;
/// without it the elements are returned as computed (validate separately).
inline Povm solve_povms(const ResponseRange& range, const Gauge& gauge = {}, bool repair = false) {
  if (!range.q.allFinite() || !range.t.allFinite()) fail(ErrorCode::GramInconsistent, "non-finite response range");
  const GramFactor g = gram_factor(range.q);
  if (g.residual > kGramTol)
    fail(ErrorCode::GramInconsistent, "rank-2 factorization residual " + std::to_string(g.residual) + " > 1e-3");
  const Eigen::Matrix3d rot =
      quantum::gauge_rotation(g.m[std::size_t(quantum::index(gauge.x_axis))], g.m[std::size_t(quantum::index(gauge.y_plane))]);
  Povm::Elements e;
  for (std::size_t k = 0; k < 4; ++k) e[k] = quantum::from_bloch({range.t(Eigen::Index(k)), rot * g.m[k]});
  if (repair) return quantum::project_to_valid_povm(e);
  return Povm::unchecked(e);
}

struct QdscOptions {
  std::uint64_t min_counts = kDefaultMinCounts;
  Gauge gauge{};
  bool repair = true;
  double min_coverage_deg = kMinCoverageDeg;
};

struct Diagnostics {
  std::size_t windows_used = 0;
  std::size_t windows_skipped = 0;
  Eigen::Vector3d singular_values = Eigen::Vector3d::Zero();
  double third_row_max = 0.0;
  double noise_scale = 0.0;
  bool third_row_flag = false;
  std::size_t hull_size = 0;
  double fit_residual_rms = 0.0;
  double coverage_deg = 0.0;
  double positivity_margin = 0.0;
  double completeness_residual = 0.0;  ///< of the unrepaired elements
  double eigenvalue_floor = 0.0;       ///< of the unrepaired elements
  bool repaired = false;
  std::vector<std::string> warnings;
};

struct QdscResult {
  Povm povm;
  ResponseRange range;
  ReducedData reduced;
  BoundarySet boundary;
  EllipseFit fit;
  Diagnostics diagnostics;
};

inline QdscResult run_qdsc(const FrequencyMatrix& fm, const QdscOptions& opt = {}) {
  ReducedData rd = center_and_reduce(fm);
  BoundarySet boundary = convex_hull_boundary(rd);
  EllipseFit fit = fit_ellipse(boundary);

  Diagnostics d;
  d.windows_used = std::size_t(fm.size());
  d.windows_skipped = fm.skipped.size();
  d.warnings = fm.warnings;
  d.singular_values = rd.singular_values;
  d.third_row_max = rd.third_row_max;
  d.noise_scale = rd.noise_scale;
  d.third_row_flag = rd.third_row_flag;
  if (rd.third_row_flag) d.warnings.push_back("third reduced row exceeds the shot-noise scale");
  d.hull_size = boundary.points.size();
  d.fit_residual_rms = fit.residual_rms;
  d.coverage_deg = geometry::angular_coverage_deg(boundary.points, fit.ellipse.center);
  if (d.coverage_deg < opt.min_coverage_deg)
    fail(ErrorCode::CoverageTooLow, "boundary spans " + std::to_string(d.coverage_deg) + " deg < " +
                                        std::to_string(opt.min_coverage_deg) + " deg");

  const ResponseRange rr =
      to_response_range(fit, rd, opt.repair ? std::numeric_limits<double>::infinity() : kPositivityTol);
  d.positivity_margin = positivity_margin(rr);
  if (d.positivity_margin < -kPositivityTol) d.warnings.push_back("fit violates t_k^2 >= Q_kk; positivity repair applied");

  const Povm raw = solve_povms(rr, opt.gauge, false);
  const auto report = quantum::validate_povm(raw, Povm::kPsdTol);
  d.completeness_residual = report.completeness_residual;
  d.eigenvalue_floor = report.eigenvalue_floor;
  d.repaired = opt.repair;
  Povm out = opt.repair ? solve_povms(rr, opt.gauge, true) : raw;
  return {out, rr, std::move(rd), std::move(boundary), fit, std::move(d)};
}

inline QdscResult run_qdsc(const std::vector<sim::WindowCounts>& windows, const QdscOptions& opt = {}) {
  if (windows.empty()) fail(ErrorCode::EmptyInput, "no windows");
  return run_qdsc(normalize_frequencies(windows, opt.min_counts), opt);
}

/// Points on the fitted ellipse in the reduced plane (for plotting).
inline geometry::Points sample_ellipse(const EllipseFit& fit, int n = 360) {
  geometry::Points out;
  out.reserve(std::size_t(n));
  for (int i = 0; i < n; ++i) out.push_back(fit.ellipse.at(2.0 * std::numbers::pi * i / n));
  return out;
}

}  // namespace rfiqkd::qdsc
