#pragma once

// Exact linear-algebra substrate: Hermitian operators on one and two qubits,
// Bloch decomposition of qubit effects, four-outcome POVMs, Born rule,
// effect fidelity and binary entropy.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "rfiqkd/error.hpp"

namespace rfiqkd::quantum {

using cd = std::complex<double>;

template <int N>
using CMatrix = Eigen::Matrix<cd, N, N>;

namespace pauli {

inline const Eigen::Matrix2cd& identity() {
  static const Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
  return m;
}
inline const Eigen::Matrix2cd& x() {
  static const Eigen::Matrix2cd m = (Eigen::Matrix2cd() << 0, 1, 1, 0).finished();
  return m;
}
inline const Eigen::Matrix2cd& y() {
  static const Eigen::Matrix2cd m = (Eigen::Matrix2cd() << 0, cd(0, -1), cd(0, 1), 0).finished();
  return m;
}
inline const Eigen::Matrix2cd& z() {
  static const Eigen::Matrix2cd m = (Eigen::Matrix2cd() << 1, 0, 0, -1).finished();
  return m;
}
/// sigma_0..sigma_3 = (1, X, Y, Z).
inline const Eigen::Matrix2cd& by_index(int i) {
  switch (i) {
    case 0: return identity();
    case 1: return x();
    case 2: return y();
    default: return z();
  }
}

}  // namespace pauli

inline Eigen::Matrix4cd kron(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b) {
  Eigen::Matrix4cd out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

inline constexpr double kHermitianTol = 1e-12;

template <int N>
double hermiticity_residual(const CMatrix<N>& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Complex Hermitian matrix of dimension 2 (qubit) or 4 (qubit pair).
template <int N>
class HermitianOperator {
  static_assert(N == 2 || N == 4, "only qubit and two-qubit operators are supported");

 public:
  using Matrix = CMatrix<N>;
  using RealVector = Eigen::Matrix<double, N, 1>;

  HermitianOperator() : m_(Matrix::Zero()) {}

  explicit HermitianOperator(const Matrix& m) : m_(m) {
    if (!m.allFinite()) fail(ErrorCode::InvalidOperator, "non-finite entries");
    const double r = hermiticity_residual<N>(m);
    if (r > kHermitianTol)
      fail(ErrorCode::InvalidOperator, "matrix is not Hermitian (residual " + std::to_string(r) + ")");
    // Diagonal imaginary parts below tolerance are dropped.
    m_ = (m + m.adjoint()) * 0.5;
  }

  /// For matrices produced by arithmetic: symmetrizes instead of checking.
  static HermitianOperator symmetrized(const Matrix& m) {
    HermitianOperator op;
    op.m_ = (m + m.adjoint()) * 0.5;
    return op;
  }

  const Matrix& matrix() const { return m_; }
  double trace() const { return m_.trace().real(); }

  RealVector eigenvalues() const {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  double min_eigenvalue() const { return eigenvalues().minCoeff(); }
  bool is_psd(double tol) const { return min_eigenvalue() >= -tol; }

  friend bool operator==(const HermitianOperator&, const HermitianOperator&) = default;

 private:
  Matrix m_;
};

using QubitOperator = HermitianOperator<2>;
using TwoQubitOperator = HermitianOperator<4>;

/// PSD square root via eigendecomposition; eigenvalues below zero are
/// clipped (anything above -1e-10 is treated as numerical zero).
template <int N>
CMatrix<N> psd_sqrt(const CMatrix<N>& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix<N>> es(m);
  Eigen::Matrix<double, N, 1> ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

template <int N>
CMatrix<N> psd_inverse_sqrt(const CMatrix<N>& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix<N>> es(m);
  Eigen::Matrix<double, N, 1> ev = es.eigenvalues().cwiseSqrt().cwiseInverse();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

template <int N>
class DensityMatrix {
 public:
  static constexpr double kPsdTol = 1e-10;
  static constexpr double kTraceTol = 1e-10;

  explicit DensityMatrix(const HermitianOperator<N>& op) : op_(op) {
    if (!op.is_psd(kPsdTol)) fail(ErrorCode::InvalidOperator, "density matrix is not positive semidefinite");
    if (std::abs(op.trace() - 1.0) > kTraceTol) fail(ErrorCode::InvalidOperator, "density matrix trace differs from 1");
  }
  explicit DensityMatrix(const CMatrix<N>& m) : DensityMatrix(HermitianOperator<N>(m)) {}

  /// Pure state |psi><psi| (psi is normalized here).
  static DensityMatrix pure(const Eigen::Matrix<cd, N, 1>& psi) {
    const Eigen::Matrix<cd, N, 1> v = psi.normalized();
    return DensityMatrix(HermitianOperator<N>::symmetrized(v * v.adjoint()));
  }
  static DensityMatrix maximally_mixed() {
    return DensityMatrix(HermitianOperator<N>(CMatrix<N>::Identity() / double(N)));
  }

  const HermitianOperator<N>& op() const { return op_; }
  const CMatrix<N>& matrix() const { return op_.matrix(); }

 private:
  HermitianOperator<N> op_;
};

using QubitState = DensityMatrix<2>;
using TwoQubitState = DensityMatrix<4>;

namespace kets {
inline Eigen::Vector2cd h() { return {1, 0}; }
inline Eigen::Vector2cd v() { return {0, 1}; }
inline Eigen::Vector2cd d() { return Eigen::Vector2cd(1, 1) / std::sqrt(2.0); }
inline Eigen::Vector2cd a() { return Eigen::Vector2cd(1, -1) / std::sqrt(2.0); }
inline Eigen::Vector2cd l() { return Eigen::Vector2cd(1, cd(0, 1)) / std::sqrt(2.0); }
inline Eigen::Vector2cd r() { return Eigen::Vector2cd(1, cd(0, -1)) / std::sqrt(2.0); }
}  // namespace kets

inline Eigen::Matrix2cd projector(const Eigen::Vector2cd& psi) {
  const Eigen::Vector2cd v = psi.normalized();
  return v * v.adjoint();
}

/// Effect written as t*1 + m.sigma.
struct BlochDecomposition {
  double t = 0.0;
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
};

inline BlochDecomposition pauli_decompose(const QubitOperator& op) {
  const auto& a = op.matrix();
  BlochDecomposition b;
  b.t = 0.5 * a.trace().real();
  b.m.x() = 0.5 * (a * pauli::x()).trace().real();
  b.m.y() = 0.5 * (a * pauli::y()).trace().real();
  b.m.z() = 0.5 * (a * pauli::z()).trace().real();
  return b;
}

inline QubitOperator from_bloch(const BlochDecomposition& b) {
  const Eigen::Matrix2cd m =
      b.t * pauli::identity() + b.m.x() * pauli::x() + b.m.y() * pauli::y() + b.m.z() * pauli::z();
  return QubitOperator::symmetrized(m);
}

// ---------------------------------------------------------------------------
// Channels and POVMs

/// Global channel order (D, A, L, R); files and external data are mapped by label.
enum class Channel : int { D = 0, A = 1, L = 2, R = 3 };

inline constexpr std::array<Channel, 4> kChannels = {Channel::D, Channel::A, Channel::L, Channel::R};

constexpr std::string_view label(Channel c) {
  switch (c) {
    case Channel::D: return "D";
    case Channel::A: return "A";
    case Channel::L: return "L";
    case Channel::R: return "R";
  }
  return "?";
}

inline Channel channel_from_label(std::string_view s) {
  for (Channel c : kChannels)
    if (label(c) == s) return c;
  fail(ErrorCode::ParseError, "unknown channel label '" + std::string(s) + "'");
}

constexpr int index(Channel c) { return static_cast<int>(c); }

class Povm {
 public:
  using Elements = std::array<QubitOperator, 4>;

  static constexpr double kPsdTol = 1e-9;
  static constexpr double kCompletenessTol = 1e-6;

  /// Validated construction.
  static Povm make(const Elements& e) {
    Povm p(e);
    for (Channel c : kChannels) {
      if (!p[c].is_psd(kPsdTol))
        fail(ErrorCode::NonPositiveEffect,
             "effect " + std::string(label(c)) + " has eigenvalue " + std::to_string(p[c].min_eigenvalue()));
    }
    const double res = p.completeness_residual();
    if (res > kCompletenessTol)
      fail(ErrorCode::IncompletePovm, "effects do not sum to identity (residual " + std::to_string(res) + ")");
    return p;
  }

  /// No validation: used for ingesting external data that may be slightly
  /// inconsistent; run validate_povm() on the result.
  static Povm unchecked(const Elements& e) { return Povm(e); }

  const QubitOperator& operator[](Channel c) const { return e_[index(c)]; }
  const Elements& elements() const { return e_; }

  double completeness_residual() const {
    Eigen::Matrix2cd s = Eigen::Matrix2cd::Zero();
    for (const auto& op : e_) s += op.matrix();
    return (s - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
  }

 private:
  explicit Povm(const Elements& e) : e_(e) {}
  Elements e_;
};

inline Povm povm_from_bloch(std::span<const BlochDecomposition, 4> decomps) {
  constexpr double tol = 1e-6;
  double t_sum = 0.0;
  Eigen::Vector3d m_sum = Eigen::Vector3d::Zero();
  for (const auto& d : decomps) {
    if (d.t < 0.0) fail(ErrorCode::IncompletePovm, "negative effect weight t = " + std::to_string(d.t));
    t_sum += d.t;
    m_sum += d.m;
  }
  if (std::abs(t_sum - 1.0) > tol) fail(ErrorCode::IncompletePovm, "weights sum to " + std::to_string(t_sum));
  if (m_sum.cwiseAbs().maxCoeff() > tol) fail(ErrorCode::IncompletePovm, "Bloch vectors do not sum to zero");
  Povm::Elements e;
  for (std::size_t k = 0; k < 4; ++k) {
    if (decomps[k].t < decomps[k].m.norm() - Povm::kPsdTol)
      fail(ErrorCode::NonPositiveEffect, "t < |m| for effect " + std::string(label(kChannels[k])));
    e[k] = from_bloch(decomps[k]);
  }
  return Povm::make(e);
}

inline Povm povm_from_bloch(const std::array<BlochDecomposition, 4>& decomps) {
  return povm_from_bloch(std::span<const BlochDecomposition, 4>(decomps));
}

/// {|D><D|/2, |A><A|/2, |L><L|/2, |R><R|/2}.
inline Povm ideal_povm() {
  return Povm::make({QubitOperator::symmetrized(0.5 * projector(kets::d())),
                     QubitOperator::symmetrized(0.5 * projector(kets::a())),
                     QubitOperator::symmetrized(0.5 * projector(kets::l())),
                     QubitOperator::symmetrized(0.5 * projector(kets::r()))});
}

template <int N>
double born_probability(const DensityMatrix<N>& state, const HermitianOperator<N>& effect) {
  constexpr double tol = 1e-10;
  const double p = (state.matrix() * effect.matrix()).trace().real();
  if (p < -tol || p > 1.0 + tol)
    fail(ErrorCode::NonPhysicalEffect, "Born probability " + std::to_string(p) + " outside [0,1]");
  return std::clamp(p, 0.0, 1.0);
}

/// Hyper-ellipsoid (Q, t) of reachable outcome frequencies.
struct ResponseRange {
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  Eigen::Vector4d t = Eigen::Vector4d::Zero();
};

inline ResponseRange qt_from_povm(const Povm& povm) {
  ResponseRange rr;
  for (int k = 0; k < 4; ++k) {
    const auto& pk = povm.elements()[k].matrix();
    rr.t(k) = 0.5 * pk.trace().real();
    for (int h = 0; h < 4; ++h) {
      const auto& ph = povm.elements()[h].matrix();
      rr.q(k, h) = 0.5 * (pk * ph).trace().real() - 0.25 * pk.trace().real() * ph.trace().real();
    }
  }
  rr.q = 0.5 * (rr.q + rr.q.transpose()).eval();
  return rr;
}

/// Normalized effect fidelity: (Tr sqrt(sqrt(A) B sqrt(A)))^2 / (Tr A Tr B).
template <int N>
double fidelity(const HermitianOperator<N>& ideal, const HermitianOperator<N>& experimental) {
  const double ta = ideal.trace();
  const double tb = experimental.trace();
  if (std::abs(ta) < 1e-14 || std::abs(tb) < 1e-14) fail(ErrorCode::DegenerateOperator, "zero-trace operator");
  const CMatrix<N> sa = psd_sqrt<N>(ideal.matrix());
  const CMatrix<N> inner = sa * experimental.matrix() * sa;
  const double root_trace = psd_sqrt<N>((inner + inner.adjoint()) * 0.5).trace().real();
  return root_trace * root_trace / (ta * tb);
}

inline std::array<double, 4> fidelities(const Povm& reference, const Povm& other) {
  std::array<double, 4> f{};
  for (Channel c : kChannels) f[index(c)] = fidelity(reference[c], other[c]);
  return f;
}

struct ValidationReport {
  double eigenvalue_floor = 0.0;       ///< smallest eigenvalue over all effects
  double completeness_residual = 0.0;  ///< max |sum_k Pi_k - 1|
  double hermiticity_residual = 0.0;
  bool psd_ok = true;
  bool complete_ok = true;
  bool hermitian_ok = true;

  bool valid() const { return psd_ok && complete_ok && hermitian_ok; }
};

inline ValidationReport validate_povm(const Povm& povm, double tol) {
  ValidationReport r;
  r.eigenvalue_floor = std::numeric_limits<double>::infinity();
  for (const auto& e : povm.elements()) {
    r.eigenvalue_floor = std::min(r.eigenvalue_floor, e.min_eigenvalue());
    r.hermiticity_residual = std::max(r.hermiticity_residual, hermiticity_residual<2>(e.matrix()));
  }
  r.completeness_residual = povm.completeness_residual();
  r.psd_ok = r.eigenvalue_floor >= -tol;
  r.complete_ok = r.completeness_residual <= tol;
  r.hermitian_ok = r.hermiticity_residual <= tol;
  return r;
}

/// Clip negative eigenvalues, then congruence by S^{-1/2} (S = sum of the
/// clipped effects) so that the elements sum to the identity.
inline Povm project_to_valid_povm(const Povm::Elements& raw) {
  Povm::Elements clipped;
  Eigen::Matrix2cd s = Eigen::Matrix2cd::Zero();
  for (std::size_t k = 0; k < 4; ++k) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(raw[k].matrix());
    const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(0.0);
    clipped[k] = QubitOperator::symmetrized(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint());
    s += clipped[k].matrix();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> ss(s, Eigen::EigenvaluesOnly);
  if (ss.eigenvalues().minCoeff() <= 1e-12) fail(ErrorCode::UnrepairablePovm, "sum of effects is singular");
  const Eigen::Matrix2cd w = psd_inverse_sqrt<2>(s);
  Povm::Elements out;
  for (std::size_t k = 0; k < 4; ++k) out[k] = QubitOperator::symmetrized(w * clipped[k].matrix() * w);
  return Povm::make(out);
}

inline Povm project_to_valid_povm(const Povm& raw) { return project_to_valid_povm(raw.elements()); }

/// Binary Shannon entropy in bits, 0 log 0 := 0.
inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::DomainError, "binary entropy argument outside [0,1]");
  auto term = [](double p) { return p > 0.0 ? -p * std::log2(p) : 0.0; };
  return term(x) + term(1.0 - x);
}

// ---------------------------------------------------------------------------
// Gauge fixing

/// Reference-frame choice for reconstructed POVMs: `x_axis` channel's Bloch
/// vector along +x, `y_plane` channel's vector in the x-y plane with +y.
struct Gauge {
  Channel x_axis = Channel::D;
  Channel y_plane = Channel::L;
};

/// Proper rotation whose rows are the new frame axes expressed in the old one.
inline Eigen::Matrix3d gauge_rotation(const Eigen::Vector3d& mx, const Eigen::Vector3d& my) {
  constexpr double tiny = 1e-12;
  if (mx.norm() < tiny) fail(ErrorCode::GramInconsistent, "gauge x-axis channel has a vanishing Bloch vector");
  const Eigen::Vector3d e1 = mx.normalized();
  Eigen::Vector3d perp = my - my.dot(e1) * e1;
  if (perp.norm() < tiny) fail(ErrorCode::GramInconsistent, "gauge channels have parallel Bloch vectors");
  const Eigen::Vector3d e2 = perp.normalized();
  Eigen::Matrix3d rot;
  rot.row(0) = e1.transpose();
  rot.row(1) = e2.transpose();
  rot.row(2) = e1.cross(e2).transpose();
  return rot;
}

/// Rotates every effect's Bloch vector into the gauge frame. This is a
/// unitary change of basis, so outcome statistics are preserved up to the
/// matching rotation of the states.
inline Povm gauge_align(const Povm& povm, const Gauge& gauge = {}) {
  std::array<BlochDecomposition, 4> b;
  for (Channel c : kChannels) b[index(c)] = pauli_decompose(povm[c]);
  const Eigen::Matrix3d rot = gauge_rotation(b[index(gauge.x_axis)].m, b[index(gauge.y_plane)].m);
  Povm::Elements e;
  for (std::size_t k = 0; k < 4; ++k) {
    b[k].m = rot * b[k].m;
    e[k] = from_bloch(b[k]);
  }
  return Povm::unchecked(e);
}

}  // namespace rfiqkd::quantum
