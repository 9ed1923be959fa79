#pragma once

// Small dense conic QP over two-qubit density operators:
//
//   minimize  1/2 x^T P x + q^T x   subject to  l <= A x <= u,  rho(x) >= 0
//
// solved by operator splitting (ADMM in the OSQP form) with the Hermitian
// operator stored as 16 real coordinates in the orthonormal Pauli basis
// sigma_i (x) sigma_j / 2. The coordinate map is an isometry, so projecting
// onto the PSD cone is an exact 4x4 eigenvalue clip.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "rfiqkd/error.hpp"
#include "rfiqkd/quantum.hpp"

namespace rfiqkd::sdp {

inline constexpr int kDim = 16;
using Vec = Eigen::Matrix<double, kDim, 1>;
using Mat = Eigen::Matrix<double, kDim, kDim>;

/// Basis element sigma_i (x) sigma_j / 2, i, j in {0: 1, 1: X, 2: Y, 3: Z}.
inline const Eigen::Matrix4cd& basis(int idx) {
  static const auto table = [] {
    std::array<Eigen::Matrix4cd, kDim> b;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        b[std::size_t(4 * i + j)] = 0.5 * quantum::kron(quantum::pauli::by_index(i), quantum::pauli::by_index(j));
    return b;
  }();
  return table[std::size_t(idx)];
}

inline constexpr int coord(int i, int j) { return 4 * i + j; }

inline Vec to_coords(const Eigen::Matrix4cd& m) {
  Vec x;
  for (int k = 0; k < kDim; ++k) x(k) = (m * basis(k)).trace().real();
  return x;
}

inline Eigen::Matrix4cd from_coords(const Vec& x) {
  Eigen::Matrix4cd m = Eigen::Matrix4cd::Zero();
  for (int k = 0; k < kDim; ++k) m += x(k) * basis(k);
  return m;
}

/// Row a with a^T x = Tr(O rho(x)).
inline Vec functional(const Eigen::Matrix4cd& op) { return to_coords(op); }

inline Vec project_psd(const Vec& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(from_coords(x));
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  return to_coords(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint());
}

inline double min_eigenvalue(const Vec& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(from_coords(x), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct Problem {
  Mat p = Mat::Zero();
  Vec q = Vec::Zero();
  Eigen::Matrix<double, Eigen::Dynamic, kDim> a;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  void add_constraint(const Vec& row, double lo, double hi) {
    const Eigen::Index m = a.rows();
    a.conservativeResize(m + 1, Eigen::NoChange);
    l.conservativeResize(m + 1);
    u.conservativeResize(m + 1);
    a.row(m) = row.transpose();
    l(m) = lo;
    u(m) = hi;
  }
  void add_equality(const Vec& row, double value) { add_constraint(row, value, value); }
  Eigen::Index rows() const { return a.rows(); }
};

struct Settings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-9;
  double eps_rel = 1e-9;
  double eps_infeasible = 1e-8;
  int max_iter = 100000;
  int check_every = 25;
  bool adaptive_rho = true;
};

enum class Status { Solved, Infeasible, MaxIterations };

constexpr std::string_view to_string(Status s) {
  switch (s) {
    case Status::Solved: return "solved";
    case Status::Infeasible: return "infeasible";
    case Status::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

struct Solution {
  Status status = Status::MaxIterations;
  Vec x = Vec::Zero();  ///< ADMM primal iterate
  Vec z_psd = Vec::Zero();  ///< PSD-projected slack: a feasible-cone point
  Eigen::VectorXd y;  ///< multipliers for the linear rows
  Vec y_psd = Vec::Zero();
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double duality_gap = 0.0;
  int iterations = 0;
};

namespace detail {

inline double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

inline Solution solve(const Problem& prob, const Settings& set = {}) {
  const Eigen::Index m = prob.rows();
  const Eigen::Index mt = m + kDim;
  if (prob.l.size() != m || prob.u.size() != m) fail(ErrorCode::DomainError, "bound sizes do not match constraints");
  for (Eigen::Index i = 0; i < m; ++i)
    if (prob.l(i) > prob.u(i)) fail(ErrorCode::Infeasible, "empty interval on constraint row " + std::to_string(i));

  Eigen::MatrixXd abar(mt, kDim);
  abar.topRows(m) = prob.a;
  abar.bottomRows(kDim) = Mat::Identity();

  // Equality rows get a much stiffer penalty.
  auto rho_vector = [&](double rho) {
    Eigen::VectorXd r = Eigen::VectorXd::Constant(mt, rho);
    for (Eigen::Index i = 0; i < m; ++i)
      if (prob.u(i) - prob.l(i) < 1e-12) r(i) = 1e3 * rho;
    return r;
  };

  auto project = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(mt);
    out.head(m) = v.head(m).cwiseMax(prob.l).cwiseMin(prob.u);
    out.tail<kDim>() = project_psd(v.tail<kDim>());
    return out;
  };

  double rho = set.rho;
  Eigen::VectorXd rv = rho_vector(rho);
  Mat kkt;
  Eigen::LLT<Mat> llt;
  auto factor = [&] {
    kkt = prob.p + set.sigma * Mat::Identity() + abar.transpose() * rv.asDiagonal() * abar;
    llt.compute(kkt);
  };
  factor();

  Vec x = Vec::Zero();
  x(coord(0, 0)) = 0.5;  // maximally mixed start
  Eigen::VectorXd z = abar * x;
  z = project(z);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(mt);
  Eigen::VectorXd y_prev = y;

  Solution sol;
  for (int it = 1; it <= set.max_iter; ++it) {
    y_prev = y;
    const Vec rhs = set.sigma * x - prob.q + abar.transpose() * (rv.cwiseProduct(z) - y);
    const Vec xt = llt.solve(rhs);
    const Eigen::VectorXd zt = abar * xt;
    x = set.alpha * xt + (1.0 - set.alpha) * x;
    const Eigen::VectorXd zr = set.alpha * zt + (1.0 - set.alpha) * z;
    const Eigen::VectorXd zn = project(zr + y.cwiseQuotient(rv));
    y += rv.cwiseProduct(zr - zn);
    z = zn;

    if (it % set.check_every != 0 && it != set.max_iter) continue;

    const Eigen::VectorXd ax = abar * x;
    const Vec px = prob.p * x;
    const Vec aty = abar.transpose() * y;
    const double rp = detail::inf_norm(ax - z);
    const double rd = detail::inf_norm(px + prob.q + aty);
    const double eps_p = set.eps_abs + set.eps_rel * std::max(detail::inf_norm(ax), detail::inf_norm(z));
    const double eps_d = set.eps_abs + set.eps_rel * std::max({detail::inf_norm(px), detail::inf_norm(aty), detail::inf_norm(prob.q)});
    sol.iterations = it;
    sol.primal_residual = rp;
    sol.dual_residual = rd;

    if (rp <= eps_p && rd <= eps_d) {
      sol.status = Status::Solved;
      break;
    }

    // Primal infeasibility certificate: A^T dy ~ 0 with negative support value.
    const Eigen::VectorXd dy = y - y_prev;
    const double ndy = detail::inf_norm(dy);
    if (ndy > 1e-14) {
      const double atdy = detail::inf_norm(abar.transpose() * dy);
      double support = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) support += prob.u(i) * std::max(dy(i), 0.0) + prob.l(i) * std::min(dy(i), 0.0);
      const bool in_polar = min_eigenvalue(-dy.tail<kDim>().eval()) >= -set.eps_infeasible * ndy;
      if (atdy <= set.eps_infeasible * ndy && support < -set.eps_infeasible * ndy && in_polar) {
        sol.status = Status::Infeasible;
        break;
      }
    }

    if (set.adaptive_rho) {
      const double np = std::max(detail::inf_norm(ax), detail::inf_norm(z));
      const double nd = std::max({detail::inf_norm(px), detail::inf_norm(aty), detail::inf_norm(prob.q)});
      if (np > 0 && nd > 0 && rd > 0) {
        const double ratio = std::sqrt((rp / np) / (rd / nd));
        const double rho_new = std::clamp(rho * ratio, 1e-6, 1e6);
        if (rho_new > 5.0 * rho || rho_new < rho / 5.0) {
          rho = rho_new;
          rv = rho_vector(rho);
          factor();
        }
      }
    }
  }

  sol.x = x;
  sol.z_psd = z.tail<kDim>();
  sol.y = y.head(m);
  sol.y_psd = y.tail<kDim>();
  sol.objective = 0.5 * x.dot(prob.p * x) + prob.q.dot(x);
  double support = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) support += prob.u(i) * std::max(y(i), 0.0) + prob.l(i) * std::min(y(i), 0.0);
  sol.duality_gap = std::abs(x.dot(prob.p * x) + prob.q.dot(x) + support);
  return sol;
}

}  // namespace rfiqkd::sdp
