#pragma once

// Independent check of the C minimization: quasi-Newton descent over a
// Cholesky-type factor rho = L L^dag / Tr(L L^dag) with quadratic
// constraint penalties, restarted from random factors.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rfiqkd/security.hpp"

namespace rfiqkd::oracle {

struct OracleSettings {
  int starts = 8;
  std::uint64_t seed = 7;
  int max_iter_per_stage = 3000;
  double w_first = 1e2;
  double w_last = 1e8;
};

struct OracleResult {
  double c = 0.0;
  double violation = 0.0;
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Identity() / 4.0;
};

namespace detail {

using Params = Eigen::Matrix<double, 16, 1>;

inline Eigen::Matrix4cd factor(const Params& p) {
  Eigen::Matrix4cd l = Eigen::Matrix4cd::Zero();
  int k = 0;
  for (int i = 0; i < 4; ++i) l(i, i) = p(k++);
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < i; ++j) {
      l(i, j) = std::complex<double>(p(k), p(k + 1));
      k += 2;
    }
  return l;
}

inline Params unpack(const Eigen::Matrix4cd& g) {
  Params out;
  int k = 0;
  for (int i = 0; i < 4; ++i) out(k++) = g(i, i).real();
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < i; ++j) {
      out(k++) = g(i, j).real();
      out(k++) = g(i, j).imag();
    }
  return out;
}

struct Objective {
  const std::vector<security::LinearConstraint>* cons;
  double w;

  double operator()(const Params& p, Params* grad) const {
    const Eigen::Matrix4cd l = factor(p);
    const Eigen::Matrix4cd m = l * l.adjoint();
    const double s = m.trace().real();
    if (!(s > 1e-300)) {
      if (grad) grad->setZero();
      return std::numeric_limits<double>::infinity();
    }
    const Eigen::Matrix4cd rho = m / s;
    double f = 0.0;
    Eigen::Matrix4cd g = Eigen::Matrix4cd::Zero();
    for (const auto& o : security::ops::correlators()) {
      const double v = (rho * o).trace().real();
      f += v * v;
      g += 2.0 * v * o;
    }
    for (const auto& c : *cons) {
      const double v = (rho * c.op).trace().real();
      const double r = v > c.hi ? v - c.hi : (v < c.lo ? v - c.lo : 0.0);
      f += w * r * r;
      g += 2.0 * w * r * c.op;
    }
    if (grad) {
      const double gr = (g * rho).trace().real();
      const Eigen::Matrix4cd h = g - gr * Eigen::Matrix4cd::Identity();
      *grad = unpack(2.0 * h * l / s);
    }
    return f;
  }
};

/// BFGS with Armijo backtracking.
inline Params bfgs(const Objective& obj, Params x, int max_iter) {
  using Mat = Eigen::Matrix<double, 16, 16>;
  Mat hinv = Mat::Identity();
  Params g;
  double f = obj(x, &g);
  for (int it = 0; it < max_iter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < 1e-12) break;
    Params d = -hinv * g;
    if (d.dot(g) >= 0) {
      hinv.setIdentity();
      d = -g;
    }
    double step = 1.0;
    Params xn, gn;
    double fn = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      xn = x + step * d;
      fn = obj(xn, &gn);
      if (fn <= f + 1e-4 * step * g.dot(d)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const Params s = xn - x;
    const Params yv = gn - g;
    const double sy = s.dot(yv);
    if (sy > 1e-16) {
      const double rho = 1.0 / sy;
      const Mat i_ry = Mat::Identity() - rho * s * yv.transpose();
      hinv = i_ry * hinv * i_ry.transpose() + rho * s * s.transpose();
    }
    const bool stalled = std::abs(f - fn) <= 1e-16 * std::max(1.0, std::abs(f));
    x = xn;
    g = gn;
    f = fn;
    if (stalled) break;
  }
  return x;
}

}  // namespace detail

/// Upper-bound style estimate of min C: penalty weights ramp from w_first to
/// w_last by decades, each stage warm-started from the previous one; the
/// lowest penalized objective across starts wins.
inline OracleResult brute_force_c_min(const security::SecurityInput& in, const OracleSettings& set = {}) {
  security::validate(in);
  const double delta = in.finite_key ? security::delta_finite_key(in.k, in.epsilon) : 0.0;
  const auto cons = security::constraints(in, delta);

  std::mt19937_64 rng(set.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  OracleResult best;
  double best_f = std::numeric_limits<double>::infinity();
  for (int s = 0; s < set.starts; ++s) {
    detail::Params x;
    for (int i = 0; i < 16; ++i) x(i) = gauss(rng);
    double f = 0.0;
    for (double w = set.w_first; w <= set.w_last * 1.0000001; w *= 10.0) {
      const detail::Objective obj{&cons, w};
      x = detail::bfgs(obj, x, set.max_iter_per_stage);
      // Keep the factor at unit scale so later stages stay well conditioned.
      x /= std::sqrt(detail::factor(x).squaredNorm());
      f = obj(x, nullptr);
    }
    if (f < best_f) {
      best_f = f;
      const Eigen::Matrix4cd l = detail::factor(x);
      Eigen::Matrix4cd rho = l * l.adjoint();
      rho /= rho.trace().real();
      best.rho = rho;
      best.c = security::c_parameter(rho);
      best.violation = security::max_violation(cons, rho);
    }
  }
  return best;
}

}  // namespace rfiqkd::oracle
