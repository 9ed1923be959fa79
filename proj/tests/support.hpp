#pragma once

// Generators shared by the unit tests and the acceptance binary.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "rfiqkd/quantum.hpp"
#include "rfiqkd/receiver_sim.hpp"
#include "rfiqkd/security.hpp"

namespace rfiqkd::testkit {

using quantum::Channel;
using quantum::Povm;

/// Four effects with Bloch vectors in the x-y plane, near the ideal MUB
/// directions, then normalized to a valid POVM. Their equatorial response is
/// a non-degenerate ellipse.
inline Povm random_planar_povm(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> weight(0.6, 1.4), len(0.5, 1.0), jitter(-0.35, 0.35);
  const std::array<double, 4> base = {0.0, std::numbers::pi, std::numbers::pi / 2, -std::numbers::pi / 2};
  Povm::Elements raw;
  for (std::size_t k = 0; k < 4; ++k) {
    const double a = weight(rng), r = len(rng), th = base[k] + jitter(rng);
    quantum::BlochDecomposition b;
    b.t = a;
    b.m = Eigen::Vector3d(a * r * std::cos(th), a * r * std::sin(th), 0.0);
    raw[k] = quantum::from_bloch(b);
  }
  return quantum::project_to_valid_povm(raw);
}

/// Exact central-peak probabilities for equatorial probes at `m` equally
/// spaced phases.
inline Eigen::Matrix4Xd born_matrix(const Povm& povm, int m, double phase0 = 0.0) {
  Eigen::Matrix4Xd p(4, m);
  for (int j = 0; j < m; ++j) {
    const double phi = phase0 + 2.0 * std::numbers::pi * j / m;
    const auto rho = sim::central_peak_state(phi);
    for (Channel c : quantum::kChannels) p(quantum::index(c), j) = quantum::born_probability(rho, povm[c]);
    p.col(j) /= p.col(j).sum();
  }
  return p;
}

inline Eigen::Matrix4cd bell_state() {
  Eigen::Vector4cd phi = Eigen::Vector4cd::Zero();
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  return phi * phi.adjoint();
}

inline Eigen::Matrix2cd random_complex(std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Eigen::Matrix2cd m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) m(i, j) = {g(rng), g(rng)};
  return m;
}

/// Bell state sent through a random channel on Bob's side. Alice's marginal
/// stays maximally mixed, so the pinned-marginal constraint is satisfiable.
inline Eigen::Matrix4cd random_source_state(std::mt19937_64& rng, double noise) {
  std::array<Eigen::Matrix2cd, 3> kraus;
  kraus[0] = Eigen::Matrix2cd::Identity() + random_complex(rng, noise);
  kraus[1] = random_complex(rng, noise);
  kraus[2] = random_complex(rng, noise);
  Eigen::Matrix2cd s = Eigen::Matrix2cd::Zero();
  for (const auto& k : kraus) s += k.adjoint() * k;
  const Eigen::Matrix2cd s_isqrt = quantum::psd_inverse_sqrt<2>(s);
  const Eigen::Matrix4cd bell = bell_state();
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  for (const auto& k : kraus) {
    const Eigen::Matrix4cd op = quantum::kron(Eigen::Matrix2cd::Identity(), k * s_isqrt);
    rho += op * bell * op.adjoint();
  }
  return 0.5 * (rho + rho.adjoint()) / rho.trace().real();
}

/// Constraint data a source state produces under `povm`.
inline security::SecurityInput input_from_state(const Eigen::Matrix4cd& rho, const Povm& povm) {
  security::SecurityInput in;
  in.povm = povm;
  in.e_zz = (security::ops::e_zz() * rho).trace().real();
  const Eigen::Matrix2cd pp = security::ops::p_plus();
  double s = 0.0;
  for (Channel c : quantum::kChannels) {
    const double v = 2.0 * (quantum::kron(pp, povm[c].matrix()) * rho).trace().real();
    in.p_plus[std::size_t(quantum::index(c))] = v;
    s += v;
  }
  for (double& v : in.p_plus) v /= s;
  return in;
}

}  // namespace rfiqkd::testkit
