#include <gtest/gtest.h>

#include <random>

#include "rfiqkd/sdp.hpp"
#include "support.hpp"

using namespace rfiqkd;
using namespace rfiqkd::sdp;

TEST(Sdp, CoordinatesRoundTrip) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Eigen::Matrix4cd m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = {g(rng), g(rng)};
  m = (m + m.adjoint()).eval();
  EXPECT_LT((from_coords(to_coords(m)) - m).norm(), 1e-12);
}

TEST(Sdp, CoordinatesAreIsometric) {
  const Eigen::Matrix4cd bell = testkit::bell_state();
  EXPECT_NEAR(to_coords(bell).squaredNorm(), (bell * bell).trace().real(), 1e-12);
}

TEST(Sdp, PsdProjection) {
  Vec x = to_coords(Eigen::Vector4d(1.0, -0.5, 0.2, 0.0).asDiagonal().toDenseMatrix().cast<std::complex<double>>());
  const Vec p = project_psd(x);
  EXPECT_NEAR(min_eigenvalue(p), 0.0, 1e-12);
  EXPECT_NEAR(from_coords(p).trace().real(), 1.2, 1e-12);
  EXPECT_LT((project_psd(p) - p).norm(), 1e-12);
}

// min Tr(Z rho)^2 style: minimize x_zz^2 with trace one and rho >= 0.
TEST(Sdp, SmallQuadratic) {
  Problem prob;
  prob.p(coord(3, 3), coord(3, 3)) = 2.0;
  prob.add_equality(functional(Eigen::Matrix4cd::Identity()), 1.0);
  const auto sol = solve(prob);
  EXPECT_EQ(sol.status, Status::Solved);
  EXPECT_NEAR(sol.x(coord(3, 3)), 0.0, 1e-6);
  EXPECT_NEAR(from_coords(sol.z_psd).trace().real(), 1.0, 1e-6);
  EXPECT_GE(min_eigenvalue(sol.z_psd), -1e-9);
}

TEST(Sdp, LinearObjectiveHitsEigenvalue) {
  // min Tr(H rho) over density matrices = smallest eigenvalue of H.
  Eigen::Matrix4cd h = Eigen::Vector4d(0.3, -0.7, 1.1, 0.2).asDiagonal().toDenseMatrix().cast<std::complex<double>>();
  Problem prob;
  prob.q = to_coords(h);
  prob.add_equality(functional(Eigen::Matrix4cd::Identity()), 1.0);
  const auto sol = solve(prob);
  EXPECT_EQ(sol.status, Status::Solved);
  EXPECT_NEAR((from_coords(sol.z_psd) * h).trace().real(), -0.7, 1e-6);
}

TEST(Sdp, InfeasibleDetected) {
  Problem prob;
  prob.add_equality(functional(Eigen::Matrix4cd::Identity()), 1.0);
  // Tr(|00><00| rho) >= 1.5 is impossible for a density matrix.
  Eigen::Matrix4cd p00 = Eigen::Matrix4cd::Zero();
  p00(0, 0) = 1.0;
  prob.add_constraint(functional(p00), 1.5, 2.0);
  EXPECT_EQ(solve(prob).status, Status::Infeasible);
}

TEST(Sdp, MaxIterationsReported) {
  Problem prob;
  prob.p(coord(1, 1), coord(1, 1)) = 8.0;
  prob.add_equality(functional(Eigen::Matrix4cd::Identity()), 1.0);
  prob.add_equality(functional(quantum::kron(quantum::pauli::x(), quantum::pauli::x())), 0.9);
  Settings s;
  s.max_iter = 3;
  EXPECT_EQ(solve(prob, s).status, Status::MaxIterations);
}
