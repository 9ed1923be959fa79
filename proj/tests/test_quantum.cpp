#include <gtest/gtest.h>

#include <cmath>

#include "golden.hpp"
#include "rfiqkd/quantum.hpp"

using namespace rfiqkd;
using namespace rfiqkd::quantum;

namespace {

QubitOperator half_projector(const Eigen::Vector2cd& psi) { return QubitOperator(0.5 * projector(psi)); }

}  // namespace

TEST(Quantum, NonHermitianRejected) {
  Eigen::Matrix2cd m;
  m << 1, 1, 0, 1;
  try {
    QubitOperator op(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidOperator);
  }
}

TEST(Quantum, PauliDecomposeIdentity) {
  const auto b = pauli_decompose(QubitOperator(Eigen::Matrix2cd::Identity() / 2.0));
  EXPECT_NEAR(b.t, 0.5, 1e-15);
  EXPECT_LT(b.m.norm(), 1e-15);
}

TEST(Quantum, PauliDecomposeHalfD) {
  const auto b = pauli_decompose(half_projector(kets::d()));
  EXPECT_NEAR(b.t, 0.25, 1e-15);
  EXPECT_NEAR(b.m.x(), 0.25, 1e-15);
  EXPECT_NEAR(b.m.y(), 0.0, 1e-15);
  EXPECT_NEAR(b.m.z(), 0.0, 1e-15);
}

TEST(Quantum, PauliDecomposeReferenceD) {
  const auto b = pauli_decompose(golden::povm()[Channel::D]);
  EXPECT_NEAR(b.t, 0.2836, 1e-12);
  EXPECT_NEAR(b.m.x(), 0.2669, 1e-12);
  EXPECT_NEAR(b.m.y(), 0.0, 1e-12);
  EXPECT_NEAR(b.m.z(), 0.0, 1e-12);
}

TEST(Quantum, IdealPovmFromBloch) {
  const Povm p = ideal_povm();
  const auto rep = validate_povm(p, 1e-12);
  EXPECT_TRUE(rep.valid());
  EXPECT_LT(rep.completeness_residual, 1e-12);
  EXPECT_NEAR((p[Channel::L].matrix() - 0.5 * projector(kets::l())).norm(), 0.0, 1e-15);
}

TEST(Quantum, ReferenceBlochRebuildsMatrices) {
  const auto e = golden::effects();
  const Povm p = golden::povm();
  for (Channel c : kChannels) {
    const auto b = pauli_decompose(p[c]);
    EXPECT_LT((from_bloch(b).matrix() - e[index(c)]).cwiseAbs().maxCoeff(), 1e-3) << label(c);
  }
}

TEST(Quantum, NegativeWeightIsIncomplete) {
  std::array<BlochDecomposition, 4> b;
  const std::array<double, 4> t = {0.5, 0.5, 0.1, -0.1};
  for (int k = 0; k < 4; ++k) b[k].t = t[k];
  try {
    (void)povm_from_bloch(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::IncompletePovm || e.code() == ErrorCode::NonPositiveEffect);
  }
}

TEST(Quantum, ShortBlochVectorOnly) {
  std::array<BlochDecomposition, 4> b;
  for (int k = 0; k < 4; ++k) b[k].t = 0.25;
  b[0].m = {0.3, 0, 0};
  b[1].m = {-0.3, 0, 0};
  try {
    (void)povm_from_bloch(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPositiveEffect);
  }
}

TEST(Quantum, BornProbabilityExamples) {
  EXPECT_NEAR(born_probability(QubitState::pure(kets::d()), half_projector(kets::d())), 0.5, 1e-15);
  EXPECT_NEAR(born_probability(QubitState::pure(kets::h()), half_projector(kets::l())), 0.25, 1e-15);
  EXPECT_NEAR(born_probability(QubitState::maximally_mixed(), golden::povm()[Channel::D]), 0.2836, 1e-12);
}

TEST(Quantum, BornProbabilityOutOfRange) {
  const QubitOperator big(Eigen::Matrix2cd::Identity() * 2.0);
  try {
    (void)born_probability(QubitState::maximally_mixed(), big);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonPhysicalEffect);
  }
}

TEST(Quantum, ResponseRangeIdeal) {
  const auto rr = qt_from_povm(ideal_povm());
  Eigen::Matrix4d expect;
  expect << 1, -1, 0, 0, -1, 1, 0, 0, 0, 0, 1, -1, 0, 0, -1, 1;
  expect /= 16.0;
  EXPECT_LT((rr.q - expect).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((rr.t - Eigen::Vector4d::Constant(0.25)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Quantum, ResponseRangeReference) {
  const auto rr = qt_from_povm(golden::povm());
  // Tr/2 of each printed effect.
  EXPECT_NEAR(rr.t(0), 0.2836, 1e-12);
  EXPECT_NEAR(rr.t(1), 0.2948, 1e-12);
  EXPECT_NEAR(rr.t(2), 0.1718, 1e-12);
  EXPECT_NEAR(rr.t(3), 0.2420, 1e-12);
  const auto printed = golden::response_range();
  EXPECT_LT((rr.q - printed.q).cwiseAbs().maxCoeff(), 5e-3);
}

TEST(Quantum, ResponseRangeUninformative) {
  Povm::Elements e;
  for (auto& x : e) x = QubitOperator(Eigen::Matrix2cd::Identity() / 4.0);
  const auto rr = qt_from_povm(Povm::make(e));
  EXPECT_LT(rr.q.cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Quantum, FidelityExamples) {
  const auto d = half_projector(kets::d());
  EXPECT_NEAR(fidelity(d, d), 1.0, 1e-12);
  EXPECT_NEAR(fidelity(d, half_projector(kets::a())), 0.0, 1e-12);
  EXPECT_NEAR(fidelity(ideal_povm()[Channel::D], golden::povm()[Channel::D]), golden::kIdealFidelity[0], 5e-3);
}

TEST(Quantum, FidelityZeroTrace) {
  try {
    (void)fidelity(QubitOperator(Eigen::Matrix2cd::Zero()), half_projector(kets::d()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateOperator);
  }
}

TEST(Quantum, ValidateIdealAndReference) {
  EXPECT_LT(validate_povm(ideal_povm(), 1e-12).completeness_residual, 1e-12);
  const auto rep = validate_povm(golden::povm(), 1e-6);
  EXPECT_GT(rep.completeness_residual, 1e-3);
  EXPECT_FALSE(rep.complete_ok);
}

TEST(Quantum, ValidateFlagsNegativeEigenvalue) {
  Povm::Elements e = ideal_povm().elements();
  e[0] = QubitOperator(e[0].matrix() - 1e-3 * Eigen::Matrix2cd::Identity());
  e[1] = QubitOperator(e[1].matrix() + 1e-3 * Eigen::Matrix2cd::Identity());
  const auto rep = validate_povm(Povm::unchecked(e), 1e-9);
  EXPECT_LT(rep.eigenvalue_floor, 0.0);
  EXPECT_FALSE(rep.psd_ok);
}

TEST(Quantum, RepairIdentityOnValidInput) {
  const Povm p = ideal_povm();
  const Povm r = project_to_valid_povm(p);
  for (Channel c : kChannels) EXPECT_LT((p[c].matrix() - r[c].matrix()).norm(), 1e-12);
}

TEST(Quantum, RepairRestoresValidity) {
  Povm::Elements e = ideal_povm().elements();
  e[0] = QubitOperator(e[0].matrix() - 1e-4 * Eigen::Matrix2cd::Identity());
  const Povm r = project_to_valid_povm(e);
  const auto rep = validate_povm(r, 1e-12);
  EXPECT_TRUE(rep.valid());
}

TEST(Quantum, RepairAllZero) {
  Povm::Elements e;
  for (auto& x : e) x = QubitOperator(Eigen::Matrix2cd::Zero());
  try {
    (void)project_to_valid_povm(e);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::UnrepairablePovm);
  }
}

TEST(Quantum, BinaryEntropy) {
  EXPECT_EQ(binary_entropy(0.0), 0.0);
  EXPECT_EQ(binary_entropy(1.0), 0.0);
  EXPECT_NEAR(binary_entropy(0.5), 1.0, 1e-15);
  EXPECT_NEAR(binary_entropy(0.159), 0.631912, 1e-6);
  try {
    (void)binary_entropy(1.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainError);
  }
}

TEST(Quantum, GaugeAlignPutsDOnX) {
  const Povm g = gauge_align(golden::povm());
  const auto d = pauli_decompose(g[Channel::D]);
  const auto l = pauli_decompose(g[Channel::L]);
  EXPECT_NEAR(d.m.y(), 0.0, 1e-12);
  EXPECT_NEAR(d.m.z(), 0.0, 1e-12);
  EXPECT_GT(d.m.x(), 0.0);
  EXPECT_NEAR(l.m.z(), 0.0, 1e-12);
  EXPECT_GT(l.m.y(), 0.0);
}
