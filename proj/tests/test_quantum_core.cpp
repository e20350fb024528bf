#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace swapsim;
using swapsim::testing::random_density;

namespace {

constexpr BellKind kAllBell[] = {BellKind::PhiPlus, BellKind::PhiMinus, BellKind::PsiPlus, BellKind::PsiMinus};

TEST(BellState, PhiPlusCorners) {
    const Matrix m = bell_state(BellKind::PhiPlus).matrix();
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            const bool corner = (r == 0 || r == 3) && (c == 0 || c == 3);
            EXPECT_NEAR(std::abs(m(r, c) - Complex(corner ? 0.5 : 0.0, 0.0)), 0.0, 1e-15) << r << "," << c;
        }
    }
}

TEST(BellState, PsiMinusEntries) {
    const Matrix m = bell_state(BellKind::PsiMinus).matrix();
    EXPECT_NEAR(m(1, 1).real(), 0.5, 1e-15);
    EXPECT_NEAR(m(2, 2).real(), 0.5, 1e-15);
    EXPECT_NEAR(m(1, 2).real(), -0.5, 1e-15);
    EXPECT_NEAR(m(2, 1).real(), -0.5, 1e-15);
    EXPECT_NEAR(m(0, 0).real(), 0.0, 1e-15);
    EXPECT_NEAR(m(3, 3).real(), 0.0, 1e-15);
}

TEST(BellState, SelfFidelityAndConcurrence) {
    for (BellKind a : kAllBell) {
        EXPECT_NEAR(fidelity(bell_state(a), bell_state(a)), 1.0, 1e-12) << to_string(a);
        EXPECT_NEAR(concurrence(bell_state(a)), 1.0, 1e-9) << to_string(a);
        for (BellKind b : kAllBell) {
            if (a != b) {
                EXPECT_NEAR(fidelity(bell_state(a), bell_state(b)), 0.0, 1e-15);
            }
        }
    }
}

TEST(Fidelity, Examples) {
    const auto psi = bell_state(BellKind::PsiMinus);
    EXPECT_NEAR(fidelity(psi, psi), 1.0, 1e-12);
    for (BellKind b : kAllBell) EXPECT_NEAR(fidelity(maximally_mixed(2), bell_state(b)), 0.25, 1e-15);
    // p + (1 - p)/4 evaluated from the matrix written out by hand
    Matrix w = 0.05 * Matrix::Identity(4, 4);
    w(1, 1) += 0.4;
    w(2, 2) += 0.4;
    w(1, 2) -= 0.4;
    w(2, 1) -= 0.4;
    EXPECT_NEAR(fidelity(DensityOperator(w), psi), 0.85, 1e-12);
    EXPECT_NEAR(fidelity(werner_state(0.8), psi), 0.85, 1e-12);
}

TEST(Fidelity, RejectsMixedTargetAndDimensionMismatch) {
    EXPECT_THROW(fidelity(bell_state(BellKind::PsiMinus), maximally_mixed(2)), std::invalid_argument);
    EXPECT_THROW(fidelity(maximally_mixed(1), bell_state(BellKind::PsiMinus)), std::invalid_argument);
}

TEST(Concurrence, Examples) {
    EXPECT_NEAR(concurrence(bell_state(BellKind::PsiMinus)), 1.0, 1e-9);
    EXPECT_NEAR(concurrence(maximally_mixed(2)), 0.0, 1e-12);
    EXPECT_NEAR(concurrence(werner_state(0.8)), 0.7, 1e-10);
    EXPECT_THROW(concurrence(maximally_mixed(1)), std::invalid_argument);
}

TEST(Concurrence, WernerGridMatchesEigenSolveAndClosedForm) {
    for (int i = 0; i <= 40; ++i) {
        const double p = i / 40.0;
        const auto w = werner_state(p);
        const double c = concurrence(w);
        EXPECT_NEAR(c, std::max(0.0, (3.0 * p - 1.0) / 2.0), 1e-10) << p;
        EXPECT_NEAR(c, swapsim::testing::concurrence_oracle(w.matrix()), 1e-10) << p;
    }
}

TEST(Concurrence, RandomStatesMatchOracleAndStayInRange) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 200; ++i) {
        const Matrix m = random_density(rng, 4, 1 + i % 4);
        const DensityOperator s(m);
        const double c = concurrence(s);
        EXPECT_GE(c, 0.0);
        EXPECT_LE(c, 1.0 + 1e-12);
        EXPECT_NEAR(c, swapsim::testing::concurrence_oracle(m), 1e-7);
        for (BellKind b : kAllBell) {
            const double f = fidelity(s, bell_state(b));
            EXPECT_GE(f, -1e-12);
            EXPECT_LE(f, 1.0 + 1e-12);
        }
    }
}

TEST(Tensor, HalfIdentities) {
    const auto half = maximally_mixed(1);
    EXPECT_LT(detail::max_abs(tensor(half, half).matrix() - maximally_mixed(2).matrix()), 1e-15);
}

TEST(Tensor, DimensionLimit) {
    EXPECT_THROW(tensor(maximally_mixed(3), maximally_mixed(2)), std::invalid_argument);
    EXPECT_NO_THROW(tensor(maximally_mixed(2), maximally_mixed(2)));
}

TEST(Project, IdealSwapMatchesBruteForce) {
    const auto phi = bell_state(BellKind::PhiPlus);
    // Qubit order (X_E, XX_E, X_L, XX_L) -> (X_E, X_L, XX_E, XX_L)
    const Matrix joint = permute_qubits(tensor(phi, phi).matrix(), {0, 2, 1, 3});
    const auto out = project(DensityOperator(joint), Projector({0, 1}, swapsim::testing::psi_minus_projector()));
    const Matrix oracle = swapsim::testing::brute_force_herald(phi.matrix(), phi.matrix(), swapsim::testing::psi_minus_projector());
    EXPECT_NEAR(out.probability, 0.25, 1e-12);
    EXPECT_LT(detail::max_abs(out.state.matrix() - oracle), 1e-12);
    EXPECT_NEAR(fidelity(out.state.normalized(), bell_state(BellKind::PsiMinus)), 1.0, 1e-12);
}

TEST(Project, ProjectorOnAnyPairMatchesBruteForce) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
        const Matrix a = random_density(rng, 4);
        const Matrix b = random_density(rng, 4);
        const Matrix op = random_density(rng, 4);  // PSD with unit trace: eigenvalues in [0, 1]
        const Matrix joint = permute_qubits(kron(a, b), {0, 2, 1, 3});
        const auto out = project(DensityOperator(joint), Projector({0, 1}, op));
        EXPECT_LT(detail::max_abs(out.state.matrix() - swapsim::testing::brute_force_herald(a, b, op)), 1e-13);
    }
}

TEST(Project, CompletenessPreservesTrace) {
    std::mt19937_64 rng(3);
    for (int n = 2; n <= 4; ++n) {
        const DensityOperator rho(random_density(rng, 1 << n));
        const auto out = project(rho, Projector({0}, Matrix::Identity(2, 2)));
        EXPECT_NEAR(out.probability, 1.0, 1e-12);
        EXPECT_NEAR(out.state.trace(), 1.0, 1e-12);
        EXPECT_LT(detail::max_abs(out.state.matrix() - partial_trace(rho.matrix(), [&] {
                                      std::vector<int> keep;
                                      for (int q = 1; q < n; ++q) keep.push_back(q);
                                      return keep;
                                  }())),
                  1e-13);
    }
}

TEST(Project, HHOnPsiMinusHasZeroProbability) {
    const Matrix hh = kron(polarization_projector(Polarization::H), polarization_projector(Polarization::H));
    const auto out = project(bell_state(BellKind::PsiMinus), Projector({0, 1}, hh));
    EXPECT_NEAR(out.probability, 0.0, 1e-15);
    EXPECT_EQ(out.state.dim(), 1);
}

TEST(Project, InvalidIndicesThrow) {
    const auto rho = maximally_mixed(2);
    const Matrix p = polarization_projector(Polarization::H);
    EXPECT_THROW(project(rho, Projector({2}, p)), std::out_of_range);
    EXPECT_THROW(project(rho, Projector({-1}, p)), std::out_of_range);
    const Matrix hh = kron(p, p);
    EXPECT_THROW(project(rho, Projector({1, 1}, hh)), std::out_of_range);
    EXPECT_THROW(Projector({0}, hh), std::invalid_argument);
    EXPECT_THROW(Projector({0}, Matrix(2.0 * p)), std::invalid_argument);
}

TEST(IsPhysical, Examples) {
    EXPECT_TRUE(is_physical(bell_state(BellKind::PsiMinus), 1e-12));
    Matrix m = Matrix::Zero(4, 4);
    m.diagonal() << 0.6, 0.3, 0.2, -0.1;
    EXPECT_FALSE(is_physical(m, 1e-9));
    EXPECT_THROW(is_physical(m, 0.0), std::invalid_argument);
}

TEST(DensityOperator, ValidationRejectsBadMatrices) {
    Matrix m = maximally_mixed(2).matrix();
    m(0, 1) = Complex(0.1, 0.0);
    EXPECT_THROW(DensityOperator{m}, std::invalid_argument);
    EXPECT_THROW(DensityOperator{Matrix(2.0 * maximally_mixed(2).matrix())}, std::invalid_argument);
    EXPECT_NO_THROW(DensityOperator::unnormalized(Matrix(2.0 * maximally_mixed(2).matrix())));
    Matrix neg = Matrix::Zero(2, 2);
    neg.diagonal() << 1.1, -0.1;
    EXPECT_THROW(DensityOperator{neg}, std::invalid_argument);
    EXPECT_THROW(DensityOperator{Matrix(Matrix::Identity(3, 3) / 3.0)}, std::invalid_argument);
    EXPECT_THROW(DensityOperator{Matrix(Matrix::Zero(2, 3))}, std::invalid_argument);
}

TEST(DensityOperator, RandomStatesSatisfyInvariants) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 100; ++i) {
        const DensityOperator s(random_density(rng, 1 << (1 + i % 4)));
        EXPECT_LE(hermiticity_error(s.matrix()), 1e-12);
        EXPECT_NEAR(s.trace(), 1.0, 1e-12);
        EXPECT_GE(min_eigenvalue(s.matrix()), -1e-10);
    }
}

TEST(Physicalize, ClipsAndRenormalizes) {
    Matrix m = Matrix::Zero(4, 4);
    m.diagonal() << 0.6, 0.3, 0.2, -0.1;
    const auto s = physicalize(m);
    EXPECT_TRUE(is_physical(s, 1e-12));
    EXPECT_NEAR(s(0, 0).real(), 0.6 / 1.1, 1e-12);
    EXPECT_NEAR(s(3, 3).real(), 0.0, 1e-12);
}

TEST(PermuteQubits, SwapTwoQubits) {
    // |HV> -> |VH>
    Matrix m = Matrix::Zero(4, 4);
    m(1, 1) = 1.0;
    const Matrix p = permute_qubits(m, {1, 0});
    EXPECT_EQ(p(2, 2), Complex(1.0, 0.0));
    EXPECT_THROW(permute_qubits(m, {0, 0}), std::invalid_argument);
}

}  // namespace
