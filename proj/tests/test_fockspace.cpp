// Copyright 2026 The qad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include <gtest/gtest.h>

#include "qad/fockspace.hpp"
#include "test_support.hpp"

using namespace qad;

namespace {

double poisson(double mean, int n) { return std::exp(-mean + n * std::log(mean) - std::lgamma(n + 1.0)); }

}  // namespace

TEST(FockState, BasisVectors) {
    const StateVector v0 = fock_state(0, 5);
    const StateVector v2 = fock_state(2, 5);
    for (Eigen::Index n = 0; n < 5; ++n) {
        EXPECT_EQ(v0.amplitudes()(n), cplx(n == 0 ? 1.0 : 0.0));
        EXPECT_EQ(v2.amplitudes()(n), cplx(n == 2 ? 1.0 : 0.0));
    }
}

TEST(FockState, OutOfRange) {
    EXPECT_THROW(fock_state(5, 5), DimensionError);
    EXPECT_THROW(fock_state(-1, 5), DimensionError);
}

TEST(StateVector, NormalizesOnConstruction) {
    CVector v(3);
    v << 1.0, cplx(0.0, 2.0), 2.0;
    EXPECT_NEAR(StateVector(v).amplitudes().norm(), 1.0, 1e-10);
    EXPECT_THROW(StateVector(CVector::Zero(3)), Error);
}

TEST(CoherentState, ZeroIsVacuum) {
    const StateVector c = coherent_state(0.0, 10);
    EXPECT_LT((c.amplitudes() - fock_state(0, 10).amplitudes()).norm(), 1e-14);
}

TEST(CoherentState, PoissonPopulations) {
    const RVector p = coherent_state(1.0, 20).populations();
    EXPECT_NEAR(p(0), std::exp(-1.0), 1e-8);
    EXPECT_NEAR(p(1), std::exp(-1.0), 1e-8);
    EXPECT_NEAR(p(2), 0.5 * std::exp(-1.0), 1e-8);
}

TEST(CoherentState, ExcessiveTruncation) { EXPECT_THROW(coherent_state(2.5, 10), TruncationError); }

TEST(CoherentState, PoissonLawProperty) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const cplx a = testutil::random_alpha(rng, 2.0);
        const Eigen::Index dim = required_dim(14, 2.0) + 20;
        const RVector p = coherent_state(a, dim).populations();
        const double mean = std::norm(a);
        for (int n = 0; n < 30; ++n) {
            const double expect = mean == 0.0 ? (n == 0 ? 1.0 : 0.0) : poisson(mean, n);
            EXPECT_NEAR(p(n), expect, 1e-8) << "alpha=" << a << " n=" << n;
        }
    }
}

TEST(Displacement, ZeroIsIdentity) {
    EXPECT_LT((displacement_operator(0.0, 8).matrix() - CMatrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Displacement, ActsOnVacuumAsCoherentState) {
    const cplx a = 0.7;
    const StateVector d = displacement_operator(a, 20).apply(fock_state(0, 20));
    const StateVector c = coherent_state(a, 20);
    EXPECT_LT((d.amplitudes() - c.amplitudes()).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Displacement, InverseProduct) {
    const cplx a(1.2, 0.3);
    const CMatrix prod = displacement_operator(a, 25).matrix() * displacement_operator(-a, 25).matrix();
    EXPECT_LT((prod - CMatrix::Identity(25, 25)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Displacement, InverseProductProperty) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const cplx a = testutil::random_alpha(rng, 2.0);
        const double m = std::norm(a);
        const auto dim = static_cast<Eigen::Index>(std::ceil(m + 10.0 * std::sqrt(m) + 10.0));
        const CMatrix prod = displacement_operator(a, dim).matrix() * displacement_operator(-a, dim).matrix();
        EXPECT_LT((prod - CMatrix::Identity(dim, dim)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Displacement, ParityConjugationProperty) {
    std::mt19937_64 rng(6);
    const Eigen::Index dim = 30;
    const CMatrix p = parity_operator(dim).matrix();
    for (int trial = 0; trial < 20; ++trial) {
        const cplx a = testutil::random_alpha(rng, 1.5);
        const CMatrix lhs = p * displacement_operator(a, dim).matrix() * p;
        EXPECT_LT((lhs - displacement_operator(-a, dim).matrix()).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Parity, Definition) {
    const CMatrix p = parity_operator(3).matrix();
    EXPECT_EQ(p(0, 0), cplx(1.0));
    EXPECT_EQ(p(1, 1), cplx(-1.0));
    EXPECT_EQ(p(2, 2), cplx(1.0));
    EXPECT_EQ(p(0, 1), cplx(0.0));
}

TEST(Parity, FockAndCoherentExpectations) {
    EXPECT_NEAR(parity_operator(5).expectation(fock_state(1, 5)).real(), -1.0, 1e-15);
    EXPECT_NEAR(parity_operator(20).expectation(coherent_state(1.0, 20)).real(), std::exp(-2.0), 1e-8);
}

TEST(Operator, DimensionChecks) {
    EXPECT_THROW(parity_operator(3).apply(fock_state(0, 4)), DimensionError);
    EXPECT_THROW(parity_operator(3) * parity_operator(4), DimensionError);
}

TEST(DensityMatrix, RejectsUnphysical) {
    CMatrix m = CMatrix::Identity(2, 2);
    EXPECT_THROW(DensityMatrix{m}, ValidationError);  // trace 2
    m << 0.5, 0.1, 0.2, 0.5;
    EXPECT_THROW(DensityMatrix{m}, ValidationError);  // not Hermitian
    m << 1.2, 0.0, 0.0, -0.2;
    EXPECT_THROW(DensityMatrix{m}, ValidationError);  // negative eigenvalue
}

TEST(Fidelity, IdentityOrthogonalMixed) {
    std::mt19937_64 rng(3);
    const DensityMatrix r(testutil::random_density(5, rng));
    EXPECT_NEAR(fidelity(r, r), 1.0, 1e-8);
    EXPECT_NEAR(fidelity(DensityMatrix::pure(fock_state(0, 2)), DensityMatrix::pure(fock_state(1, 2))), 0.0, 1e-12);
    EXPECT_NEAR(fidelity(DensityMatrix::maximally_mixed(2), DensityMatrix::pure(fock_state(0, 2))), 0.5, 1e-10);
    EXPECT_NEAR(fidelity(DensityMatrix::maximally_mixed(2), fock_state(0, 2)), 0.5, 1e-12);
}

TEST(Fidelity, PureReducesToOverlap) {
    std::mt19937_64 rng(4);
    const DensityMatrix r(testutil::random_density(6, rng));
    const StateVector psi(testutil::random_matrix(6, rng).col(0));
    EXPECT_NEAR(fidelity(r, DensityMatrix::pure(psi)), fidelity(r, psi), 1e-8);
}

TEST(Fidelity, SymmetricAndUnitarilyInvariantProperty) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 25; ++trial) {
        const DensityMatrix a(testutil::random_density(5, rng));
        const DensityMatrix b(testutil::random_density(5, rng));
        const Operator u(testutil::random_unitary(5, rng));
        const double f = fidelity(a, b);
        EXPECT_GE(f, 0.0);
        EXPECT_LE(f, 1.0 + 1e-10);
        EXPECT_NEAR(f, fidelity(b, a), 1e-8);
        EXPECT_NEAR(f, fidelity(a.transformed(u), b.transformed(u)), 1e-8);
    }
}

TEST(Fidelity, DimensionMismatch) {
    EXPECT_THROW(fidelity(DensityMatrix::maximally_mixed(2), DensityMatrix::maximally_mixed(3)), DimensionError);
}

TEST(RequiredDim, Rule) { EXPECT_EQ(required_dim(14, 2.0), 14 + 1 + 8); }
