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
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "qad/populations.hpp"
#include "qad/tomography.hpp"

using namespace qad;

namespace {

struct Fixture {
    SystemParams params;
    std::vector<double> t = default_probe_grid();
    std::vector<TimeTrace> basis = simulate_basis_traces(params, 14, t);
};

const Fixture& fixture() {
    static const Fixture f;
    return f;
}

TimeTrace mixture(const std::vector<TimeTrace>& basis, const RVector& w) {
    TimeTrace out;
    out.times = basis[0].times;
    out.pe.assign(out.times.size(), 0.0);
    for (Eigen::Index n = 0; n < w.size(); ++n) {
        for (std::size_t k = 0; k < out.pe.size(); ++k) out.pe[k] += w(n) * basis[static_cast<std::size_t>(n)].pe[k];
    }
    return out;
}

void expect_constraints(const PopulationDistribution& d) {
    for (Eigen::Index n = 0; n < d.p.size(); ++n) {
        EXPECT_GE(d.p(n), 0.0);
        EXPECT_LE(d.p(n), 1.0);
    }
    EXPECT_NEAR(d.p.sum(), 1.0, 1e-12);
}

}  // namespace

TEST(ExtractPopulations, ExactBasisMember) {
    const auto& f = fixture();
    const PopulationDistribution d = extract_populations(f.basis[2], f.basis, 14);
    for (int n = 0; n <= 14; ++n) EXPECT_NEAR(d[n], n == 3 ? 1.0 : 0.0, 1e-6) << n;
}

TEST(ExtractPopulations, SyntheticMixture) {
    const auto& f = fixture();
    RVector w = RVector::Zero(14);
    w(0) = 0.5;
    w(1) = 0.3;
    const PopulationDistribution d = extract_populations(mixture(f.basis, w), f.basis, 14);
    EXPECT_NEAR(d[1], 0.5, 1e-4);
    EXPECT_NEAR(d[2], 0.3, 1e-4);
    EXPECT_NEAR(d[0], 0.2, 1e-4);
}

TEST(ExtractPopulations, PreparedSinglePhonon) {
    const auto& f = fixture();
    const JointState s = simulate_fock_preparation(f.params, 1);
    const TimeTrace tr = simulate_probe_trace(f.params, s, f.t);
    EXPECT_NEAR(extract_populations(tr, f.basis, 14)[1], 0.86, 0.04);
}

TEST(ExtractPopulations, GridMismatch) {
    const auto& f = fixture();
    TimeTrace tr = f.basis[0];
    tr.times[3] += 1e-9;
    EXPECT_THROW(extract_populations(tr, f.basis, 14), ContractError);
    tr = f.basis[0];
    tr.times.pop_back();
    tr.pe.pop_back();
    EXPECT_THROW(extract_populations(tr, f.basis, 14), ContractError);
    EXPECT_THROW(extract_populations(f.basis[0], f.basis, 13), ContractError);
}

TEST(ExtractPopulations, ConvexMixtureRoundTripProperty) {
    const auto& f = fixture();
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> pick(0, 13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        RVector w = RVector::Zero(14);
        const int k = 1 + trial % 4;
        for (int j = 0; j < k; ++j) w(pick(rng)) += u(rng);
        w *= u(rng) / w.sum();
        const PopulationDistribution d = extract_populations(mixture(f.basis, w), f.basis, 14);
        EXPECT_LT((d.p.tail(14) - w).cwiseAbs().maxCoeff(), 1e-3) << "trial " << trial;
        expect_constraints(d);
    }
}

TEST(ExtractPopulations, NoiseRobustnessProperty) {
    const auto& f = fixture();
    std::mt19937_64 wrng(42);
    std::uniform_int_distribution<int> pick(0, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int passed = 0;
    for (int seed = 0; seed < 100; ++seed) {
        RVector w = RVector::Zero(14);
        for (int j = 0; j < 3; ++j) w(pick(wrng)) += u(wrng);
        w *= (0.5 + 0.5 * u(wrng)) / w.sum();
        TimeTrace tr = mixture(f.basis, w);
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
        std::normal_distribution<double> noise(0.0, 0.01);
        for (double& v : tr.pe) v = std::clamp(v + noise(rng), 0.0, 1.0);
        const PopulationDistribution d = extract_populations(tr, f.basis, 14);
        expect_constraints(d);
        if ((d.p.tail(14) - w).cwiseAbs().maxCoeff() < 0.03) ++passed;
    }
    EXPECT_GE(passed, 95);
}

TEST(ExtractPopulations, Deterministic) {
    const auto& f = fixture();
    TimeTrace tr = f.basis[4];
    for (std::size_t k = 0; k < tr.pe.size(); ++k) tr.pe[k] = 0.5 * tr.pe[k] + 0.2 * f.basis[0].pe[k];
    const auto a = extract_populations(tr, f.basis, 14), b = extract_populations(tr, f.basis, 14);
    EXPECT_EQ(a.p, b.p);
}

TEST(ErrorBars, ZeroPerturbation) {
    const auto& f = fixture();
    const TimeTrace tr = simulate_probe_trace(f.params, simulate_fock_preparation(f.params, 2), f.t);
    const auto nominal = extract_populations(tr, f.basis, 14);
    const auto [lo, hi] = population_error_bars(tr, f.params, 0.0);
    EXPECT_LT((lo.p - nominal.p).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT((hi.p - nominal.p).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ErrorBars, EnvelopeGrowsWithN) {
    const auto& f = fixture();
    const double dg = two_pi * 5e3;
    std::vector<double> widths;
    for (int n : {1, 4, 7}) {
        const TimeTrace tr = mixture(f.basis, RVector::Unit(14, n - 1));
        const auto nominal = extract_populations(tr, f.basis, 14);
        const auto [lo, hi] = population_error_bars(tr, f.params, dg);
        lo.validate();
        hi.validate();
        expect_constraints(lo);
        expect_constraints(hi);
        const auto [env_lo, env_hi] = envelope(lo, hi);
        EXPECT_GT(std::max(std::abs(lo[n] - nominal[n]), std::abs(hi[n] - nominal[n])), 1e-4);
        widths.push_back(env_hi(n) - env_lo(n));
    }
    EXPECT_GT(widths[2], widths[0]);
}

TEST(ErrorBars, RejectsNegative) {
    const auto& f = fixture();
    EXPECT_THROW(population_error_bars(f.basis[0], f.params, -1.0), ContractError);
}

TEST(Parity, FromPopulations) {
    PopulationDistribution d;
    d.p = RVector::Unit(15, 0);
    EXPECT_DOUBLE_EQ(parity_from_populations(d), 1.0);
    d.p = RVector::Unit(15, 1);
    EXPECT_DOUBLE_EQ(parity_from_populations(d), -1.0);
    d.p = poisson_populations(1.0, 14);
    EXPECT_NEAR(parity_from_populations(d), std::exp(-2.0), 1e-4);
}

TEST(Parity, LinearProperty) {
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        PopulationDistribution a, b, c;
        a.p = RVector::NullaryExpr(15, [&] { return u(rng); });
        b.p = RVector::NullaryExpr(15, [&] { return u(rng); });
        const double x = u(rng) * 3.0 - 1.0, y = u(rng) * 3.0 - 1.0;
        c.p = x * a.p + y * b.p;
        EXPECT_NEAR(parity_from_populations(c), x * parity_from_populations(a) + y * parity_from_populations(b), 1e-12);
    }
}
