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
#include <vector>

#include <gtest/gtest.h>

#include "qad/dynamics.hpp"
#include "qad/fft.hpp"
#include "qad/tomography.hpp"
#include "test_support.hpp"

using namespace qad;

namespace {

SystemParams ideal() { return SystemParams{}.without_decoherence(); }

double dt_of(const std::vector<double>& t) { return t[1] - t[0]; }

double swap_population_estimate(const SystemParams& p) {
    // First-order loss: the excitation spends on average half the swap in each mode, and
    // dephasing of the |e,0>-|g,1> coherence shortens the Bloch vector by rate * ts / 2.
    const double ts = swap_time(p);
    const double decay = 0.5 * ts / p.qubit_t1 + 0.5 * ts / p.phonon_t1;
    const double dephasing = 0.25 * ts * (p.qubit_dephasing_rate() + p.phonon_dephasing_rate());
    return 1.0 - decay - dephasing;
}

void expect_physical(const JointState& s) {
    const CMatrix& m = s.matrix();
    EXPECT_NEAR(m.trace().real(), 1.0, 1e-8);
    EXPECT_LT(linalg::hermiticity_defect(m), 1e-9);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m, Eigen::EigenvaluesOnly);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-7);
}

}  // namespace

TEST(SystemParams, Validation) {
    SystemParams p;
    EXPECT_NO_THROW(p.validate());
    p.qubit_t2 = 20e-6;
    EXPECT_THROW(p.validate(), ValidationError);
    p = SystemParams{};
    p.g0 = 0.0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = SystemParams{};
    p.qubit_reset_pop = 0.6;
    EXPECT_THROW(p.validate(), ValidationError);
    EXPECT_DOUBLE_EQ(SystemParams{}.qubit_dephasing_rate(), 0.5 / 7e-6);
}

TEST(BuildHamiltonian, ResonantCouplingElement) {
    const Eigen::Index d = 6;
    const CMatrix h = build_hamiltonian(SystemParams{}, PulseSegment::resonant(1e-6), d).matrix();
    EXPECT_NEAR(h(d + 0, 1).real(), SystemParams{}.g0, 1e-6);
    EXPECT_NEAR(h(d + 2, 3).real(), SystemParams{}.g0 * std::sqrt(3.0), 1e-6);
    EXPECT_NEAR(h(d, d).real(), 0.0, 1e-12);
}

TEST(BuildHamiltonian, DetunedIdleQubitTerm) {
    const Eigen::Index d = 5;
    const SystemParams p;
    const CMatrix h = build_hamiltonian(p, PulseSegment::idle(1e-6, -5e6), d).matrix();
    const CMatrix r = build_hamiltonian(p, PulseSegment::resonant(1e-6), d).matrix();
    const CMatrix diff = h - r;
    for (Eigen::Index i = 0; i < 2 * d; ++i) {
        EXPECT_NEAR(diff(i, i).real(), i >= d ? -two_pi * 5e6 : 0.0, 1e-6);
    }
    EXPECT_NEAR((diff - diff.diagonal().asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff(), 0.0, 1e-9);
}

TEST(BuildHamiltonian, ZeroDriveEqualsIdle) {
    const SystemParams p;
    const Eigen::Index d = 5;
    const CMatrix hd = build_hamiltonian(p, PulseSegment::displacement(0.0), d, 1.3e-6).matrix();
    const CMatrix hi = build_hamiltonian(p, PulseSegment::idle(4e-6, p.nu0_detuning), d).matrix();
    EXPECT_LT((hd - hi).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(BuildHamiltonian, ResetHasNoHamiltonian) {
    EXPECT_THROW(build_hamiltonian(SystemParams{}, PulseSegment::reset(), 4), ContractError);
    EXPECT_THROW(build_hamiltonian(SystemParams{}, PulseSegment::pi(), 4), ContractError);
}

TEST(PulseSegment, Validation) {
    PulseSegment s = PulseSegment::idle(1e-6, 0.0);
    s.drive_amplitude = 1.0;
    EXPECT_THROW(s.validate(), ContractError);
    EXPECT_THROW(PulseSegment::idle(-1.0, 0.0).validate(), ContractError);
}

TEST(Evolve, IdealSwap) {
    const SystemParams p = ideal();
    const JointState s = evolve(JointState::pure(1, fock_state(0, 6)), p, PulseSegment::resonant(swap_time(p)));
    EXPECT_GE(s.population(0, 1), 0.9999);
}

TEST(Evolve, SwapWithDecoherenceMatchesFirstOrderEstimate) {
    const SystemParams p;
    const JointState s = evolve(JointState::pure(1, fock_state(0, 6)), p, PulseSegment::resonant(swap_time(p)));
    EXPECT_NEAR(s.population(0, 1), swap_population_estimate(p), 0.01);
}

TEST(Evolve, ZeroDurationIsIdentity) {
    std::mt19937_64 rng(31);
    const JointState s(testutil::random_density(8, rng), 4);
    for (const auto& seg : {PulseSegment::idle(0.0, 1e6), PulseSegment::resonant(0.0), PulseSegment::displacement(0.5, 0.0)}) {
        EXPECT_LT((evolve(s, SystemParams{}, seg).matrix() - s.matrix()).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Evolve, InstantaneousRotations) {
    const JointState g = JointState::ground(4);
    EXPECT_NEAR(evolve(g, SystemParams{}, PulseSegment::pi()).qubit_excited_population(), 1.0, 1e-14);
    EXPECT_NEAR(evolve(g, SystemParams{}, PulseSegment::pi_half()).qubit_excited_population(), 0.5, 1e-14);
}

TEST(Evolve, FinitePiPulseMatchesIdealWhenDecoupled) {
    SystemParams p = ideal();
    p.g0 = two_pi * 1.0;
    PulseSegment s = PulseSegment::pi();
    s.duration = 40e-9;
    EXPECT_NEAR(evolve(JointState::ground(4), p, s).qubit_excited_population(), 1.0, 1e-6);
}

TEST(Evolve, ResetReplacesQubitMarginal) {
    const SystemParams p;
    const JointState s = evolve(JointState::pure(1, fock_state(2, 6)), p, PulseSegment::reset());
    EXPECT_NEAR(s.qubit_excited_population(), p.qubit_reset_pop, 1e-14);
    EXPECT_NEAR(s.phonon_populations()(2), 1.0, 1e-14);
}

TEST(Evolve, PhysicalityProperty) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const SystemParams p;
    for (int trial = 0; trial < 8; ++trial) {
        const JointState s(testutil::random_density(12, rng), 6);
        std::vector<PulseSegment> segs{PulseSegment::resonant(u(rng) * 2e-6), PulseSegment::idle(u(rng) * 2e-6, 3e6 * (u(rng) - 0.5)),
                                       PulseSegment::displacement(cplx(2e5 * u(rng), 1e5 * u(rng)), 1e-6, 0.25e-6)};
        for (const auto& seg : segs) expect_physical(evolve(s, p, seg));
    }
}

TEST(Evolve, ExcitationNumberNonIncreasingWithoutDrives) {
    std::mt19937_64 rng(33);
    const SystemParams p;
    const Eigen::Index d = 6;
    JointState s(testutil::random_density(2 * d, rng), d);
    double prev = s.mean_excitations();
    for (int k = 0; k < 30; ++k) {
        s = evolve(s, p, k % 2 == 0 ? PulseSegment::resonant(0.2e-6) : PulseSegment::idle(0.2e-6, 2e6));
        const double cur = s.mean_excitations();
        EXPECT_LE(cur, prev + 1e-10);
        prev = cur;
    }
}

TEST(FockPreparation, VacuumWhenNoPulses) {
    EXPECT_GE(simulate_fock_preparation(SystemParams{}, 0).phonon_populations()(0), 0.99);
}

TEST(FockPreparation, SinglePhononWithDefaultParameters) {
    // The reset leaves the qubit partly excited, which the pi pulse sends to |g>.
    const SystemParams p;
    const double expected = (1.0 - p.qubit_reset_pop) * swap_population_estimate(p);
    EXPECT_NEAR(simulate_fock_preparation(p, 1).phonon_populations()(1), expected, 0.015);
}

TEST(FockPreparation, IdealLadder) {
    for (int n = 1; n <= 3; ++n) {
        EXPECT_GE(simulate_fock_preparation(ideal(), n, n + 6).phonon_populations()(n), 0.9999) << n;
    }
}

TEST(FockPreparation, DimensionChecks) {
    EXPECT_THROW(simulate_fock_preparation(SystemParams{}, 5, 10), TruncationError);
    EXPECT_THROW(simulate_fock_preparation(SystemParams{}, -1), ContractError);
}

TEST(ProbeTrace, VacuumRabiClosedForm) {
    const SystemParams p = ideal();
    const auto t = default_probe_grid();
    const TimeTrace tr = simulate_probe_trace(p, JointState::pure(0, fock_state(1, 6)), t);
    double worst = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) worst = std::max(worst, std::abs(tr.pe[k] - std::pow(std::sin(p.g0 * t[k]), 2)));
    EXPECT_LT(worst, 1e-4);
}

TEST(ProbeTrace, VacuumStaysDark) {
    const SystemParams p;
    const TimeTrace tr = simulate_probe_trace(p, JointState::ground(6), default_probe_grid());
    for (double v : tr.pe) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(ProbeTrace, SqrtNScaling) {
    const SystemParams p;
    const auto t = default_probe_grid();
    for (int n = 1; n <= 7; ++n) {
        const TimeTrace tr = simulate_probe_trace(p, JointState::pure(0, fock_state(n, 20)), t);
        const double f = fft::dominant_frequency(tr.pe, dt_of(t));
        EXPECT_NEAR(f, 2.0 * std::sqrt(n) * p.g0 / two_pi, 0.02 * 2.0 * std::sqrt(n) * p.g0 / two_pi) << n;
    }
}

TEST(ProbeTrace, KernelMatchesForwardIntegration) {
    std::mt19937_64 rng(34);
    const SystemParams p;
    const auto t = uniform_grid(3e-6, 150);
    const ProbeKernel kernel(p, 6, t);
    const JointState s(testutil::random_density(12, rng), 6);
    const TimeTrace a = kernel.trace(s), b = simulate_probe_trace(p, s, t);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(a.pe[k], b.pe[k], 1e-7);
}

TEST(ProbeTrace, RejectsNonUniformGrid) {
    const std::vector<double> t{0.0, 1e-8, 3e-8};
    EXPECT_THROW(simulate_probe_trace(SystemParams{}, JointState::ground(4), t), ValidationError);
}

TEST(BasisTraces, Consistency) {
    const SystemParams p;
    const auto t = default_probe_grid();
    const auto basis = simulate_basis_traces(p, 8, t);
    ASSERT_EQ(basis.size(), 8u);
    const TimeTrace direct = simulate_probe_trace(p, JointState::pure(0, fock_state(1, 20)), t);
    for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(basis[0].pe[k], direct.pe[k], 1e-7);
    for (const auto& b : basis) {
        for (double v : b.pe) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
    for (int n = 1; n < 8; ++n) {
        const double r = fft::dominant_frequency(basis[n].pe, dt_of(t)) / fft::dominant_frequency(basis[n - 1].pe, dt_of(t));
        EXPECT_NEAR(r, std::sqrt((n + 1.0) / n), 0.02 * std::sqrt((n + 1.0) / n)) << n;
    }
}

TEST(Displacement, ZeroAmplitudeMatchesIdle) {
    const SystemParams p;
    DisplacementOptions opt;
    opt.calibration = calibrate_drive(p, 8);
    const JointState s0 = JointState::pure(0, fock_state(1, 8));
    const JointState a = simulate_displacement(p, s0, 0.0, opt);
    const JointState b = evolve(s0, p, PulseSegment::idle(4e-6, p.nu0_detuning));
    // The drive frame differs from the idle frame by a rotation generated by the total
    // excitation number, which leaves all joint-basis populations unchanged.
    EXPECT_LT((a.matrix().diagonal() - b.matrix().diagonal()).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(Displacement, IdealVacuumIsPoisson) {
    DisplacementOptions opt;
    opt.mode = DisplacementOptions::Mode::ideal;
    const RVector pop = simulate_displacement(SystemParams{}, JointState::ground(20), 1.0, opt).phonon_populations();
    const RVector poisson = poisson_populations(1.0, 19);
    EXPECT_LT((pop - poisson).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Displacement, PulsedVacuumCloseToPoisson) {
    const SystemParams p;
    const JointState s = simulate_displacement(p, JointState::ground(20), 1.0);
    EXPECT_LT(total_variation(s.phonon_populations(), poisson_populations(1.0, 19)), 0.05);
    EXPECT_NEAR(std::abs(s.phonon_amplitude()), 1.0, 0.05);
}

TEST(Displacement, BeyondCalibratedRangeWarns) {
    std::vector<std::string> warnings;
    DisplacementOptions opt;
    opt.mode = DisplacementOptions::Mode::ideal;
    opt.warnings = &warnings;
    simulate_displacement(SystemParams{}, JointState::ground(24), 2.2, opt);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("calibration"), std::string::npos);
}

TEST(Displacement, TruncationDetected) {
    DisplacementOptions opt;
    opt.mode = DisplacementOptions::Mode::ideal;
    EXPECT_THROW(simulate_displacement(SystemParams{}, JointState::ground(6), 2.0, opt), TruncationError);
}

TEST(Chevron, ResonantColumnAndHyperbola) {
    // Without decay the detuned row has no slow trend to compete with its weak oscillation.
    const SystemParams p = ideal();
    const double f_vac = 2.0 * p.g0 / two_pi;
    const std::vector<double> det{0.0, f_vac * std::sqrt(3.0)};
    const auto t = uniform_grid(6e-6, 600);
    const RMatrix m = simulate_chevron(p, det, t);
    std::vector<double> row0(m.cols()), row1(m.cols());
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
        row0[k] = m(0, k);
        row1[k] = m(1, k);
    }
    EXPECT_NEAR(fft::dominant_frequency(row0, dt_of(t)), f_vac, 0.02 * f_vac);
    EXPECT_NEAR(fft::dominant_frequency(row1, dt_of(t)), 2.0 * f_vac, 0.02 * 2.0 * f_vac);
}

TEST(Chevron, FarDetunedFollowsDecayEnvelope) {
    SystemParams p;
    p.qubit_thermal_pop = 0.0;
    const double far = 20.0 * p.g0 / two_pi;
    const std::vector<double> det{-far, far};
    const auto t = uniform_grid(3e-6, 150);
    const RMatrix m = simulate_chevron(p, det, t);
    for (Eigen::Index i = 0; i < 2; ++i) {
        for (Eigen::Index k = 0; k < m.cols(); ++k) EXPECT_GE(m(i, k), 0.95 * std::exp(-t[k] / p.qubit_t1));
    }
}

TEST(Chevron, EmptyGridRejected) {
    EXPECT_THROW(simulate_chevron(SystemParams{}, std::vector<double>{}, default_probe_grid()), ValidationError);
}
