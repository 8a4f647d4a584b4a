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


// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Optional arguments select criteria by number, e.g. `acceptance 1 5 9`.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "qad/acoustics.hpp"
#include "qad/harness.hpp"

using namespace qad;
using harness::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// Rabi frequencies of ideal |g,N> probes scale as sqrt(N).
Outcome rabi_scaling() {
    const SystemParams p;
    const auto grid = default_probe_grid();
    const auto basis = simulate_basis_traces(p, 7, grid);
    double worst = 0.0;
    for (int n = 1; n <= 7; ++n) {
        const double f = fft::dominant_frequency(basis[static_cast<std::size_t>(n - 1)].pe, grid[1] - grid[0]);
        const double expected = 2.0 * std::sqrt(static_cast<double>(n)) * p.g0 / two_pi;
        worst = std::max(worst, std::abs(f / expected - 1.0));
    }
    return {worst < 0.02, fmt("max relative FFT peak error %.4f (limit 0.02)", worst)};
}

harness::ResultBundle ladder_run(const std::vector<int>& n_values) {
    json j = {{"experiment", "ladder"}, {"workers", default_workers()}};
    j["ladder"] = {{"n_values", n_values}};
    return harness::run_experiment(harness::ExperimentConfig::from_json(j));
}

Outcome single_phonon() {
    const auto b = ladder_run({1});
    const double p11 = b.summary["p_NN"][0].get<double>();
    return {std::abs(p11 - 0.86) <= 0.04, fmt("p_1,1 = %.4f (target 0.86 +/- 0.04)", p11)};
}

Outcome ladder_shape() {
    const auto b = ladder_run({1, 2, 3, 4, 5, 6, 7});
    const auto diag = b.summary["p_NN"].get<std::vector<double>>();
    const auto argmax = b.summary["argmax"].get<std::vector<int>>();
    bool peaked = true;
    for (int n = 1; n <= 7; ++n) peaked = peaked && argmax[static_cast<std::size_t>(n - 1)] == n;
    int inversions = 0;
    bool small = true;
    for (std::size_t i = 1; i < diag.size(); ++i) {
        if (diag[i] > diag[i - 1]) {
            ++inversions;
            small = small && diag[i] - diag[i - 1] <= 0.02;
        }
    }
    std::string d = "p_NN =";
    for (double v : diag) d += fmt(" %.3f", v);
    d += peaked ? ", argmax = N" : ", argmax != N";
    return {peaked && inversions <= 1 && small, d};
}

Outcome displacement_calibration() {
    const json j = {{"experiment", "displacement_calibration"}, {"workers", default_workers()}};
    const auto b = harness::run_experiment(harness::ExperimentConfig::from_json(j));
    const double tv = b.summary["max_total_variation"].get<double>();
    const auto n_amps = b.summary["total_variation"].size();
    return {tv < 0.05 && n_amps == 6,
            fmt("%g amplitudes, max TV %.4f (limit 0.05), scale %.4g per Hz", static_cast<double>(n_amps), tv,
                b.summary["scale_per_hz"].get<double>())};
}

StateVector superposition(Eigen::Index dim) {
    CVector v = CVector::Zero(dim);
    v(0) = v(1) = 1.0 / std::sqrt(2.0);
    return StateVector(v);
}

Outcome tomography_round_trip() {
    const Eigen::Index dim = 10;
    const auto grid = square_alpha_grid(21, 2.0);
    const std::vector<std::pair<std::string, StateVector>> states{
        {"|0>", fock_state(0, dim)}, {"|1>", fock_state(1, dim)}, {"|2>", fock_state(2, dim)},
        {"(|0>+|1>)/sqrt2", superposition(dim)}};
    bool ok = true;
    std::string d;
    double slowest = 0.0;
    for (const auto& [name, psi] : states) {
        const auto t0 = std::chrono::steady_clock::now();
        const WignerGrid g = synthetic_wigner_grid(DensityMatrix::pure(psi), grid);
        const MleResult r = mle_reconstruct_detailed(g, dim);
        slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        const CMatrix& m = r.rho.matrix();
        const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
        const double tr = std::abs(m.trace().real() - 1.0);
        const double min_eig = r.rho.eigenvalues().minCoeff();
        const double f = fidelity(r.rho, psi);
        const bool physical = herm <= 1e-8 && tr <= 1e-8 && min_eig >= -1e-8;
        ok = ok && f >= 0.99 && physical;
        d += name + fmt(" F=%.5f min_eig=%.1e; ", f, min_eig);
    }
    ok = ok && slowest < 300.0;
    return {ok, d + fmt("slowest state %.1f s", slowest)};
}

// The full prepared-displaced-probed-reconstructed pipeline, shared by criteria 6 and 7.
struct EndToEnd {
    double fidelity = 0.0;
    double center_parity = 0.0;
};

EndToEnd end_to_end(const std::string& prep) {
    json j = {{"experiment", "reconstruct"}, {"seed", 1}, {"workers", default_workers()}};
    j["wigner"] = {{"preparation", prep}};
    const auto b = harness::run_experiment(harness::ExperimentConfig::from_json(j));
    return {b.summary["fidelity"].get<double>(), b.summary["center_parity"].get<double>()};
}

std::optional<EndToEnd> fock1_end_to_end;

Outcome end_to_end_fidelities() {
    const std::vector<std::pair<std::string, double>> targets{{"fock1", 0.87}, {"superposition01", 0.94}, {"fock2", 0.78}};
    bool ok = true;
    std::string d;
    for (const auto& [prep, target] : targets) {
        const EndToEnd r = end_to_end(prep);
        if (prep == "fock1") fock1_end_to_end = r;
        ok = ok && std::abs(r.fidelity - target) <= 0.05;
        d += prep + fmt(" F=%.4f (target %.2f); ", r.fidelity, target);
    }
    return {ok, d};
}

Outcome wigner_negativity() {
    if (!fock1_end_to_end) fock1_end_to_end = end_to_end("fock1");
    const double p0 = fock1_end_to_end->center_parity;
    ParityMeasurementOptions opt;
    opt.displacement = DisplacementOptions::Mode::ideal;
    const double ideal =
        measure_displaced_parity(SystemParams{}.without_decoherence(), Preparation::fock(1), 0.0, opt);
    return {p0 <= -0.5 && std::abs(ideal + 1.0) <= 1e-3,
            fmt("reconstructed P(0) = %.4f (limit -0.5), ideal P(0) = %.6f", p0, ideal)};
}

Outcome roundtrip_oracle() {
    using namespace acoustics;
    const MaterialParams mat;
    AcousticGeometry g;
    g.substrate_thickness = 99.1e-6;
    g.curvature_radius = 400e-6;
    g.convex_diameter = 100e-6;
    const double fsr = free_spectral_range(g, mat);
    const FrequencyBand band{1.0e9, 1.0e9 + 2.0 * fsr};
    const double w0 = mode_waist(g, mat, band.lo);
    const auto exc = hermite_gauss_field(256, 400e-6, 0, 0, w0, 0.4 * w0, 0.3 * w0).normalize();
    const RoundtripSpectrum sp = roundtrip_spectrum(g, mat, band, 2000, exc);
    const auto analytic = analytic_mode_spectrum(g, mat, band, 4);

    bool seen[3] = {false, false, false};
    bool within = true;
    double worst = 0.0;
    std::vector<double> fundamentals;
    for (const auto& pk : sp.peaks) {
        const ModeRecord* best = nullptr;
        for (const auto& m : analytic) {
            if (!best || std::abs(m.frequency - pk.frequency) < std::abs(best->frequency - pk.frequency)) best = &m;
        }
        if (!best || best->m + best->n >= 3) continue;
        const double err = std::abs(pk.frequency - best->frequency) / pk.linewidth;
        worst = std::max(worst, err);
        within = within && err < 0.5;
        seen[best->m + best->n] = true;
        if (best->m + best->n == 0) fundamentals.push_back(pk.frequency);
    }
    double spacing_err = 1.0;
    if (fundamentals.size() >= 2) {
        spacing_err = 0.0;
        for (std::size_t i = 1; i < fundamentals.size(); ++i) {
            spacing_err = std::max(spacing_err, std::abs((fundamentals[i] - fundamentals[i - 1]) / fsr - 1.0));
        }
    }
    const bool ok = within && seen[0] && seen[1] && seen[2] && spacing_err < 1e-3;
    return {ok, fmt("%g peaks, worst offset %.3f linewidths (limit 0.5), fundamental spacing error %.2e (limit 1e-3)",
                    static_cast<double>(sp.peaks.size()), worst, spacing_err)};
}

Outcome coupling_selectivity() {
    const json j = {{"experiment", "modes"}};
    const auto b = harness::run_experiment(harness::ExperimentConfig::from_json(j));
    const double s = b.summary["selectivity"].get<double>();
    const double w = b.summary["waist_m"].get<double>();
    const double dt = b.summary["transverse_spacing_hz"].get<double>();
    // The geometry has to sit near the ~20 um waist and ~1 MHz splitting regime.
    const bool geometry_ok = w > 10e-6 && w < 30e-6 && dt > 0.5e6 && dt < 1.5e6;
    return {s >= 5.0 && geometry_ok,
            fmt("selectivity %.2f (limit 5), waist %.1f um, transverse spacing %.3f MHz", s, w * 1e6, dt / 1e6)};
}

// Compact re-runs of the module invariants; the unit suites cover them in depth.
Outcome property_suites() {
    std::mt19937_64 rng(2026);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* what) {
        if (!ok) failed.emplace_back(what);
    };

    // Trace preservation and physicality under every segment kind.
    {
        const SystemParams p;
        const Eigen::Index d = 6;
        CMatrix a(2 * d, 2 * d);
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index k = 0; k < a.cols(); ++k) a(i, k) = cplx(normal(rng), normal(rng));
        CMatrix rho = a * a.adjoint();
        rho /= rho.trace().real();
        JointState s(rho, d);
        const std::vector<PulseSegment> seq{PulseSegment::resonant(0.3e-6), PulseSegment::idle(0.5e-6, 3e6),
                                            PulseSegment::pi(), PulseSegment::displacement(cplx(2e5, 1e5)),
                                            PulseSegment::pi_half(0.7), PulseSegment::reset()};
        bool ok = true;
        for (const auto& seg : seq) {
            s = evolve(s, p, seg);
            ok = ok && std::abs(s.matrix().trace().real() - 1.0) < 1e-8 && s.rho().eigenvalues().minCoeff() > -1e-7;
        }
        check(ok, "trace/physicality");
    }

    // Convex-mixture oracle for population extraction.
    {
        const SystemParams p;
        const auto grid = default_probe_grid();
        const auto basis = simulate_basis_traces(p, 14, grid);
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            RVector w(14);
            for (int n = 0; n < 14; ++n) w(n) = unif(rng) < 0.4 ? unif(rng) : 0.0;
            w *= unif(rng) / std::max(w.sum(), 1e-12);
            TimeTrace t;
            t.times = grid;
            t.pe.assign(grid.size(), 0.0);
            for (int n = 0; n < 14; ++n)
                for (std::size_t k = 0; k < grid.size(); ++k) t.pe[k] += w(n) * basis[static_cast<std::size_t>(n)].pe[k];
            const auto d = extract_populations(t, basis, 14);
            worst = std::max(worst, (d.p.tail(14) - w).cwiseAbs().maxCoeff());
        }
        check(worst < 1e-3, "convex mixture");
    }

    // Parity identities: closed form vs populations of a displaced state, and P D P = D(-alpha).
    {
        const Eigen::Index d = 40;
        bool ok = true;
        for (int trial = 0; trial < 10; ++trial) {
            const cplx alpha(normal(rng) * 0.6, normal(rng) * 0.6);
            const DensityMatrix rho = DensityMatrix::pure(fock_state(trial % 3, d));
            const auto dm = displacement_operator(-alpha, d);
            const RVector pops = rho.transformed(dm).populations();
            double par = 0.0;
            for (Eigen::Index n = 0; n < d; ++n) par += (n % 2 ? -1.0 : 1.0) * pops(n);
            ok = ok && std::abs(par - displaced_parity(rho, alpha)) < 1e-8;
            const CMatrix pm = parity_operator(d).matrix();
            const CMatrix lhs = pm * displacement_operator(alpha, d).matrix() * pm;
            ok = ok && (lhs - displacement_operator(-alpha, d).matrix()).block(0, 0, 20, 20).cwiseAbs().maxCoeff() < 1e-8;
        }
        check(ok, "parity identities");
    }

    // Poisson closed forms for coherent states.
    {
        bool ok = true;
        for (int trial = 0; trial < 10; ++trial) {
            const cplx alpha(normal(rng), normal(rng));
            const auto psi = coherent_state(alpha, required_dim(0, std::abs(alpha)) + 20);
            const RVector pp = poisson_populations(std::norm(alpha), 15);
            for (int n = 0; n <= 15; ++n) ok = ok && std::abs(std::norm(psi.amplitudes()(n)) - pp(n)) < 1e-10;
        }
        check(ok, "Poisson closed form");
    }

    // Determinism of seeded pipelines.
    {
        json j = {{"experiment", "chevron"}, {"seed", 5}};
        j["noise"] = {{"sigma_pe", 0.02}};
        j["chevron"] = {{"detuning_points", 3}, {"intervals", 60}};
        const auto c = harness::ExperimentConfig::from_json(j);
        const auto a = harness::run_experiment(c).table("chevron").column("pe");
        const auto b = harness::run_experiment(c).table("chevron").column("pe");
        check(a == b, "determinism");
    }

    std::string d = "trace preservation, physicality, convex mixture, parity, Poisson, determinism";
    if (!failed.empty()) {
        d = "failed:";
        for (const auto& f : failed) d += " " + f;
    }
    return {failed.empty(), d};
}

struct Criterion {
    int id;
    const char* name;
    double budget_s;  ///< 0 for no runtime limit
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "sqrt(N) Rabi scaling", 60.0, rabi_scaling},
        {2, "single-phonon population", 120.0, single_phonon},
        {3, "Fock ladder shape", 900.0, ladder_shape},
        {4, "displacement calibration", 300.0, displacement_calibration},
        {5, "tomography round trip", 1200.0, tomography_round_trip},
        {6, "end-to-end fidelities", 0.0, end_to_end_fidelities},
        {7, "Wigner negativity", 0.0, wigner_negativity},
        {8, "roundtrip spectrum oracle", 600.0, roundtrip_oracle},
        {9, "coupling selectivity", 0.0, coupling_selectivity},
        {10, "property suites", 0.0, property_suites},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0, ran = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        ++ran;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (c.budget_s > 0.0 && dt > c.budget_s) {
            o.pass = false;
            o.detail += fmt(" [over runtime budget %.0f s]", c.budget_s);
        }
        if (!o.pass) ++failures;
        std::printf("criterion %2d %s  %s: %s (%.1f s)\n", c.id, o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), dt);
        std::fflush(stdout);
    }
    std::printf("%d of %d criteria passed\n", ran - failures, ran);
    return failures == 0 ? 0 : 1;
}
