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

#pragma once

// Open-system dynamics of a two-level qubit coupled to one phonon mode.
//
// Joint basis ordering is qubit (x) phonon: index = q * phonon_dim + n, q = 0 for |g>,
// q = 1 for |e>. Hamiltonians are written in a frame rotating at the bare phonon
// frequency unless a segment asks for a shifted drive frame.

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qad/fockspace.hpp"
#include "qad/lindblad.hpp"

namespace qad {

/// Physical parameters of the qubit-phonon pair. Times in seconds, g0 in rad/s,
/// detuning in Hz. An infinite time disables the corresponding channel.
struct SystemParams {
    double g0 = two_pi * 350e3;
    double qubit_t1 = 7e-6;
    double qubit_t2 = 7e-6;
    double phonon_t1 = 64e-6;
    double phonon_t2_ramsey = 38e-6;
    double qubit_thermal_pop = 0.06;
    double qubit_reset_pop = 0.02;
    double nu0_detuning = -5e6;

    /// Same coupling and detuning, all decoherence and thermal population removed.
    SystemParams without_decoherence() const {
        SystemParams p = *this;
        const double inf = std::numeric_limits<double>::infinity();
        p.qubit_t1 = p.qubit_t2 = p.phonon_t1 = p.phonon_t2_ramsey = inf;
        p.qubit_thermal_pop = 0.0;
        p.qubit_reset_pop = 0.0;
        return p;
    }

    double qubit_decay_rate() const { return 1.0 / qubit_t1; }
    double phonon_decay_rate() const { return 1.0 / phonon_t1; }
    /// 1/T_phi = 1/T2 - 1/(2 T1)
    double qubit_dephasing_rate() const {
        return std::max(0.0, 1.0 / qubit_t2 - 0.5 / qubit_t1);
    }
    double phonon_dephasing_rate() const {
        return std::max(0.0, 1.0 / phonon_t2_ramsey - 0.5 / phonon_t1);
    }

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0)) throw ValidationError(std::string("SystemParams: ") + name + " must be positive");
        };
        positive(g0, "g0");
        positive(qubit_t1, "qubit_t1");
        positive(qubit_t2, "qubit_t2");
        positive(phonon_t1, "phonon_t1");
        positive(phonon_t2_ramsey, "phonon_t2_ramsey");
        auto population = [](double v, const char* name) {
            if (!(v >= 0.0 && v < 0.5)) {
                throw ValidationError(std::string("SystemParams: ") + name + " must lie in [0, 0.5)");
            }
        };
        population(qubit_thermal_pop, "qubit_thermal_pop");
        population(qubit_reset_pop, "qubit_reset_pop");
        if (qubit_t2 > 2.0 * qubit_t1) throw ValidationError("SystemParams: qubit_t2 exceeds 2*qubit_t1");
        if (phonon_t2_ramsey > 2.0 * phonon_t1) {
            throw ValidationError("SystemParams: phonon_t2_ramsey exceeds 2*phonon_t1");
        }
        if (!std::isfinite(nu0_detuning)) throw ValidationError("SystemParams: nu0_detuning must be finite");
    }
};

enum class SegmentKind {
    detuned_idle,
    resonant_interaction,
    qubit_pi,
    qubit_pi_half,
    phonon_displacement_drive,
    qubit_reset,
};

/// One element of a pulse sequence.
///
/// For idle segments `detuning` is the qubit detuning from the phonon (Hz). For
/// displacement drives it is the drive-frame offset from the bare phonon frequency while
/// the qubit sits at SystemParams::nu0_detuning. Qubit rotations with zero duration are
/// instantaneous; a positive duration gives a Gaussian pulse at qubit detuning `detuning`.
struct PulseSegment {
    SegmentKind kind = SegmentKind::detuned_idle;
    double duration = 0.0;
    std::optional<cplx> drive_amplitude;  ///< peak drive rate (rad/s), displacement only
    double detuning = 0.0;
    double axis_phase = 0.0;  ///< rotation axis angle in the xy plane
    double rms_width = 1e-6;  ///< Gaussian envelope width for displacement drives

    static PulseSegment idle(double duration, double detuning_hz) {
        return {SegmentKind::detuned_idle, duration, std::nullopt, detuning_hz};
    }
    static PulseSegment resonant(double duration) {
        return {SegmentKind::resonant_interaction, duration, std::nullopt};
    }
    static PulseSegment pi(double axis_phase = 0.0) {
        return {SegmentKind::qubit_pi, 0.0, std::nullopt, 0.0, axis_phase};
    }
    static PulseSegment pi_half(double axis_phase = 0.0) {
        return {SegmentKind::qubit_pi_half, 0.0, std::nullopt, 0.0, axis_phase};
    }
    static PulseSegment displacement(cplx amplitude, double duration = 4e-6, double rms_width = 1e-6,
                                     double frame_offset_hz = 0.0) {
        return {SegmentKind::phonon_displacement_drive, duration, amplitude, frame_offset_hz, 0.0,
                rms_width};
    }
    static PulseSegment reset() { return {SegmentKind::qubit_reset, 0.0, std::nullopt}; }

    void validate() const {
        if (!(duration >= 0.0) || !std::isfinite(duration)) {
            throw ContractError("PulseSegment: duration must be finite and non-negative");
        }
        const bool is_drive = kind == SegmentKind::phonon_displacement_drive;
        if (is_drive != drive_amplitude.has_value()) {
            throw ContractError("PulseSegment: drive_amplitude present iff kind is a displacement drive");
        }
        if (is_drive && !(rms_width > 0.0)) throw ContractError("PulseSegment: rms_width must be positive");
    }

    /// Peak-normalized envelope of a displacement or finite rotation pulse at time t.
    double envelope(double t) const {
        const double width = kind == SegmentKind::phonon_displacement_drive ? rms_width : duration / 4.0;
        const double x = (t - 0.5 * duration) / width;
        return std::exp(-0.5 * x * x);
    }

    /// Integral of envelope() over [0, duration].
    double envelope_area() const {
        const double width = kind == SegmentKind::phonon_displacement_drive ? rms_width : duration / 4.0;
        return width * std::sqrt(two_pi) * std::erf(0.5 * duration / (width * std::sqrt(2.0)));
    }
};

/// Joint qubit-phonon density matrix.
class JointState {
public:
    static constexpr double psd_tolerance = 1e-7;

    JointState(const CMatrix& rho, Eigen::Index phonon_dim)
        : rho_(rho, psd_tolerance, psd_tolerance), phonon_dim_(phonon_dim) {
        if (phonon_dim <= 0 || rho.rows() != 2 * phonon_dim) {
            throw DimensionError("JointState: rho must have dimension 2*phonon_dim");
        }
    }

    /// Product state with qubit excited population `pe` (diagonal) and given phonon state.
    static JointState product(double pe, const DensityMatrix& phonon) {
        CMatrix q = CMatrix::Zero(2, 2);
        q(0, 0) = 1.0 - pe;
        q(1, 1) = pe;
        return JointState(linalg::kron(q, phonon.matrix()), phonon.dim());
    }

    static JointState ground(Eigen::Index phonon_dim) {
        return product(0.0, DensityMatrix::pure(fock_state(0, phonon_dim)));
    }

    /// Pure |q, psi>.
    static JointState pure(int qubit, const StateVector& phonon) {
        CVector q = CVector::Zero(2);
        q(qubit) = 1.0;
        CVector psi(2 * phonon.dim());
        psi << q(0) * phonon.amplitudes(), q(1) * phonon.amplitudes();
        return JointState(psi * psi.adjoint(), phonon.dim());
    }

    const DensityMatrix& rho() const { return rho_; }
    const CMatrix& matrix() const { return rho_.matrix(); }
    Eigen::Index phonon_dim() const { return phonon_dim_; }
    Eigen::Index dim() const { return 2 * phonon_dim_; }

    double population(int qubit, Eigen::Index n) const {
        const Eigen::Index i = qubit * phonon_dim_ + n;
        return rho_.matrix()(i, i).real();
    }

    double qubit_excited_population() const {
        return rho_.matrix().diagonal().tail(phonon_dim_).real().sum();
    }

    CMatrix phonon_marginal_matrix() const {
        const auto& m = rho_.matrix();
        return m.topLeftCorner(phonon_dim_, phonon_dim_) + m.bottomRightCorner(phonon_dim_, phonon_dim_);
    }

    DensityMatrix phonon_marginal() const {
        return DensityMatrix(phonon_marginal_matrix(), psd_tolerance, psd_tolerance);
    }

    RVector phonon_populations() const { return phonon_marginal_matrix().diagonal().real(); }

    CMatrix qubit_marginal_matrix() const {
        const auto& m = rho_.matrix();
        CMatrix q(2, 2);
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 2; ++j) {
                q(i, j) = m.block(i * phonon_dim_, j * phonon_dim_, phonon_dim_, phonon_dim_).trace();
            }
        }
        return q;
    }

    /// <sigma+ sigma- + a^+ a>
    double mean_excitations() const {
        double total = qubit_excited_population();
        const RVector pops = phonon_populations();
        for (Eigen::Index n = 0; n < phonon_dim_; ++n) total += static_cast<double>(n) * pops(n);
        return total;
    }

    /// <a> of the phonon mode.
    cplx phonon_amplitude() const {
        const CMatrix a = linalg::annihilation(phonon_dim_);
        return (phonon_marginal_matrix() * a).trace();
    }

private:
    DensityMatrix rho_;
    Eigen::Index phonon_dim_;
};

/// Sampled total qubit excited-state probability.
struct TimeTrace {
    std::vector<double> times;
    std::vector<double> pe;

    static constexpr double bound_slack = 1e-9;

    std::size_t size() const { return times.size(); }

    void validate() const {
        if (times.size() != pe.size()) throw ValidationError("TimeTrace: times and pe lengths differ");
        for (std::size_t k = 1; k < times.size(); ++k) {
            if (!(times[k] > times[k - 1])) throw ValidationError("TimeTrace: times not strictly increasing");
        }
        for (double p : pe) {
            if (!(p >= -bound_slack && p <= 1.0 + bound_slack)) {
                throw ValidationError("TimeTrace: pe value outside [0, 1]");
            }
        }
    }
};

/// n+1 uniformly spaced sample times from 0 to t_max.
inline std::vector<double> uniform_grid(double t_max, std::size_t intervals) {
    std::vector<double> t(intervals + 1);
    for (std::size_t k = 0; k <= intervals; ++k) {
        t[k] = t_max * static_cast<double>(k) / static_cast<double>(intervals);
    }
    return t;
}

/// Default probe grid: 0 to 6 us in 10 ns steps.
inline std::vector<double> default_probe_grid() { return uniform_grid(6e-6, 600); }

inline void validate_time_grid(std::span<const double> t) {
    if (t.empty()) throw ValidationError("time grid is empty");
    if (t.front() < 0.0) throw ValidationError("time grid starts before zero");
    if (t.size() < 2) return;
    const double step = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
    for (std::size_t k = 1; k < t.size(); ++k) {
        if (!(t[k] > t[k - 1])) throw ValidationError("time grid not strictly increasing");
        if (std::abs((t[k] - t[k - 1]) - step) > 1e-6 * step) {
            throw ValidationError("time grid is not uniformly sampled");
        }
    }
}

/// Joint-space building blocks for a given phonon truncation.
struct JointOperators {
    explicit JointOperators(Eigen::Index phonon_dim) : phonon_dim(phonon_dim) {
        const CMatrix id_q = CMatrix::Identity(2, 2);
        const CMatrix id_p = CMatrix::Identity(phonon_dim, phonon_dim);
        CMatrix sm_q = CMatrix::Zero(2, 2);
        sm_q(0, 1) = 1.0;
        CMatrix pe_q = CMatrix::Zero(2, 2);
        pe_q(1, 1) = 1.0;
        CMatrix sz_q = CMatrix::Zero(2, 2);
        sz_q(0, 0) = -1.0;
        sz_q(1, 1) = 1.0;
        const CMatrix a_p = linalg::annihilation(phonon_dim);
        sm = linalg::kron(sm_q, id_p);
        sz = linalg::kron(sz_q, id_p);
        proj_e = linalg::kron(pe_q, id_p);
        a = linalg::kron(id_q, a_p);
        num = linalg::kron(id_q, linalg::number(phonon_dim));
    }

    Eigen::Index phonon_dim;
    CMatrix sm;      ///< sigma- (x) 1
    CMatrix sz;      ///< sigma_z (x) 1, +1 on |e>
    CMatrix proj_e;  ///< |e><e| (x) 1
    CMatrix a;       ///< 1 (x) a
    CMatrix num;     ///< 1 (x) a^+ a
};

namespace detail {

/// (Delta_q - Delta_f) |e><e| - Delta_f a^+a + g0 (sigma+ a + sigma- a^+), rates in rad/s.
inline CMatrix jc_hamiltonian(const JointOperators& ops, double g0, double qubit_detuning,
                              double frame_shift) {
    const CMatrix coupling = ops.sm.adjoint() * ops.a;
    return (qubit_detuning - frame_shift) * ops.proj_e - frame_shift * ops.num +
           g0 * (coupling + coupling.adjoint());
}

inline Lindbladian make_lindbladian(const SystemParams& p, const JointOperators& ops,
                                    double qubit_detuning, double frame_shift) {
    Lindbladian l(jc_hamiltonian(ops, p.g0, qubit_detuning, frame_shift));
    // The qubit relaxes to |g>; its thermal population only enters the initial state.
    l.add_collapse(ops.sm, p.qubit_decay_rate());
    // sqrt(gamma_phi/2) sigma_z damps qubit coherences at gamma_phi.
    l.add_collapse(ops.sz, 0.5 * p.qubit_dephasing_rate());
    l.add_collapse(ops.a, p.phonon_decay_rate());
    // sqrt(2 gamma_phi) a^+a damps <n|rho|n+1> at gamma_phi.
    l.add_collapse(ops.num, 2.0 * p.phonon_dephasing_rate());
    return l;
}

inline CMatrix qubit_rotation(double angle, double axis_phase, Eigen::Index phonon_dim) {
    CMatrix r(2, 2);
    const double c = std::cos(0.5 * angle), s = std::sin(0.5 * angle);
    r(0, 0) = c;
    r(1, 1) = c;
    r(0, 1) = -I * s * std::exp(-I * axis_phase);
    r(1, 0) = -I * s * std::exp(I * axis_phase);
    return linalg::kron(r, CMatrix::Identity(phonon_dim, phonon_dim));
}

inline double rotation_angle(SegmentKind kind) {
    return kind == SegmentKind::qubit_pi ? pi : 0.5 * pi;
}

}  // namespace detail

/// Rotating-frame Hamiltonian of a segment at time t (seconds from segment start).
/// Instantaneous rotations and resets have no Hamiltonian and raise ContractError.
inline Operator build_hamiltonian(const SystemParams& params, const PulseSegment& segment,
                                  Eigen::Index phonon_dim, double t = 0.0) {
    segment.validate();
    const JointOperators ops(phonon_dim);
    switch (segment.kind) {
        case SegmentKind::detuned_idle:
            return Operator(detail::jc_hamiltonian(ops, params.g0, two_pi * segment.detuning, 0.0));
        case SegmentKind::resonant_interaction:
            return Operator(detail::jc_hamiltonian(ops, params.g0, 0.0, 0.0));
        case SegmentKind::phonon_displacement_drive: {
            const double shift = two_pi * segment.detuning;
            CMatrix h = detail::jc_hamiltonian(ops, params.g0, two_pi * params.nu0_detuning, shift);
            const cplx eps = *segment.drive_amplitude * segment.envelope(t);
            const CMatrix adag = ops.a.adjoint();
            h += eps * adag + std::conj(eps) * ops.a;
            return Operator(std::move(h));
        }
        case SegmentKind::qubit_pi:
        case SegmentKind::qubit_pi_half: {
            if (segment.duration == 0.0) break;
            const double delta = two_pi * segment.detuning;
            CMatrix h = detail::jc_hamiltonian(ops, params.g0, delta, 0.0);
            const double omega = detail::rotation_angle(segment.kind) / segment.envelope_area() *
                                 segment.envelope(t);
            const cplx c = 0.5 * omega * std::exp(I * (segment.axis_phase + delta * t));
            const CMatrix sp = ops.sm.adjoint();
            h += c * sp + std::conj(c) * ops.sm;
            return Operator(std::move(h));
        }
        case SegmentKind::qubit_reset:
            break;
    }
    throw ContractError("build_hamiltonian: segment kind has no Hamiltonian");
}

/// Replaces the qubit marginal with a thermal mixture at `excited_pop`.
inline JointState reset_qubit(const JointState& state, double excited_pop) {
    return JointState::product(excited_pop, state.phonon_marginal());
}

/// Evolves `state` through one segment under the full decoherence model.
inline JointState evolve(const JointState& state, const SystemParams& params,
                         const PulseSegment& segment, const ode::Options& opt = {}) {
    params.validate();
    segment.validate();
    const Eigen::Index d = state.phonon_dim();
    if (segment.kind == SegmentKind::qubit_reset) return reset_qubit(state, params.qubit_reset_pop);
    if (segment.duration == 0.0) {
        if (segment.kind == SegmentKind::qubit_pi || segment.kind == SegmentKind::qubit_pi_half) {
            const CMatrix r =
                detail::qubit_rotation(detail::rotation_angle(segment.kind), segment.axis_phase, d);
            return JointState(r * state.matrix() * r.adjoint(), d);
        }
        return state;
    }

    const JointOperators ops(d);
    CMatrix rho = state.matrix();
    switch (segment.kind) {
        case SegmentKind::detuned_idle:
        case SegmentKind::resonant_interaction: {
            const double delta =
                segment.kind == SegmentKind::detuned_idle ? two_pi * segment.detuning : 0.0;
            detail::make_lindbladian(params, ops, delta, 0.0).propagate(rho, 0.0, segment.duration, opt);
            break;
        }
        case SegmentKind::phonon_displacement_drive: {
            Lindbladian l = detail::make_lindbladian(params, ops, two_pi * params.nu0_detuning,
                                                     two_pi * segment.detuning);
            const cplx amp = *segment.drive_amplitude;
            if (amp != cplx{}) {
                l.add_drive(ops.a.adjoint(), [segment, amp](double t) { return amp * segment.envelope(t); });
            }
            l.propagate(rho, 0.0, segment.duration, opt);
            break;
        }
        case SegmentKind::qubit_pi:
        case SegmentKind::qubit_pi_half: {
            const double delta = two_pi * segment.detuning;
            Lindbladian l = detail::make_lindbladian(params, ops, delta, 0.0);
            const double scale = detail::rotation_angle(segment.kind) / segment.envelope_area();
            l.add_drive(ops.sm.adjoint(), [segment, scale, delta](double t) {
                return 0.5 * scale * segment.envelope(t) * std::exp(I * (segment.axis_phase + delta * t));
            });
            l.propagate(rho, 0.0, segment.duration, opt);
            break;
        }
        case SegmentKind::qubit_reset:
            break;
    }
    const double tr = rho.trace().real();
    if (std::abs(tr - 1.0) > 1e-8) {
        throw SolverError("evolve: trace drifted to " + std::to_string(tr));
    }
    return JointState(rho, d);
}

inline JointState evolve(JointState state, const SystemParams& params,
                         std::span<const PulseSegment> sequence, const ode::Options& opt = {}) {
    for (const auto& seg : sequence) state = evolve(state, params, seg, opt);
    return state;
}

/// Swap time in the one-excitation manifold, pi / (2 g0).
inline double swap_time(const SystemParams& p) { return pi / (2.0 * p.g0); }

/// State-preparation recipe for the phonon mode.
struct Preparation {
    enum class Kind { fock, superposition01 };
    Kind kind = Kind::fock;
    int n = 0;

    static Preparation vacuum() { return {Kind::fock, 0}; }
    static Preparation fock(int n) { return {Kind::fock, n}; }
    static Preparation superposition01() { return {Kind::superposition01, 1}; }

    int max_fock() const { return n; }

    StateVector target(Eigen::Index dim) const {
        if (kind == Kind::fock) return fock_state(n, dim);
        CVector amps = CVector::Zero(dim);
        amps(0) = 1.0;
        amps(1) = 1.0;
        return StateVector(std::move(amps));
    }

    std::string name() const {
        if (kind == Kind::superposition01) return "superposition01";
        return "fock" + std::to_string(n);
    }

    /// Pulse sequence after thermal initialization.
    std::vector<PulseSegment> sequence(const SystemParams& p) const {
        std::vector<PulseSegment> seq{PulseSegment::reset()};
        if (kind == Kind::superposition01) {
            // Axis pi puts the qubit in (|g> + i|e>)/sqrt2; the swap maps i|e,0> to |g,1>.
            seq.push_back(PulseSegment::pi_half(pi));
            seq.push_back(PulseSegment::resonant(swap_time(p)));
            return seq;
        }
        for (int k = 1; k <= n; ++k) {
            seq.push_back(PulseSegment::pi());
            seq.push_back(PulseSegment::resonant(swap_time(p) / std::sqrt(static_cast<double>(k))));
        }
        return seq;
    }
};

/// Thermal qubit, phonon vacuum.
inline JointState thermal_initial_state(const SystemParams& p, Eigen::Index phonon_dim) {
    return JointState::product(p.qubit_thermal_pop, DensityMatrix::pure(fock_state(0, phonon_dim)));
}

inline void check_truncation(const JointState& s, const char* where) {
    const Eigen::Index top = s.phonon_dim() - 1;
    const double leak = s.population(0, top) + s.population(1, top);
    if (leak > 1e-4) {
        throw TruncationError(std::string(where) + ": population " + std::to_string(leak) +
                              " at the top Fock level; increase phonon_dim");
    }
}

inline JointState prepare(const SystemParams& params, const Preparation& prep,
                          Eigen::Index phonon_dim = 20, const ode::Options& opt = {}) {
    if (prep.n < 0) throw ContractError("prepare: Fock number must be non-negative");
    if (phonon_dim < prep.max_fock() + 6) {
        throw TruncationError("prepare: phonon_dim " + std::to_string(phonon_dim) +
                              " below N + 6 for N = " + std::to_string(prep.max_fock()));
    }
    const auto seq = prep.sequence(params);
    JointState s = evolve(thermal_initial_state(params, phonon_dim), params, seq, opt);
    check_truncation(s, "prepare");
    return s;
}

/// Thermal init, qubit reset, then N rounds of (pi pulse, swap of length T_s/sqrt(k)).
inline JointState simulate_fock_preparation(const SystemParams& params, int n,
                                            Eigen::Index phonon_dim = 20,
                                            const ode::Options& opt = {}) {
    return prepare(params, Preparation::fock(n), phonon_dim, opt);
}

/// Resonant probe by forward integration: pe(t) after interacting for each grid time.
inline TimeTrace simulate_probe_trace(const SystemParams& params, const JointState& state,
                                      std::span<const double> t_grid, const ode::Options& opt = {}) {
    params.validate();
    validate_time_grid(t_grid);
    const JointOperators ops(state.phonon_dim());
    const Lindbladian l = detail::make_lindbladian(params, ops, 0.0, 0.0);
    TimeTrace trace;
    trace.times.assign(t_grid.begin(), t_grid.end());
    trace.pe.resize(t_grid.size());
    CMatrix rho = state.matrix();
    const Eigen::Index d = state.phonon_dim();
    l.propagate_sampled(rho, 0.0, t_grid, opt, [&](std::size_t k, const CMatrix& r) {
        trace.pe[k] = r.diagonal().tail(d).real().sum();
    });
    trace.validate();
    return trace;
}

/// Heisenberg-picture probe: precomputes E_k = exp(L^+ t_k)(|e><e|) once so that
/// pe(t_k) = Tr[E_k rho] for any initial state at negligible cost.
class ProbeKernel {
public:
    ProbeKernel(const SystemParams& params, Eigen::Index phonon_dim, std::vector<double> t_grid,
                const ode::Options& opt = {})
        : phonon_dim_(phonon_dim), times_(std::move(t_grid)) {
        params.validate();
        validate_time_grid(times_);
        const JointOperators ops(phonon_dim);
        const Lindbladian l = detail::make_lindbladian(params, ops, 0.0, 0.0);
        CMatrix obs = ops.proj_e;
        observables_.reserve(times_.size());
        l.propagate_adjoint_sampled(obs, times_, opt, [&](std::size_t, const CMatrix& o) {
            observables_.push_back(o);
        });
    }

    Eigen::Index phonon_dim() const { return phonon_dim_; }
    const std::vector<double>& times() const { return times_; }

    TimeTrace trace(const JointState& state) const {
        if (state.phonon_dim() != phonon_dim_) throw DimensionError("ProbeKernel: phonon_dim mismatch");
        TimeTrace tr;
        tr.times = times_;
        tr.pe.resize(times_.size());
        const CMatrix rho_t = state.matrix().transpose();
        for (std::size_t k = 0; k < times_.size(); ++k) {
            tr.pe[k] = observables_[k].cwiseProduct(rho_t).sum().real();
        }
        tr.validate();
        return tr;
    }

    /// Trace for the ideal initial state |g, n>.
    TimeTrace basis_trace(Eigen::Index n) const {
        if (n < 0 || n >= phonon_dim_) throw DimensionError("ProbeKernel: Fock index out of range");
        TimeTrace tr;
        tr.times = times_;
        tr.pe.resize(times_.size());
        for (std::size_t k = 0; k < times_.size(); ++k) tr.pe[k] = observables_[k](n, n).real();
        tr.validate();
        return tr;
    }

private:
    Eigen::Index phonon_dim_;
    std::vector<double> times_;
    std::vector<CMatrix> observables_;
};

/// Probe traces for |g,n>, n = 1..n_max.
inline std::vector<TimeTrace> simulate_basis_traces(const SystemParams& params, int n_max,
                                                    std::span<const double> t_grid,
                                                    Eigen::Index phonon_dim = 20,
                                                    const ode::Options& opt = {}) {
    if (n_max < 1) throw ContractError("simulate_basis_traces: n_max must be at least 1");
    if (phonon_dim < n_max + 6) {
        throw TruncationError("simulate_basis_traces: phonon_dim below n_max + 6");
    }
    const ProbeKernel kernel(params, phonon_dim, {t_grid.begin(), t_grid.end()}, opt);
    std::vector<TimeTrace> out;
    for (int n = 1; n <= n_max; ++n) out.push_back(kernel.basis_trace(n));
    return out;
}

/// Frequency shift (rad/s) of the phonon-like dressed state when the qubit sits at nu0.
inline double dressed_phonon_shift(const SystemParams& p) {
    const double delta = two_pi * p.nu0_detuning;
    if (delta == 0.0) return 0.0;
    return 0.5 * delta - std::copysign(1.0, delta) * std::sqrt(0.25 * delta * delta + p.g0 * p.g0);
}

/// Linear response of the pulsed drive: net <a> = gain * (-i * amplitude * envelope_area).
struct DriveCalibration {
    cplx gain{1.0, 0.0};
    double frame_offset_hz = 0.0;
    double duration = 4e-6;
    double rms_width = 1e-6;

    PulseSegment segment_for(cplx alpha) const {
        const PulseSegment shape = PulseSegment::displacement(0.0, duration, rms_width, frame_offset_hz);
        const cplx amp = I * alpha / (gain * shape.envelope_area());
        return PulseSegment::displacement(amp, duration, rms_width, frame_offset_hz);
    }
};

/// Calibrates the Gaussian phonon drive by simulating a small displacement of |g,0>.
/// The drive frame follows the dressed phonon frequency.
inline DriveCalibration calibrate_drive(const SystemParams& params, Eigen::Index phonon_dim = 20,
                                        double duration = 4e-6, double rms_width = 1e-6,
                                        const ode::Options& opt = {}) {
    DriveCalibration cal;
    cal.frame_offset_hz = dressed_phonon_shift(params) / two_pi;
    cal.duration = duration;
    cal.rms_width = rms_width;
    constexpr double reference = 0.25;
    const PulseSegment seg = cal.segment_for(reference);
    const JointState out = evolve(JointState::ground(phonon_dim), params, seg, opt);
    cal.gain = out.phonon_amplitude() / reference;
    if (!(std::abs(cal.gain) > 1e-3)) throw CalibrationError("calibrate_drive: no drive response");
    return cal;
}

struct DisplacementOptions {
    enum class Mode { pulsed, ideal };
    Mode mode = Mode::pulsed;
    double calibrated_range = 2.0;
    std::optional<DriveCalibration> calibration;  ///< computed on demand if absent
    std::vector<std::string>* warnings = nullptr;
};

/// Displaces the phonon by alpha, either through the calibrated Gaussian drive with the
/// qubit parked at nu0 or as an instantaneous ideal D(alpha).
inline JointState simulate_displacement(const SystemParams& params, const JointState& state, cplx alpha,
                                        const DisplacementOptions& dopt = {},
                                        const ode::Options& opt = {}) {
    if (std::abs(alpha) > dopt.calibrated_range && dopt.warnings != nullptr) {
        dopt.warnings->push_back("calibration: |alpha| = " + std::to_string(std::abs(alpha)) +
                                 " beyond calibrated range " + std::to_string(dopt.calibrated_range));
    }
    const Eigen::Index d = state.phonon_dim();
    JointState out = state;
    if (dopt.mode == DisplacementOptions::Mode::ideal) {
        const CMatrix u = linalg::kron(CMatrix::Identity(2, 2), displacement_operator(alpha, d).matrix());
        out = JointState(u * state.matrix() * u.adjoint(), d);
    } else {
        const DriveCalibration cal = dopt.calibration ? *dopt.calibration : calibrate_drive(params, d);
        out = evolve(state, params, cal.segment_for(alpha), opt);
    }
    check_truncation(out, "simulate_displacement");
    return out;
}

/// Excited-state probability versus (detuning row, time column) after exciting |g,0>.
inline RMatrix simulate_chevron(const SystemParams& params, std::span<const double> detunings_hz,
                                std::span<const double> t_grid, Eigen::Index phonon_dim = 4,
                                const ode::Options& opt = {}) {
    params.validate();
    if (detunings_hz.empty()) throw ValidationError("simulate_chevron: empty detuning grid");
    validate_time_grid(t_grid);
    const JointOperators ops(phonon_dim);
    const JointState start = evolve(JointState::ground(phonon_dim), params, PulseSegment::pi());
    RMatrix out(static_cast<Eigen::Index>(detunings_hz.size()), static_cast<Eigen::Index>(t_grid.size()));
    for (std::size_t i = 0; i < detunings_hz.size(); ++i) {
        const Lindbladian l = detail::make_lindbladian(params, ops, two_pi * detunings_hz[i], 0.0);
        CMatrix rho = start.matrix();
        l.propagate_sampled(rho, 0.0, t_grid, opt, [&](std::size_t k, const CMatrix& r) {
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                r.diagonal().tail(phonon_dim).real().sum();
        });
    }
    return out;
}

}  // namespace qad
