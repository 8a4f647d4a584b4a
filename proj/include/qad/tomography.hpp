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

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "qad/dynamics.hpp"
#include "qad/lbfgs.hpp"
#include "qad/populations.hpp"

namespace qad {

struct WignerGrid {
    std::vector<cplx> alphas;
    std::vector<double> parities;
    std::optional<std::vector<double>> uncertainties;

    /// Parity values may stray slightly outside [-1, 1] after noisy extraction; only
    /// gross violations are rejected.
    static constexpr double parity_slack = 0.5;

    std::size_t size() const { return alphas.size(); }

    void validate() const {
        if (alphas.empty()) throw ValidationError("WignerGrid: empty grid");
        if (parities.size() != alphas.size()) throw ValidationError("WignerGrid: parities/alphas length mismatch");
        if (uncertainties) {
            if (uncertainties->size() != alphas.size()) {
                throw ValidationError("WignerGrid: uncertainties/alphas length mismatch");
            }
            for (double s : *uncertainties) {
                if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("WignerGrid: uncertainties must be > 0");
            }
        }
        for (double p : parities) {
            if (!std::isfinite(p) || std::abs(p) > 1.0 + parity_slack) {
                throw ValidationError("WignerGrid: parity value out of range");
            }
        }
        auto less = [](const cplx& a, const cplx& b) {
            return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
        };
        std::set<cplx, decltype(less)> seen(less);
        for (const cplx& a : alphas) {
            if (!seen.insert(a).second) throw ValidationError("WignerGrid: duplicate alpha");
        }
    }
};

/// W(alpha) = (2/pi) P(alpha)
inline double wigner_from_parity(double parity) { return 2.0 / pi * parity; }

/// n x n uniform grid over Re, Im in [-extent, extent], row-major in Im then Re.
inline std::vector<cplx> square_alpha_grid(int n = 21, double extent = 2.0) {
    if (n < 1) throw ValidationError("square_alpha_grid: n must be positive");
    if (!(extent >= 0.0)) throw ValidationError("square_alpha_grid: extent must be non-negative");
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    const double step = n > 1 ? 2.0 * extent / (n - 1) : 0.0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double re = n > 1 ? -extent + step * i : 0.0;
            const double im = n > 1 ? -extent + step * j : 0.0;
            out.emplace_back(re, im);
        }
    }
    return out;
}

/// <m|D(beta)|n> in closed form.
inline cplx displacement_element(cplx beta, int m, int n) {
    const double x = std::norm(beta);
    const double gauss = std::exp(-0.5 * x);
    if (m >= n) {
        const double pref = std::exp(0.5 * (std::lgamma(n + 1.0) - std::lgamma(m + 1.0)));
        return pref * std::pow(beta, m - n) * gauss *
               std::assoc_laguerre(static_cast<unsigned>(n), static_cast<unsigned>(m - n), x);
    }
    const double pref = std::exp(0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0)));
    return pref * std::pow(-std::conj(beta), n - m) * gauss *
           std::assoc_laguerre(static_cast<unsigned>(m), static_cast<unsigned>(n - m), x);
}

/// Truncation of D(alpha) P D(alpha)^+ = D(2 alpha) P to the first dim levels, so that
/// Tr[D(-alpha) rho D(alpha) P] = Tr[rho Pi] for rho supported there.
inline CMatrix displaced_parity_observable(cplx alpha, Eigen::Index dim) {
    if (dim < 1) throw DimensionError("displaced_parity_observable: dim must be positive");
    CMatrix out(dim, dim);
    for (Eigen::Index m = 0; m < dim; ++m) {
        for (Eigen::Index n = 0; n < dim; ++n) {
            const double sign = (n % 2 == 0) ? 1.0 : -1.0;
            out(m, n) = sign * displacement_element(2.0 * alpha, static_cast<int>(m), static_cast<int>(n));
        }
    }
    return out;
}

/// Displaced parity of a phonon density matrix.
inline double displaced_parity(const DensityMatrix& rho, cplx alpha) {
    const CMatrix obs = displaced_parity_observable(alpha, rho.dim());
    return obs.cwiseProduct(rho.matrix().transpose()).sum().real();
}

// ---------------------------------------------------------------------------------------
// Displacement calibration

struct CalibrationResult {
    double scale = 0.0;
    double residual = 0.0;
    std::vector<double> total_variation;  ///< per amplitude, against Poisson(|scale*amp|^2)
};

inline RVector poisson_populations(double mean, int n_max) {
    if (!(mean >= 0.0)) throw ContractError("poisson_populations: negative mean");
    RVector p(n_max + 1);
    for (int n = 0; n <= n_max; ++n) {
        p(n) = mean == 0.0 ? (n == 0 ? 1.0 : 0.0)
                           : std::exp(n * std::log(mean) - mean - std::lgamma(n + 1.0));
    }
    return p;
}

inline double total_variation(const RVector& a, const RVector& b) {
    const Eigen::Index n = std::max(a.size(), b.size());
    double s = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double x = k < a.size() ? a(k) : 0.0;
        const double y = k < b.size() ? b(k) : 0.0;
        s += std::abs(x - y);
    }
    return 0.5 * s;
}

namespace detail {
inline double mean_number(const PopulationDistribution& d) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < d.p.size(); ++n) s += static_cast<double>(n) * d.p(n);
    return s;
}
}  // namespace detail

/// Single real scale s with populations ~ Poisson(|s * amp|^2), by least squares over
/// all amplitudes and Fock levels.
inline CalibrationResult calibrate_displacement(std::span<const double> drive_amps,
                                                std::span<const PopulationDistribution> measured) {
    if (drive_amps.size() != measured.size()) {
        throw ContractError("calibrate_displacement: amplitude/population count mismatch");
    }
    std::set<double> distinct;
    for (double a : drive_amps) {
        if (!std::isfinite(a)) throw CalibrationError("calibrate_displacement: non-finite amplitude");
        if (a != 0.0) distinct.insert(std::abs(a));
    }
    if (drive_amps.size() < 3 || distinct.size() < 2) {
        throw CalibrationError("calibrate_displacement: need at least 3 amplitudes with 2 distinct non-zero values");
    }
    for (const auto& d : measured) d.validate(1e-6);

    // Mean phonon number must grow with |amp|.
    std::vector<std::size_t> order(drive_amps.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::abs(drive_amps[a]) < std::abs(drive_amps[b]); });
    constexpr double monotone_slack = 0.05;
    for (std::size_t k = 1; k < order.size(); ++k) {
        const double prev = detail::mean_number(measured[order[k - 1]]);
        const double cur = detail::mean_number(measured[order[k]]);
        if (cur < prev - monotone_slack) {
            throw CalibrationError("calibrate_displacement: mean phonon number not monotone in amplitude");
        }
    }

    // Moment estimate for the bracket: nbar_i ~ s^2 a_i^2.
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < drive_amps.size(); ++i) {
        const double a2 = drive_amps[i] * drive_amps[i];
        num += detail::mean_number(measured[i]) * a2;
        den += a2 * a2;
    }
    if (!(num > 0.0)) throw CalibrationError("calibrate_displacement: no displacement response");
    const double s0 = std::sqrt(num / den);

    auto cost = [&](double s) {
        double c = 0.0;
        for (std::size_t i = 0; i < drive_amps.size(); ++i) {
            const double mean = s * s * drive_amps[i] * drive_amps[i];
            c += (measured[i].p - poisson_populations(mean, measured[i].n_max())).squaredNorm();
        }
        return c;
    };
    const auto [s_best, c_best] = boost::math::tools::brent_find_minima(cost, 0.25 * s0, 4.0 * s0, 40);

    CalibrationResult out;
    out.scale = s_best;
    out.residual = c_best;
    for (std::size_t i = 0; i < drive_amps.size(); ++i) {
        const double mean = s_best * s_best * drive_amps[i] * drive_amps[i];
        out.total_variation.push_back(
            total_variation(measured[i].p, poisson_populations(mean, measured[i].n_max())));
    }
    if (!(out.scale > 0.0)) throw CalibrationError("calibrate_displacement: non-positive scale");
    return out;
}

// ---------------------------------------------------------------------------------------
// Displaced-parity measurement

struct ParityMeasurementOptions {
    Eigen::Index phonon_dim = 32;
    int n_max = 14;
    DisplacementOptions::Mode displacement = DisplacementOptions::Mode::pulsed;
    double calibrated_range = 2.0 * std::sqrt(2.0);
    std::vector<double> probe_grid = default_probe_grid();
    ode::Options ode{};
};

/// Prepare, displace by -alpha, probe, extract populations and sum their parity. The
/// probe kernel, basis traces and drive calibration are built once per instance.
class DisplacedParityMeasurement {
public:
    DisplacedParityMeasurement(const SystemParams& params, ParityMeasurementOptions opt = {})
        : params_(params), opt_(std::move(opt)) {
        params_.validate();
        if (opt_.n_max < 1) throw ContractError("DisplacedParityMeasurement: n_max must be at least 1");
        if (opt_.phonon_dim < opt_.n_max + 6) {
            throw TruncationError("DisplacedParityMeasurement: phonon_dim below n_max + 6");
        }
        kernel_.emplace(params_, opt_.phonon_dim, opt_.probe_grid, opt_.ode);
        for (int n = 1; n <= opt_.n_max; ++n) basis_.push_back(kernel_->basis_trace(n));
        if (opt_.displacement == DisplacementOptions::Mode::pulsed) {
            calibration_ = calibrate_drive(params_, opt_.phonon_dim, 4e-6, 1e-6, opt_.ode);
        }
    }

    const ParityMeasurementOptions& options() const { return opt_; }
    const std::vector<TimeTrace>& basis() const { return basis_; }
    const ProbeKernel& kernel() const { return *kernel_; }

    JointState prepare(const Preparation& prep) const {
        return qad::prepare(params_, prep, opt_.phonon_dim, opt_.ode);
    }

    JointState displaced(const JointState& prepared, cplx alpha, std::vector<std::string>* warnings = nullptr) const {
        DisplacementOptions d;
        d.mode = opt_.displacement;
        d.calibrated_range = opt_.calibrated_range;
        d.calibration = calibration_;
        d.warnings = warnings;
        return simulate_displacement(params_, prepared, -alpha, d, opt_.ode);
    }

    PopulationDistribution populations(const JointState& prepared, cplx alpha,
                                       std::vector<std::string>* warnings = nullptr) const {
        const TimeTrace tr = kernel_->trace(displaced(prepared, alpha, warnings));
        return extract_populations(tr, basis_, opt_.n_max);
    }

    double parity(const JointState& prepared, cplx alpha, std::vector<std::string>* warnings = nullptr) const {
        return parity_from_populations(populations(prepared, alpha, warnings));
    }

private:
    SystemParams params_;
    ParityMeasurementOptions opt_;
    std::optional<ProbeKernel> kernel_;
    std::vector<TimeTrace> basis_;
    std::optional<DriveCalibration> calibration_;
};

inline double measure_displaced_parity(const SystemParams& params, const Preparation& prep, cplx alpha,
                                       const ParityMeasurementOptions& opt = {}) {
    if (std::abs(alpha) > opt.calibrated_range) {
        throw ContractError("measure_displaced_parity: |alpha| beyond calibrated range");
    }
    const DisplacedParityMeasurement m(params, opt);
    return m.parity(m.prepare(prep), alpha);
}

inline WignerGrid wigner_scan(const SystemParams& params, const Preparation& prep, std::span<const cplx> grid,
                              const ParityMeasurementOptions& opt = {}) {
    if (grid.empty()) throw ValidationError("wigner_scan: empty grid");
    for (const cplx& a : grid) {
        if (std::abs(a) > opt.calibrated_range) throw ContractError("wigner_scan: |alpha| beyond calibrated range");
    }
    const DisplacedParityMeasurement m(params, opt);
    const JointState prepared = m.prepare(prep);
    WignerGrid out;
    out.alphas.assign(grid.begin(), grid.end());
    out.parities.reserve(grid.size());
    for (const cplx& a : grid) out.parities.push_back(m.parity(prepared, a));
    return out;
}

/// Noiseless parities of a known phonon state.
inline WignerGrid synthetic_wigner_grid(const DensityMatrix& rho, std::span<const cplx> grid) {
    WignerGrid out;
    out.alphas.assign(grid.begin(), grid.end());
    for (const cplx& a : grid) out.parities.push_back(displaced_parity(rho, a));
    return out;
}

// ---------------------------------------------------------------------------------------
// Maximum-likelihood reconstruction

struct MleOptions {
    std::uint64_t seed = 1;
    double init_perturbation = 0.1;
    bool use_uncertainties = false;  ///< weight residuals by 1/sigma^2 when the grid carries them
    optim::LbfgsOptions lbfgs{};
};

struct MleResult {
    DensityMatrix rho;
    double objective = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    std::vector<std::string> warnings;
};

/// Gaussian negative log-likelihood 0.5 * sum w_i (y_i - Tr[Pi_i rho])^2 and its
/// gradient in the triangular factor of rho = T^+ T / Tr(T^+ T).
class ParityLikelihood {
public:
    ParityLikelihood(const WignerGrid& data, Eigen::Index dim, bool use_uncertainties)
        : dim_(dim), y_(static_cast<Eigen::Index>(data.size())), w_(static_cast<Eigen::Index>(data.size())) {
        data.validate();
        if (dim < 1) throw DimensionError("ParityLikelihood: dim must be positive");
        const auto npts = static_cast<Eigen::Index>(data.size());
        obs_.resize(dim * dim, npts);
        for (Eigen::Index i = 0; i < npts; ++i) {
            const CMatrix pi_i = displaced_parity_observable(data.alphas[static_cast<std::size_t>(i)], dim);
            obs_.col(i) = Eigen::Map<const CVector>(pi_i.data(), dim * dim);
            y_(i) = data.parities[static_cast<std::size_t>(i)];
            const double s = (use_uncertainties && data.uncertainties)
                                 ? (*data.uncertainties)[static_cast<std::size_t>(i)]
                                 : 1.0;
            w_(i) = 1.0 / (s * s);
        }
    }

    Eigen::Index dim() const { return dim_; }
    Eigen::Index num_parameters() const { return dim_ * (dim_ + 1); }

    RVector predictions(const CMatrix& rho) const {
        const CMatrix rt = rho.transpose();
        const Eigen::Map<const CVector> v(rt.data(), dim_ * dim_);
        return (obs_.transpose() * v).real();
    }

    double value(const CMatrix& rho) const {
        const RVector r = y_ - predictions(rho);
        return 0.5 * r.cwiseProduct(w_).dot(r);
    }

    CMatrix unpack(const RVector& x) const {
        CMatrix t = CMatrix::Zero(dim_, dim_);
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < dim_; ++j) {
            for (Eigen::Index c = j; c < dim_; ++c, k += 2) t(j, c) = cplx(x(k), x(k + 1));
        }
        return t;
    }

    RVector pack(const CMatrix& t) const {
        RVector x(num_parameters());
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < dim_; ++j) {
            for (Eigen::Index c = j; c < dim_; ++c, k += 2) {
                x(k) = t(j, c).real();
                x(k + 1) = t(j, c).imag();
            }
        }
        return x;
    }

    static CMatrix density(const CMatrix& t) {
        CMatrix m = t.adjoint() * t;
        return m / m.trace().real();
    }

    double operator()(const RVector& x, RVector& grad) const {
        const CMatrix t = unpack(x);
        CMatrix m = t.adjoint() * t;
        const double tr = m.trace().real();
        if (!(tr > 0.0)) {
            grad = RVector::Zero(x.size());
            return std::numeric_limits<double>::infinity();
        }
        const CMatrix rho = m / tr;
        const RVector r = y_ - predictions(rho);
        const RVector wr = r.cwiseProduct(w_);
        const CVector fv = obs_ * (-wr).cast<cplx>();
        const CMatrix f = Eigen::Map<const CMatrix>(fv.data(), dim_, dim_);
        const double f_rho = f.cwiseProduct(rho.transpose()).sum().real();
        CMatrix fp = f / tr;
        fp.diagonal().array() -= f_rho / tr;
        const CMatrix g = t * fp;
        grad.resize(x.size());
        Eigen::Index k = 0;
        for (Eigen::Index j = 0; j < dim_; ++j) {
            for (Eigen::Index c = j; c < dim_; ++c, k += 2) {
                grad(k) = 2.0 * g(j, c).real();
                grad(k + 1) = 2.0 * g(j, c).imag();
            }
        }
        return 0.5 * wr.dot(r);
    }

private:
    Eigen::Index dim_;
    CMatrix obs_;  ///< column i holds vec(Pi_i)
    RVector y_, w_;
};

inline MleResult mle_reconstruct_detailed(const WignerGrid& data, Eigen::Index dim = 10,
                                          const MleOptions& opt = {}) {
    const ParityLikelihood like(data, dim, opt.use_uncertainties);
    std::vector<std::string> warnings;
    if (static_cast<Eigen::Index>(data.size()) < dim * dim) {
        warnings.push_back("conditioning: " + std::to_string(data.size()) + " grid points below dim^2 = " +
                           std::to_string(dim * dim));
    }
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    CMatrix t0 = CMatrix::Identity(dim, dim) / std::sqrt(static_cast<double>(dim));
    for (Eigen::Index j = 0; j < dim; ++j) {
        for (Eigen::Index c = j; c < dim; ++c) {
            t0(j, c) += opt.init_perturbation / std::sqrt(static_cast<double>(dim)) * cplx(normal(rng), normal(rng));
        }
    }
    const optim::LbfgsResult res =
        optim::minimize_lbfgs([&](const RVector& x, RVector& g) { return like(x, g); }, like.pack(t0), opt.lbfgs);
    if (res.status != optim::LbfgsStatus::converged) {
        throw OptimizationError("mle_reconstruct: no convergence after " + std::to_string(res.iterations) +
                                " iterations, gradient norm " + std::to_string(res.gradient_norm));
    }
    CMatrix rho = ParityLikelihood::density(like.unpack(res.x));
    rho = 0.5 * (rho + rho.adjoint());
    MleResult out{DensityMatrix(rho, 1e-8, 1e-8), res.value, res.gradient_norm, res.iterations, std::move(warnings)};
    return out;
}

inline DensityMatrix mle_reconstruct(const WignerGrid& data, Eigen::Index dim = 10, const MleOptions& opt = {}) {
    return mle_reconstruct_detailed(data, dim, opt).rho;
}

// ---------------------------------------------------------------------------------------
// Reporting

struct ReconstructionReport {
    double fidelity = 0.0;
    std::vector<cplx> grid;
    std::vector<double> parity;  ///< predicted on grid
    std::vector<double> wigner;
    std::vector<double> cut_re;  ///< Im(alpha) = 0
    std::vector<double> cut_parity;
    double min_parity = 0.0;
    cplx min_parity_alpha{0.0, 0.0};
    double min_wigner = 0.0;
};

inline ReconstructionReport reconstruction_report(const DensityMatrix& rho, const StateVector& target,
                                                  std::span<const cplx> grid, std::span<const double> cut_re) {
    if (target.dim() > rho.dim()) throw DimensionError("reconstruction_report: target dim exceeds rho dim");
    CVector psi = CVector::Zero(rho.dim());
    psi.head(target.dim()) = target.amplitudes();
    ReconstructionReport rep;
    rep.fidelity = fidelity(rho, StateVector(psi));
    rep.grid.assign(grid.begin(), grid.end());
    rep.min_parity = std::numeric_limits<double>::infinity();
    auto visit = [&](cplx a, double p) {
        if (p < rep.min_parity) {
            rep.min_parity = p;
            rep.min_parity_alpha = a;
        }
    };
    for (const cplx& a : grid) {
        const double p = displaced_parity(rho, a);
        rep.parity.push_back(p);
        rep.wigner.push_back(wigner_from_parity(p));
        visit(a, p);
    }
    rep.cut_re.assign(cut_re.begin(), cut_re.end());
    for (double x : cut_re) {
        const double p = displaced_parity(rho, cplx(x, 0.0));
        rep.cut_parity.push_back(p);
        visit(cplx(x, 0.0), p);
    }
    if (grid.empty() && cut_re.empty()) visit(0.0, displaced_parity(rho, 0.0));
    rep.min_wigner = wigner_from_parity(rep.min_parity);
    return rep;
}

/// Default cut: 81 points over Re(alpha) in [-2, 2].
inline std::vector<double> default_cut(int n = 81, double extent = 2.0) {
    std::vector<double> out;
    for (int i = 0; i < n; ++i) out.push_back(n > 1 ? -extent + 2.0 * extent * i / (n - 1) : 0.0);
    return out;
}

}  // namespace qad
