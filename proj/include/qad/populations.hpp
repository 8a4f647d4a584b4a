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

// Phonon Fock populations from a resonant probe trace, fitted as a constrained mixture
// of simulated traces for ideal |g, n> states.

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "qad/dynamics.hpp"
#include "qad/qp.hpp"

namespace qad {

/// p(0..n_max) with p(0) = 1 - sum_{n>=1} p(n).
struct PopulationDistribution {
    RVector p;

    int n_max() const { return static_cast<int>(p.size()) - 1; }
    double operator[](int n) const { return p(n); }

    static PopulationDistribution from_excited(const RVector& p_excited) {
        PopulationDistribution out;
        out.p.resize(p_excited.size() + 1);
        out.p.tail(p_excited.size()) = p_excited;
        out.p(0) = 1.0 - p_excited.sum();
        return out;
    }

    void validate(double tol = 1e-9) const {
        if (p.size() < 1) throw ValidationError("PopulationDistribution: empty");
        for (Eigen::Index n = 0; n < p.size(); ++n) {
            if (p(n) < -tol || p(n) > 1.0 + tol) {
                throw ValidationError("PopulationDistribution: p[" + std::to_string(n) + "] outside [0,1]");
            }
        }
        if (std::abs(p.sum() - 1.0) > tol) throw ValidationError("PopulationDistribution: does not sum to 1");
    }
};

struct ExtractionOptions {
    double ridge = 1e-9;
    double kkt_tolerance = 1e-9;
};

namespace detail {
inline void check_same_grid(const TimeTrace& a, const TimeTrace& b) {
    if (a.times.size() != b.times.size()) throw ContractError("extract_populations: time grid length mismatch");
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        const double tol = 1e-9 * std::max(std::abs(a.times[k]), std::abs(a.times.back()));
        if (std::abs(a.times[k] - b.times[k]) > tol) {
            throw ContractError("extract_populations: time grids differ at sample " + std::to_string(k));
        }
    }
}
}  // namespace detail

/// Least-squares weights of the basis traces subject to p_n >= 0 and sum p_n <= 1
/// (which also implies p_n <= 1), solved exactly by an active-set QP.
inline PopulationDistribution extract_populations(const TimeTrace& trace, std::span<const TimeTrace> basis,
                                                  int n_max, const ExtractionOptions& opt = {}) {
    if (n_max < 1) throw ContractError("extract_populations: n_max must be at least 1");
    if (basis.size() != static_cast<std::size_t>(n_max)) {
        throw ContractError("extract_populations: expected " + std::to_string(n_max) + " basis traces");
    }
    trace.validate();
    const auto samples = static_cast<Eigen::Index>(trace.size());
    RMatrix b(samples, n_max);
    for (int n = 0; n < n_max; ++n) {
        detail::check_same_grid(trace, basis[static_cast<std::size_t>(n)]);
        b.col(n) = Eigen::Map<const RVector>(basis[static_cast<std::size_t>(n)].pe.data(), samples);
    }
    const Eigen::Map<const RVector> y(trace.pe.data(), samples);

    const RMatrix q = b.transpose() * b + opt.ridge * RMatrix::Identity(n_max, n_max);
    const RVector c = -(b.transpose() * y);
    RMatrix g(n_max + 1, n_max);
    g.topRows(n_max) = -RMatrix::Identity(n_max, n_max);
    g.row(n_max).setOnes();
    RVector h = RVector::Zero(n_max + 1);
    h(n_max) = 1.0;

    const qp::Result res = qp::solve_active_set(q, c, g, h, RVector::Zero(n_max));
    if (!(res.kkt_residual < opt.kkt_tolerance)) {
        throw SolverError("extract_populations: KKT residual " + std::to_string(res.kkt_residual) +
                          " above tolerance");
    }
    // The feasible set is non-empty and the objective strictly convex, so the
    // active-set solution is exact up to rounding; only round-off is removed here.
    RVector p = res.x;
    for (Eigen::Index n = 0; n < p.size(); ++n) {
        if (p(n) < 0.0 && p(n) > -1e-14) p(n) = 0.0;
    }
    PopulationDistribution out = PopulationDistribution::from_excited(p);
    if (out.p(0) < 0.0 && out.p(0) > -1e-14) out.p(0) = 0.0;
    return out;
}

/// Extractions with basis traces simulated at g0 - delta_g and g0 + delta_g.
inline std::pair<PopulationDistribution, PopulationDistribution> population_error_bars(
    const TimeTrace& trace, const SystemParams& params, double delta_g, int n_max = 14,
    Eigen::Index phonon_dim = 20, const ode::Options& opt = {}) {
    if (!(delta_g >= 0.0)) throw ContractError("population_error_bars: delta_g must be non-negative");
    if (delta_g >= params.g0) throw ContractError("population_error_bars: delta_g exceeds g0");
    auto at = [&](double g) {
        SystemParams p = params;
        p.g0 = g;
        const auto basis = simulate_basis_traces(p, n_max, trace.times, phonon_dim, opt);
        return extract_populations(trace, basis, n_max);
    };
    return {at(params.g0 - delta_g), at(params.g0 + delta_g)};
}

/// Per-n lower and upper envelope of two distributions.
inline std::pair<RVector, RVector> envelope(const PopulationDistribution& a, const PopulationDistribution& b) {
    if (a.p.size() != b.p.size()) throw ContractError("envelope: size mismatch");
    return {a.p.cwiseMin(b.p), a.p.cwiseMax(b.p)};
}

/// sum_n (-1)^n p_n
inline double parity_from_populations(const PopulationDistribution& pop) {
    double s = 0.0;
    for (Eigen::Index n = 0; n < pop.p.size(); ++n) s += (n % 2 == 0) ? pop.p(n) : -pop.p(n);
    return s;
}

}  // namespace qad
