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

#include <functional>
#include <vector>

#include "qad/linalg.hpp"
#include "qad/ode.hpp"

namespace qad {

/// Generator of a Lindblad master equation
///   d rho/dt = -i[H(t), rho] + sum_k (L_k rho L_k^+ - 1/2 {L_k^+ L_k, rho})
/// with H(t) = H0 + sum_d (c_d(t) A_d + conj(c_d(t)) A_d^+).
/// Operators are stored by diagonals; states are dense Hermitian matrices.
class Lindbladian {
public:
    using Coefficient = std::function<cplx(double)>;

    explicit Lindbladian(const CMatrix& hamiltonian) : dim_(hamiltonian.rows()) {
        h0_ = hamiltonian;
        rebuild();
    }

    /// Adds a collapse channel sqrt(rate) * op. Zero rates are skipped.
    void add_collapse(const CMatrix& op, double rate) {
        if (!(rate > 0.0)) return;
        const CMatrix l = std::sqrt(rate) * op;
        h0_ -= 0.5 * I * (l.adjoint() * l);
        rebuild();
        if (l.isDiagonal(0.0)) {
            // L rho L^+ for diagonal L is an elementwise product with d d^+.
            const CVector d = l.diagonal();
            const CMatrix w = d * d.adjoint();
            diag_weights_ = diag_weights_.size() == 0 ? w : (diag_weights_ + w).eval();
            return;
        }
        jumps_.push_back(linalg::DiagonalStorage(l));
        jumps_adj_.push_back(linalg::DiagonalStorage(l.adjoint()));
    }

    /// Adds the Hermitian drive term c(t) A + conj(c(t)) A^+.
    void add_drive(const CMatrix& op, Coefficient coeff) {
        drives_.push_back({linalg::DiagonalStorage(op), linalg::DiagonalStorage(op.adjoint()), std::move(coeff)});
    }

    Eigen::Index dim() const { return dim_; }

    /// Schrodinger-picture action. Only the Hermitian part of the input is used, so
    /// rounding-level anti-Hermitian residue stays constant instead of growing.
    CMatrix apply(double t, const CMatrix& rho_in) const {
        const CMatrix rho = 0.5 * (rho_in + rho_in.adjoint());
        CMatrix x = h_eff_ * rho;
        for (const auto& d : drives_) {
            const cplx c = d.coeff(t);
            if (c == cplx{}) continue;
            d.op.multiply_add(rho, x, c);
            d.op_adj.multiply_add(rho, x, std::conj(c));
        }
        CMatrix out = -I * x;
        out += I * x.adjoint();
        if (diag_weights_.size() != 0) out += diag_weights_.cwiseProduct(rho);
        for (const auto& l : jumps_) {
            const CMatrix lr_adj = (l * rho).adjoint();
            l.multiply_add(lr_adj, out);
        }
        return out;
    }

    /// Heisenberg-picture (adjoint) action, again on the Hermitian part of the input.
    CMatrix apply_adjoint(double t, const CMatrix& obs_in) const {
        const CMatrix obs = 0.5 * (obs_in + obs_in.adjoint());
        CMatrix y = h_eff_adj_ * obs;
        for (const auto& d : drives_) {
            const cplx c = d.coeff(t);
            if (c == cplx{}) continue;
            d.op.multiply_add(obs, y, c);
            d.op_adj.multiply_add(obs, y, std::conj(c));
        }
        CMatrix out = I * y;
        out -= I * y.adjoint();
        // (L^+ O L)_ij = conj(d_i) d_j o_ij
        if (diag_weights_.size() != 0) out += diag_weights_.conjugate().cwiseProduct(obs);
        for (const auto& ladj : jumps_adj_) {
            const CMatrix lo_adj = (ladj * obs).adjoint();
            ladj.multiply_add(lo_adj, out);
        }
        return out;
    }

    /// Evolves rho from t0 to t1.
    void propagate(CMatrix& rho, double t0, double t1, const ode::Options& opt) const {
        auto solver = ode::make_dopri<CMatrix>(
            [this](double t, const CMatrix& r) { return apply(t, r); }, opt);
        double t = t0;
        solver.advance(t, t1, rho);
    }

    /// Evolves rho through the increasing sample times, calling visit(k, rho) at each.
    template <class Visit>
    void propagate_sampled(CMatrix& rho, double t0, std::span<const double> times,
                           const ode::Options& opt, Visit&& visit) const {
        auto solver = ode::make_dopri<CMatrix>(
            [this](double t, const CMatrix& r) { return apply(t, r); }, opt);
        double t = t0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            solver.advance(t, times[k], rho);
            visit(k, rho);
        }
    }

    /// Adjoint counterpart of propagate_sampled for a time-independent generator.
    template <class Visit>
    void propagate_adjoint_sampled(CMatrix& obs, std::span<const double> times,
                                   const ode::Options& opt, Visit&& visit) const {
        auto solver = ode::make_dopri<CMatrix>(
            [this](double t, const CMatrix& o) { return apply_adjoint(t, o); }, opt);
        double t = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            solver.advance(t, times[k], obs);
            visit(k, obs);
        }
    }

private:
    struct Drive {
        linalg::DiagonalStorage op;
        linalg::DiagonalStorage op_adj;
        Coefficient coeff;
    };

    void rebuild() {
        h_eff_ = linalg::DiagonalStorage(h0_);
        h_eff_adj_ = linalg::DiagonalStorage(h0_.adjoint());
    }

    Eigen::Index dim_;
    CMatrix h0_;  // H0 - i/2 sum L^+ L
    linalg::DiagonalStorage h_eff_;
    linalg::DiagonalStorage h_eff_adj_;
    CMatrix diag_weights_;
    std::vector<linalg::DiagonalStorage> jumps_;
    std::vector<linalg::DiagonalStorage> jumps_adj_;
    std::vector<Drive> drives_;
};

}  // namespace qad
