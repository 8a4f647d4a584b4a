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

// Truncated Fock-space states and operators. Index 0 is the vacuum everywhere.

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>

#include "qad/errors.hpp"
#include "qad/linalg.hpp"

namespace qad {

namespace tolerance {
inline constexpr double state_norm = 1e-10;
inline constexpr double hermitian = 1e-10;
inline constexpr double trace = 1e-8;
inline constexpr double eigenvalue = 1e-8;
inline constexpr double truncation = 1e-6;
}  // namespace tolerance

/// Normalized pure state on a truncated Fock space.
class StateVector {
public:
    /// Normalizes `amplitudes`; a zero vector is rejected.
    explicit StateVector(CVector amplitudes) : amplitudes_(std::move(amplitudes)) {
        if (amplitudes_.size() == 0) throw DimensionError("StateVector: empty amplitude vector");
        const double norm = amplitudes_.norm();
        if (!(norm > 0.0)) throw ValidationError("StateVector: zero norm");
        amplitudes_ /= norm;
    }

    Eigen::Index dim() const { return amplitudes_.size(); }
    const CVector& amplitudes() const { return amplitudes_; }
    cplx operator[](Eigen::Index n) const { return amplitudes_(n); }

    RVector populations() const { return amplitudes_.cwiseAbs2(); }

private:
    CVector amplitudes_;
};

/// Square complex matrix acting on a truncated space.
class Operator {
public:
    explicit Operator(CMatrix elements) : elements_(std::move(elements)) {
        if (elements_.rows() != elements_.cols() || elements_.rows() == 0) {
            throw DimensionError("Operator: matrix must be square and non-empty");
        }
    }

    Eigen::Index dim() const { return elements_.rows(); }
    const CMatrix& matrix() const { return elements_; }

    StateVector apply(const StateVector& psi) const {
        check_dim(psi.dim());
        return StateVector(elements_ * psi.amplitudes());
    }

    cplx expectation(const StateVector& psi) const {
        check_dim(psi.dim());
        return psi.amplitudes().dot(elements_ * psi.amplitudes());
    }

    Operator operator*(const Operator& rhs) const {
        check_dim(rhs.dim());
        return Operator(elements_ * rhs.elements_);
    }

    Operator adjoint() const { return Operator(elements_.adjoint()); }

private:
    void check_dim(Eigen::Index other) const {
        if (other != dim()) {
            throw DimensionError("Operator: dimension " + std::to_string(dim()) +
                                 " does not match operand dimension " + std::to_string(other));
        }
    }

    CMatrix elements_;
};

/// Physical density matrix: Hermitian, unit trace, positive semi-definite.
class DensityMatrix {
public:
    /// Validates physicality at the given tolerances; throws ValidationError otherwise.
    explicit DensityMatrix(CMatrix elements, double trace_tol = tolerance::trace,
                           double eig_tol = tolerance::eigenvalue)
        : elements_(std::move(elements)) {
        if (elements_.rows() != elements_.cols() || elements_.rows() == 0) {
            throw DimensionError("DensityMatrix: matrix must be square and non-empty");
        }
        validate(trace_tol, eig_tol);
        elements_ = 0.5 * (elements_ + elements_.adjoint()).eval();
    }

    static DensityMatrix pure(const StateVector& psi) {
        return DensityMatrix(psi.amplitudes() * psi.amplitudes().adjoint());
    }

    static DensityMatrix maximally_mixed(Eigen::Index dim) {
        return DensityMatrix(CMatrix::Identity(dim, dim) / static_cast<double>(dim));
    }

    Eigen::Index dim() const { return elements_.rows(); }
    const CMatrix& matrix() const { return elements_; }

    RVector populations() const { return elements_.diagonal().real(); }

    double expectation(const Operator& op) const {
        if (op.dim() != dim()) throw DimensionError("DensityMatrix: operator dimension mismatch");
        return (elements_ * op.matrix()).trace().real();
    }

    RVector eigenvalues() const {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(elements_, Eigen::EigenvaluesOnly);
        return es.eigenvalues();
    }

    /// Conjugation U rho U^dagger.
    DensityMatrix transformed(const Operator& u) const {
        if (u.dim() != dim()) throw DimensionError("DensityMatrix: operator dimension mismatch");
        return DensityMatrix(u.matrix() * elements_ * u.matrix().adjoint());
    }

private:
    void validate(double trace_tol, double eig_tol) const {
        const double herm = linalg::hermiticity_defect(elements_);
        if (herm > std::max(tolerance::hermitian, trace_tol)) {
            throw ValidationError("DensityMatrix: not Hermitian (defect " + std::to_string(herm) + ")");
        }
        const double tr = elements_.trace().real();
        if (std::abs(tr - 1.0) > trace_tol) {
            throw ValidationError("DensityMatrix: trace " + std::to_string(tr) + " differs from 1");
        }
        const CMatrix herm_part = 0.5 * (elements_ + elements_.adjoint());
        Eigen::SelfAdjointEigenSolver<CMatrix> es(herm_part, Eigen::EigenvaluesOnly);
        const double min_eig = es.eigenvalues().minCoeff();
        if (min_eig < -eig_tol) {
            throw ValidationError("DensityMatrix: negative eigenvalue " + std::to_string(min_eig));
        }
    }

    CMatrix elements_;
};

inline StateVector fock_state(Eigen::Index n, Eigen::Index dim) {
    if (dim <= 0 || n < 0 || n >= dim) {
        throw DimensionError("fock_state: n=" + std::to_string(n) + " outside [0, " +
                             std::to_string(dim) + ")");
    }
    CVector amps = CVector::Zero(dim);
    amps(n) = 1.0;
    return StateVector(std::move(amps));
}

/// Coherent state truncated to `dim` levels and renormalized.
/// Throws TruncationError if more than 1e-6 of the Poisson weight falls outside.
inline StateVector coherent_state(cplx alpha, Eigen::Index dim) {
    if (dim <= 0) throw DimensionError("coherent_state: dim must be positive");
    CVector amps(dim);
    const double mean = std::norm(alpha);
    // Accumulate alpha^n/sqrt(n!) by recurrence to stay finite for moderate n.
    cplx term = std::exp(-0.5 * mean);
    for (Eigen::Index n = 0; n < dim; ++n) {
        if (n > 0) term *= alpha / std::sqrt(static_cast<double>(n));
        amps(n) = term;
    }
    const double deficit = 1.0 - amps.squaredNorm();
    if (deficit > tolerance::truncation) {
        throw TruncationError("coherent_state: truncation at dim=" + std::to_string(dim) +
                              " loses weight " + std::to_string(deficit));
    }
    return StateVector(std::move(amps));
}

/// exp(alpha a^dagger - conj(alpha) a) on the truncated space.
inline Operator displacement_operator(cplx alpha, Eigen::Index dim) {
    if (dim < 2) throw DimensionError("displacement_operator: dim must be at least 2");
    const CMatrix a = linalg::annihilation(dim);
    const CMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
    return Operator(linalg::expm(gen));
}

inline Operator parity_operator(Eigen::Index dim) {
    if (dim < 1) throw DimensionError("parity_operator: dim must be positive");
    CMatrix p = CMatrix::Zero(dim, dim);
    for (Eigen::Index n = 0; n < dim; ++n) p(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
    return Operator(std::move(p));
}

/// Smallest dimension keeping Fock states up to n_max displaced by |alpha| <= alpha_max
/// accurately represented.
inline Eigen::Index required_dim(Eigen::Index n_max, double alpha_max) {
    return n_max + 1 + static_cast<Eigen::Index>(std::ceil(4.0 * alpha_max));
}

namespace detail {
inline CMatrix psd_sqrt(const CMatrix& m) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
    const RVector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}
}  // namespace detail

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.
inline double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) {
    if (rho.dim() != sigma.dim()) throw DimensionError("fidelity: dimension mismatch");
    const CMatrix sr = detail::psd_sqrt(rho.matrix());
    CMatrix inner = sr * sigma.matrix() * sr;
    inner = 0.5 * (inner + inner.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMatrix> es(inner, Eigen::EigenvaluesOnly);
    const double root_sum = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
    return std::clamp(root_sum * root_sum, 0.0, 1.0);
}

/// <psi|rho|psi>, the pure-target special case.
inline double fidelity(const DensityMatrix& rho, const StateVector& target) {
    if (rho.dim() != target.dim()) throw DimensionError("fidelity: dimension mismatch");
    const double f = target.amplitudes().dot(rho.matrix() * target.amplitudes()).real();
    return std::clamp(f, 0.0, 1.0);
}

}  // namespace qad
