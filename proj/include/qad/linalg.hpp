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

#include <cmath>
#include <complex>
#include <cstdlib>
#include <vector>

#include <Eigen/Dense>

#include "qad/errors.hpp"

namespace qad {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using RMatrix = Eigen::MatrixXd;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;
inline constexpr cplx I{0.0, 1.0};

namespace linalg {

/// Matrix exponential by scaling and squaring with a degree-13 Pade approximant
/// (Higham 2005). Relative accuracy is near unit roundoff for the dense sizes used here.
inline CMatrix expm(const CMatrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("expm: matrix must be square");
    }
    const Eigen::Index n = a.rows();
    if (n == 0) return a;

    static constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                                   1187353796428800.0,  129060195264000.0,   10559470521600.0,
                                   670442572800.0,      33522128640.0,       1323241920.0,
                                   40840800.0,          960960.0,            16380.0,
                                   182.0,               1.0};
    constexpr double theta13 = 5.371920351148152;

    const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
    int squarings = 0;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
    }
    const CMatrix as = a / std::ldexp(1.0, squarings);

    const CMatrix id = CMatrix::Identity(n, n);
    const CMatrix a2 = as * as;
    const CMatrix a4 = a2 * a2;
    const CMatrix a6 = a4 * a2;

    const CMatrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                            b[3] * a2 + b[1] * id;
    const CMatrix u = as * u_inner;
    const CMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                      b[2] * a2 + b[0] * id;

    CMatrix r = (v - u).partialPivLu().solve(v + u);
    for (int k = 0; k < squarings; ++k) {
        r = r * r;
    }
    return r;
}

/// Truncated annihilation operator: a|n> = sqrt(n)|n-1>.
inline CMatrix annihilation(Eigen::Index dim) {
    CMatrix a = CMatrix::Zero(dim, dim);
    for (Eigen::Index n = 1; n < dim; ++n) {
        a(n - 1, n) = std::sqrt(static_cast<double>(n));
    }
    return a;
}

inline CMatrix number(Eigen::Index dim) {
    CMatrix num = CMatrix::Zero(dim, dim);
    for (Eigen::Index n = 0; n < dim; ++n) num(n, n) = static_cast<double>(n);
    return num;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

inline double hermiticity_defect(const CMatrix& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

/// Square operator stored by its non-zero diagonals. Products with dense matrices run as
/// one vectorized block update per diagonal, which beats CSR for the handful of diagonals
/// that ladder and coupling operators occupy.
class DiagonalStorage {
public:
    DiagonalStorage() = default;

    explicit DiagonalStorage(const CMatrix& m) : n_(m.rows()) {
        if (m.rows() != m.cols()) throw DimensionError("DiagonalStorage: matrix must be square");
        for (Eigen::Index k = -(n_ - 1); k < n_; ++k) {
            // k >= 0 holds m(i + k, i); k < 0 holds m(i, i - k).
            CVector c = m.diagonal(-k);
            if (c.cwiseAbs().maxCoeff() == 0.0) continue;
            offsets_.push_back(k);
            coeffs_.push_back(std::move(c));
        }
    }

    Eigen::Index rows() const { return n_; }
    std::size_t num_diagonals() const { return offsets_.size(); }

    /// out += scale * (A x)
    void multiply_add(const CMatrix& x, CMatrix& out, cplx scale = 1.0) const {
        for (std::size_t d = 0; d < offsets_.size(); ++d) {
            const Eigen::Index k = offsets_[d];
            const Eigen::Index len = n_ - std::abs(k);
            const auto c = (scale * coeffs_[d]).eval();
            if (k >= 0) {
                out.bottomRows(len).noalias() += c.asDiagonal() * x.topRows(len);
            } else {
                out.topRows(len).noalias() += c.asDiagonal() * x.bottomRows(len);
            }
        }
    }

    CMatrix operator*(const CMatrix& x) const {
        CMatrix out = CMatrix::Zero(n_, x.cols());
        multiply_add(x, out);
        return out;
    }

private:
    Eigen::Index n_ = 0;
    std::vector<Eigen::Index> offsets_;  // row - column
    std::vector<CVector> coeffs_;
};

}  // namespace linalg
}  // namespace qad
