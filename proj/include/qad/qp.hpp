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
#include <limits>
#include <vector>

#include <Eigen/LU>

#include "qad/errors.hpp"
#include "qad/linalg.hpp"

namespace qad::qp {

struct Result {
    RVector x;
    RVector multipliers;  ///< one per inequality row, zero when inactive
    double kkt_residual = 0.0;
    int iterations = 0;
};

/// Infinity-norm KKT residual of min 1/2 x'Qx + c'x s.t. Gx <= h, scaled by max|Q|.
inline double kkt_residual(const RMatrix& q, const RVector& c, const RMatrix& g, const RVector& h,
                           const RVector& x, const RVector& lambda) {
    const double scale = std::max(q.cwiseAbs().maxCoeff(), 1e-300);
    const RVector slack = h - g * x;
    double r = ((q * x + c + g.transpose() * lambda) / scale).cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
        r = std::max(r, std::max(0.0, -slack(i)));                       // primal feasibility
        r = std::max(r, std::max(0.0, -lambda(i)) / scale);              // dual feasibility
        r = std::max(r, std::abs(lambda(i) * slack(i)) / scale);         // complementarity
    }
    return r;
}

/// Primal active-set method for a strictly convex QP
///   min 1/2 x'Qx + c'x  subject to  Gx <= h,
/// started from a feasible x0. Q must be positive definite.
inline Result solve_active_set(const RMatrix& q, const RVector& c, const RMatrix& g, const RVector& h,
                               RVector x0, int max_iterations = 1000) {
    const Eigen::Index n = q.rows();
    const Eigen::Index m = g.rows();
    if (q.cols() != n || c.size() != n || g.cols() != n || h.size() != m || x0.size() != n) {
        throw ContractError("qp: inconsistent problem dimensions");
    }
    const double scale = std::max(q.cwiseAbs().maxCoeff(), 1e-300);
    const double feas_tol = 1e-12;
    if (((g * x0 - h).array() > feas_tol).any()) throw ContractError("qp: starting point infeasible");

    RVector x = std::move(x0);
    std::vector<bool> active(static_cast<std::size_t>(m), false);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (std::abs(g.row(i).dot(x) - h(i)) <= feas_tol) active[static_cast<std::size_t>(i)] = true;
    }

    Result res;
    for (int iter = 0; iter < max_iterations; ++iter) {
        res.iterations = iter + 1;
        std::vector<Eigen::Index> w;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (active[static_cast<std::size_t>(i)]) w.push_back(i);
        }
        const auto k = static_cast<Eigen::Index>(w.size());
        RMatrix kkt = RMatrix::Zero(n + k, n + k);
        kkt.topLeftCorner(n, n) = q;
        for (Eigen::Index j = 0; j < k; ++j) {
            kkt.block(0, n + j, n, 1) = g.row(w[static_cast<std::size_t>(j)]).transpose();
            kkt.block(n + j, 0, 1, n) = g.row(w[static_cast<std::size_t>(j)]);
        }
        RVector rhs = RVector::Zero(n + k);
        rhs.head(n) = -(q * x + c);
        const RVector sol = kkt.fullPivLu().solve(rhs);
        const RVector d = sol.head(n);

        if (d.cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, x.cwiseAbs().maxCoeff())) {
            // Stationary on the working set; multipliers of Gx <= h are +sol tail.
            const RVector mu = sol.tail(k);
            Eigen::Index worst = -1;
            double most_negative = -1e-12 * scale;
            for (Eigen::Index j = 0; j < k; ++j) {
                if (mu(j) < most_negative) {
                    most_negative = mu(j);
                    worst = j;
                }
            }
            if (worst < 0) {
                res.x = x;
                res.multipliers = RVector::Zero(m);
                for (Eigen::Index j = 0; j < k; ++j) {
                    res.multipliers(w[static_cast<std::size_t>(j)]) = std::max(0.0, mu(j));
                }
                res.kkt_residual = kkt_residual(q, c, g, h, x, res.multipliers);
                return res;
            }
            active[static_cast<std::size_t>(w[static_cast<std::size_t>(worst)])] = false;
            continue;
        }

        double step = 1.0;
        Eigen::Index blocking = -1;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (active[static_cast<std::size_t>(i)]) continue;
            const double gd = g.row(i).dot(d);
            if (gd > 0.0) {
                const double ratio = std::max(0.0, h(i) - g.row(i).dot(x)) / gd;
                if (ratio < step) {
                    step = ratio;
                    blocking = i;
                }
            }
        }
        x += step * d;
        if (blocking >= 0) active[static_cast<std::size_t>(blocking)] = true;
    }
    throw OptimizationError("qp: active-set iteration limit reached");
}

}  // namespace qad::qp
