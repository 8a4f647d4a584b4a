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
#include <cstddef>
#include <sstream>
#include <span>

#include "qad/errors.hpp"
#include "qad/linalg.hpp"

namespace qad::ode {

struct Options {
    double rtol = 1e-8;
    double atol = 1e-10;
    std::size_t max_steps = 2'000'000;
    double initial_step = 0.0;  ///< 0 picks a step from the RHS magnitude
};

struct Stats {
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t rhs_evals = 0;
    double last_step = 0.0;
};

namespace detail {

template <class M>
double error_norm(const M& err, const M& y0, const M& y1, const Options& opt) {
    double worst = 0.0;
    for (Eigen::Index j = 0; j < err.cols(); ++j) {
        for (Eigen::Index i = 0; i < err.rows(); ++i) {
            const double scale =
                opt.atol + opt.rtol * std::max(std::abs(y0(i, j)), std::abs(y1(i, j)));
            worst = std::max(worst, std::abs(err(i, j)) / scale);
        }
    }
    return worst;
}

}  // namespace detail

/// Adaptive Dormand-Prince 5(4) integrator for dy/dt = f(t, y) on dense Eigen matrices.
/// Step control carries over between successive calls to advance().
template <class M, class Rhs>
class DormandPrince {
public:
    DormandPrince(Rhs rhs, Options opt) : rhs_(std::move(rhs)), opt_(opt) {}

    /// Integrates y from t to t_end in place.
    void advance(double& t, double t_end, M& y) {
        if (t_end <= t) return;
        if (h_ <= 0.0) h_ = opt_.initial_step > 0.0 ? opt_.initial_step : initial_step(t, t_end, y);
        bool fsal_valid = false;
        M k1, k2, k3, k4, k5, k6, k7, y_stage, y_new;
        while (t < t_end) {
            if (stats_.accepted + stats_.rejected >= opt_.max_steps) {
                std::ostringstream msg;
                msg << "ode: step limit " << opt_.max_steps << " reached at t=" << t
                    << " (target " << t_end << ", last step " << h_ << ", accepted "
                    << stats_.accepted << ", rejected " << stats_.rejected << ")";
                throw SolverError(msg.str());
            }
            double h = std::min(h_, t_end - t);
            const bool last = (t + h >= t_end);
            if (!fsal_valid) {
                k1 = eval(t, y);
                fsal_valid = true;
            }
            y_stage = y + h * (c::a21 * k1);
            k2 = eval(t + c::c2 * h, y_stage);
            y_stage = y + h * (c::a31 * k1 + c::a32 * k2);
            k3 = eval(t + c::c3 * h, y_stage);
            y_stage = y + h * (c::a41 * k1 + c::a42 * k2 + c::a43 * k3);
            k4 = eval(t + c::c4 * h, y_stage);
            y_stage = y + h * (c::a51 * k1 + c::a52 * k2 + c::a53 * k3 + c::a54 * k4);
            k5 = eval(t + c::c5 * h, y_stage);
            y_stage = y + h * (c::a61 * k1 + c::a62 * k2 + c::a63 * k3 + c::a64 * k4 + c::a65 * k5);
            k6 = eval(t + h, y_stage);
            y_new = y + h * (c::b1 * k1 + c::b3 * k3 + c::b4 * k4 + c::b5 * k5 + c::b6 * k6);
            k7 = eval(t + h, y_new);
            const M err = h * (c::e1 * k1 + c::e3 * k3 + c::e4 * k4 + c::e5 * k5 + c::e6 * k6 +
                               c::e7 * k7);
            const double en = detail::error_norm(err, y, y_new, opt_);
            if (!std::isfinite(en)) {
                std::ostringstream msg;
                msg << "ode: non-finite error estimate at t=" << t << " with step " << h;
                throw SolverError(msg.str());
            }
            if (en <= 1.0) {
                t = last ? t_end : t + h;
                y.swap(y_new);
                k1.swap(k7);
                ++stats_.accepted;
                stats_.last_step = h;
                const double grow = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
                // A step shortened to land on t_end must not shrink the next one.
                if (!last || h == h_) h_ = h * grow;
            } else {
                ++stats_.rejected;
                h_ = h * std::clamp(0.9 * std::pow(en, -0.2), 0.1, 1.0);
                if (t + h_ == t) {
                    std::ostringstream msg;
                    msg << "ode: step size underflow at t=" << t << " (h=" << h_ << ")";
                    throw SolverError(msg.str());
                }
            }
        }
    }

    const Stats& stats() const { return stats_; }

private:
    struct c {
        static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static constexpr double a21 = 1.0 / 5;
        static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                                a54 = -212.0 / 729;
        static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                                a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                                b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                                e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    };

    M eval(double t, const M& y) {
        ++stats_.rhs_evals;
        return rhs_(t, y);
    }

    double initial_step(double t, double t_end, const M& y) {
        const M f0 = eval(t, y);
        double d0 = 0.0, d1 = 0.0;
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            for (Eigen::Index i = 0; i < y.rows(); ++i) {
                const double sc = opt_.atol + opt_.rtol * std::abs(y(i, j));
                d0 = std::max(d0, std::abs(y(i, j)) / sc);
                d1 = std::max(d1, std::abs(f0(i, j)) / sc);
            }
        }
        double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 * (t_end - t) : 0.01 * d0 / d1;
        return std::min(h, t_end - t);
    }

    Rhs rhs_;
    Options opt_;
    Stats stats_{};
    double h_ = 0.0;
};

template <class M, class Rhs>
DormandPrince<M, Rhs> make_dopri(Rhs rhs, Options opt) {
    return DormandPrince<M, Rhs>(std::move(rhs), opt);
}

}  // namespace qad::ode
