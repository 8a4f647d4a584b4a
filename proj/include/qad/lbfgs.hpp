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
#include <deque>
#include <functional>
#include <vector>

#include "qad/linalg.hpp"

namespace qad::optim {

struct LbfgsOptions {
    int memory = 10;
    int max_iterations = 10'000;
    double gradient_tolerance = 1e-6;
    int max_line_search = 40;
    double c1 = 1e-4;  // sufficient decrease
    double c2 = 0.9;   // curvature
};

enum class LbfgsStatus { converged, stalled, iteration_limit };

struct LbfgsResult {
    RVector x;
    double value = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    LbfgsStatus status = LbfgsStatus::iteration_limit;
};

/// Objective returning f(x) and writing its gradient.
using Objective = std::function<double(const RVector& x, RVector& grad)>;

namespace detail {

/// Strong-Wolfe line search (bracketing then bisection-safeguarded cubic zoom).
inline double wolfe_search(const Objective& f, const RVector& x, double f0, const RVector& g0,
                           const RVector& dir, const LbfgsOptions& opt, RVector& x_out, double& f_out,
                           RVector& g_out) {
    const double d0 = g0.dot(dir);
    double lo = 0.0, f_lo = f0, d_lo = d0;
    double hi = -1.0, f_hi = 0.0;
    double step = 1.0;
    RVector g(x.size());
    for (int it = 0; it < opt.max_line_search; ++it) {
        x_out = x + step * dir;
        const double ft = f(x_out, g);
        const double dt = g.dot(dir);
        if (!std::isfinite(ft) || ft > f0 + opt.c1 * step * d0 || (hi < 0.0 && it > 0 && ft >= f_lo)) {
            hi = step;
            f_hi = ft;
        } else {
            if (std::abs(dt) <= -opt.c2 * d0) {
                f_out = ft;
                g_out = g;
                return step;
            }
            if (hi >= 0.0 && dt * (hi - lo) >= 0.0) {
                hi = lo;
                f_hi = f_lo;
            }
            lo = step;
            f_lo = ft;
            d_lo = dt;
        }
        if (hi < 0.0) {
            step *= 2.0;
            continue;
        }
        // Quadratic interpolation from (lo, f_lo, d_lo) and (hi, f_hi), safeguarded.
        const double width = hi - lo;
        const double denom = 2.0 * (f_hi - f_lo - d_lo * width);
        double trial = denom > 0.0 ? lo - d_lo * width * width / denom : 0.5 * (lo + hi);
        const double a = std::min(lo, hi), b = std::max(lo, hi);
        if (!(trial > a + 0.1 * (b - a) && trial < b - 0.1 * (b - a))) trial = 0.5 * (lo + hi);
        step = trial;
        (void)f_hi;
    }
    // Fall back to the best sufficient-decrease point found, if any.
    if (lo > 0.0) {
        x_out = x + lo * dir;
        f_out = f(x_out, g_out);
        return lo;
    }
    return 0.0;
}

}  // namespace detail

/// Limited-memory BFGS minimizer.
inline LbfgsResult minimize_lbfgs(const Objective& f, RVector x0, const LbfgsOptions& opt = {}) {
    LbfgsResult res;
    res.x = std::move(x0);
    RVector g(res.x.size());
    res.value = f(res.x, g);
    std::deque<RVector> s_hist, y_hist;
    std::deque<double> rho_hist;
    RVector x_new(res.x.size()), g_new(res.x.size());

    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        res.iterations = iter;
        res.gradient_norm = g.norm();
        if (res.gradient_norm < opt.gradient_tolerance) {
            res.status = LbfgsStatus::converged;
            return res;
        }
        // Two-loop recursion.
        RVector q = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) gamma = s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        RVector dir = gamma * q;
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(dir);
            dir += (alpha[i] - beta) * s_hist[i];
        }
        dir = -dir;
        if (g.dot(dir) >= 0.0) {
            // Not a descent direction: restart from steepest descent.
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            dir = -g;
        }
        if (s_hist.empty()) dir *= std::min(1.0, 1.0 / std::max(g.norm(), 1e-300));

        double f_new = res.value;
        const double step = detail::wolfe_search(f, res.x, res.value, g, dir, opt, x_new, f_new, g_new);
        if (step == 0.0 || !(f_new <= res.value)) {
            if (!s_hist.empty()) {
                s_hist.clear();
                y_hist.clear();
                rho_hist.clear();
                continue;
            }
            res.status = LbfgsStatus::stalled;
            return res;
        }
        RVector s = x_new - res.x;
        RVector y = g_new - g;
        const double sy = s.dot(y);
        res.x.swap(x_new);
        g.swap(g_new);
        res.value = f_new;
        if (sy > 1e-300) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
    }
    res.iterations = opt.max_iterations;
    res.gradient_norm = g.norm();
    res.status = res.gradient_norm < opt.gradient_tolerance ? LbfgsStatus::converged : LbfgsStatus::iteration_limit;
    return res;
}

}  // namespace qad::optim
