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
#include <memory>
#include <span>
#include <vector>

#include <fftw3.h>

#include "qad/errors.hpp"
#include "qad/linalg.hpp"

namespace qad::fft {

namespace detail {
struct PlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
using PlanHandle = std::unique_ptr<fftw_plan_s, PlanDeleter>;

inline fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }
}  // namespace detail

/// In-place 2-D complex transform on a row-major n x n buffer. Unnormalized.
class Plan2D {
public:
    explicit Plan2D(int n) : n_(n), buffer_(static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
        if (n <= 0) throw DimensionError("fft::Plan2D: size must be positive");
        forward_.reset(fftw_plan_dft_2d(n, n, detail::as_fftw(buffer_.data()), detail::as_fftw(buffer_.data()),
                                        FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED));
        backward_.reset(fftw_plan_dft_2d(n, n, detail::as_fftw(buffer_.data()), detail::as_fftw(buffer_.data()),
                                         FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED));
    }

    int size() const { return n_; }

    void forward(std::span<cplx> data) const { execute(forward_.get(), data); }
    void backward(std::span<cplx> data) const { execute(backward_.get(), data); }

private:
    void execute(fftw_plan p, std::span<cplx> data) const {
        if (data.size() != buffer_.size()) throw DimensionError("fft::Plan2D: buffer size mismatch");
        fftw_execute_dft(p, detail::as_fftw(data.data()), detail::as_fftw(data.data()));
    }

    int n_;
    std::vector<cplx> buffer_;  // planning buffer only
    detail::PlanHandle forward_;
    detail::PlanHandle backward_;
};

/// Unnormalized 1-D complex transform; backward is exp(+2 pi i j k / n).
class Plan1D {
public:
    explicit Plan1D(int n) : n_(n), buffer_(static_cast<std::size_t>(std::max(n, 1))) {
        if (n <= 0) throw DimensionError("fft::Plan1D: size must be positive");
        forward_.reset(fftw_plan_dft_1d(n, detail::as_fftw(buffer_.data()), detail::as_fftw(buffer_.data()),
                                        FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED));
        backward_.reset(fftw_plan_dft_1d(n, detail::as_fftw(buffer_.data()), detail::as_fftw(buffer_.data()),
                                         FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED));
    }

    int size() const { return n_; }

    void forward(std::span<cplx> data) const { execute(forward_.get(), data); }
    void backward(std::span<cplx> data) const { execute(backward_.get(), data); }

private:
    void execute(fftw_plan p, std::span<cplx> data) const {
        if (data.size() != buffer_.size()) throw DimensionError("fft::Plan1D: buffer size mismatch");
        fftw_execute_dft(p, detail::as_fftw(data.data()), detail::as_fftw(data.data()));
    }

    int n_;
    std::vector<cplx> buffer_;
    detail::PlanHandle forward_;
    detail::PlanHandle backward_;
};

/// One-sided magnitude spectrum of a real signal.
struct Spectrum {
    std::vector<double> frequency;  ///< Hz
    std::vector<double> magnitude;
};

inline Spectrum real_spectrum(std::span<const double> signal, double sample_interval) {
    const int n = static_cast<int>(signal.size());
    if (n < 2) throw DimensionError("fft::real_spectrum: need at least two samples");
    std::vector<double> in(signal.begin(), signal.end());
    std::vector<cplx> out(static_cast<std::size_t>(n / 2 + 1));
    const detail::PlanHandle plan(
        fftw_plan_dft_r2c_1d(n, in.data(), detail::as_fftw(out.data()), FFTW_ESTIMATE));
    fftw_execute(plan.get());
    Spectrum s;
    s.frequency.resize(out.size());
    s.magnitude.resize(out.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        s.frequency[k] = static_cast<double>(k) / (n * sample_interval);
        s.magnitude[k] = std::abs(out[k]);
    }
    return s;
}

/// Mean-subtracted spectrum with the tail padded by the final (mean-subtracted) sample,
/// out to `padded_length` points.
inline Spectrum padded_trace_spectrum(std::span<const double> samples, double sample_interval,
                                      std::size_t padded_length = 1u << 15) {
    if (samples.size() < 2) throw DimensionError("fft::padded_trace_spectrum: need at least two samples");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= static_cast<double>(samples.size());
    std::vector<double> x(std::max(padded_length, samples.size()));
    for (std::size_t k = 0; k < samples.size(); ++k) x[k] = samples[k] - mean;
    std::fill(x.begin() + static_cast<std::ptrdiff_t>(samples.size()), x.end(), samples.back() - mean);
    return real_spectrum(x, sample_interval);
}

/// Frequency of the largest magnitude at or above f_min, refined by a parabola through
/// the three bins around the maximum.
inline double peak_frequency(const Spectrum& s, double f_min = 0.0) {
    std::size_t best = s.magnitude.size();
    for (std::size_t k = 1; k + 1 < s.magnitude.size(); ++k) {
        if (s.frequency[k] < f_min) continue;
        if (best == s.magnitude.size() || s.magnitude[k] > s.magnitude[best]) best = k;
    }
    if (best == s.magnitude.size()) throw ValidationError("fft::peak_frequency: no bins above f_min");
    const double a = s.magnitude[best - 1], b = s.magnitude[best], c = s.magnitude[best + 1];
    const double denom = a - 2.0 * b + c;
    const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    const double df = s.frequency[1] - s.frequency[0];
    return s.frequency[best] + std::clamp(shift, -0.5, 0.5) * df;
}

/// Dominant oscillation frequency of a uniformly sampled trace, ignoring content slower
/// than one cycle per record.
inline double dominant_frequency(std::span<const double> samples, double sample_interval) {
    const Spectrum s = padded_trace_spectrum(samples, sample_interval);
    return peak_frequency(s, 1.0 / (sample_interval * static_cast<double>(samples.size() - 1)));
}

}  // namespace qad::fft
