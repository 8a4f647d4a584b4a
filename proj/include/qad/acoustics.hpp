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
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qad/errors.hpp"
#include "qad/fft.hpp"
#include "qad/linalg.hpp"

namespace qad::acoustics {

struct MaterialParams {
    double v_l = 11100.0;  ///< m/s
    double v_t = 8540.0;   ///< m/s, unused by the longitudinal model
    double piezo_coupling = 1.0;

    void validate() const {
        if (!(v_l > 0.0) || !(v_t > 0.0)) throw ValidationError("MaterialParams: velocities must be positive");
        if (!(v_t < v_l)) throw ValidationError("MaterialParams: v_t must be below v_l");
        if (!(piezo_coupling >= 0.0)) throw ValidationError("MaterialParams: piezo_coupling must be non-negative");
    }
};

/// Plano-convex resonator. Lengths in meters.
struct AcousticGeometry {
    double substrate_thickness = 410.2e-6;
    double aln_thickness = 0.9e-6;
    double curvature_radius = 4.5e-3;
    double electrode_diameter = 55e-6;
    double convex_diameter = 200e-6;
    double chip_gap = 1e-6;

    static constexpr double paraxial_ratio = 10.0;

    /// AlN counted at the substrate velocity.
    double effective_length() const { return substrate_thickness + aln_thickness; }

    void validate(std::vector<std::string>* warnings = nullptr) const {
        for (double v : {substrate_thickness, aln_thickness, curvature_radius, electrode_diameter, convex_diameter,
                         chip_gap}) {
            if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("AcousticGeometry: lengths must be positive");
        }
        if (warnings != nullptr && curvature_radius < paraxial_ratio * substrate_thickness) {
            warnings->push_back("paraxial: curvature_radius below 10x substrate thickness");
        }
    }
};

struct ModeRecord {
    int l = 0;
    int m = 0;
    int n = 0;
    double frequency = 0.0;  ///< Hz
    double waist = 0.0;      ///< m, at the flat face
    double coupling = 0.0;   ///< rad/s
};

struct FrequencyBand {
    double lo = 0.0;
    double hi = 0.0;

    void validate() const {
        if (!(lo > 0.0) || !(hi > lo)) throw ValidationError("FrequencyBand: need 0 < lo < hi");
    }
};

inline double free_spectral_range(const AcousticGeometry& g, const MaterialParams& mat) {
    g.validate();
    mat.validate();
    return mat.v_l / (2.0 * g.effective_length());
}

namespace detail {
inline void check_stable(const AcousticGeometry& g) {
    if (!(g.effective_length() < g.curvature_radius)) {
        throw StabilityError("plano-convex cavity unstable: effective length not below curvature radius");
    }
}
}  // namespace detail

/// Roundtrip Gouy phase divided by 2: arccos(sqrt(1 - L/R)).
inline double gouy_phase(const AcousticGeometry& g) {
    detail::check_stable(g);
    return std::acos(std::sqrt(1.0 - g.effective_length() / g.curvature_radius));
}

/// Frequency step between adjacent transverse orders.
inline double transverse_spacing(const AcousticGeometry& g, const MaterialParams& mat) {
    return free_spectral_range(g, mat) / pi * gouy_phase(g);
}

/// 1/e field radius at the flat face.
inline double mode_waist(const AcousticGeometry& g, const MaterialParams& mat, double frequency) {
    detail::check_stable(g);
    const double lambda = mat.v_l / frequency;
    const double len = g.effective_length();
    return std::sqrt(lambda / pi * std::sqrt(len * (g.curvature_radius - len)));
}

/// 1/e field radius at the curved face.
inline double mirror_beam_radius(const AcousticGeometry& g, const MaterialParams& mat, double frequency) {
    const double w0 = mode_waist(g, mat, frequency);
    const double zr = pi * w0 * w0 / (mat.v_l / frequency);
    const double ratio = g.effective_length() / zr;
    return w0 * std::sqrt(1.0 + ratio * ratio);
}

inline double mode_frequency(const AcousticGeometry& g, const MaterialParams& mat, int l, int m, int n) {
    return free_spectral_range(g, mat) * (l + (m + n + 1) / pi * gouy_phase(g));
}

/// Hermite-Gaussian modes with m + n <= max_order inside the band, sorted by frequency.
inline std::vector<ModeRecord> analytic_mode_spectrum(const AcousticGeometry& g, const MaterialParams& mat,
                                                      const FrequencyBand& band, int max_order = 4,
                                                      std::vector<std::string>* warnings = nullptr) {
    g.validate(warnings);
    mat.validate();
    band.validate();
    detail::check_stable(g);
    if (max_order < 0) throw ValidationError("analytic_mode_spectrum: max_order must be non-negative");
    const double fsr = free_spectral_range(g, mat);
    const double offset = gouy_phase(g) / pi;
    std::vector<ModeRecord> out;
    const int l_lo = std::max(0, static_cast<int>(std::floor(band.lo / fsr - offset * (max_order + 1))) - 1);
    const int l_hi = static_cast<int>(std::ceil(band.hi / fsr)) + 1;
    for (int l = l_lo; l <= l_hi; ++l) {
        for (int order = 0; order <= max_order; ++order) {
            const double f = fsr * (l + (order + 1) * offset);
            if (f < band.lo || f > band.hi) continue;
            for (int m = order; m >= 0; --m) {
                out.push_back({l, m, order - m, f, mode_waist(g, mat, f), 0.0});
            }
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ModeRecord& a, const ModeRecord& b) { return a.frequency < b.frequency; });
    return out;
}

// ---------------------------------------------------------------------------------------
// Transverse fields

/// Square n x n samples over [-extent/2, extent/2]^2, symmetric about the axis,
/// row-major with y the slow index.
struct TransverseField {
    int n = 0;
    double extent = 0.0;
    std::vector<cplx> values;

    TransverseField() = default;
    TransverseField(int n_, double extent_) : n(n_), extent(extent_) {
        if (n_ < 2) throw ValidationError("TransverseField: need at least 2 samples per side");
        if (!(extent_ > 0.0)) throw ValidationError("TransverseField: extent must be positive");
        values.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), cplx(0.0, 0.0));
    }

    double dx() const { return extent / n; }
    double coord(int i) const { return (i - 0.5 * (n - 1)) * dx(); }
    cplx& at(int ix, int iy) { return values[static_cast<std::size_t>(iy) * n + ix]; }
    const cplx& at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * n + ix]; }

    double norm_squared() const {
        double s = 0.0;
        for (const cplx& v : values) s += std::norm(v);
        return s * dx() * dx();
    }

    TransverseField& normalize() {
        const double s = norm_squared();
        if (!(s > 0.0)) throw ValidationError("TransverseField: zero field");
        const double f = 1.0 / std::sqrt(s);
        for (cplx& v : values) v *= f;
        return *this;
    }

    template <class F>
    static TransverseField sample(int n, double extent, F&& f) {
        TransverseField out(n, extent);
        for (int iy = 0; iy < n; ++iy) {
            for (int ix = 0; ix < n; ++ix) out.at(ix, iy) = f(out.coord(ix), out.coord(iy));
        }
        return out;
    }

    cplx overlap(const TransverseField& other) const {
        if (other.n != n || other.extent != extent) throw DimensionError("TransverseField: grid mismatch");
        cplx s = 0.0;
        for (std::size_t k = 0; k < values.size(); ++k) s += std::conj(values[k]) * other.values[k];
        return s * dx() * dx();
    }
};

/// Normalized 1-D Hermite-Gaussian amplitude with 1/e field radius w.
inline double hermite_gauss_1d(int m, double x, double w) {
    const double u = std::sqrt(2.0) * x / w;
    const double norm = std::pow(2.0 / pi, 0.25) / std::sqrt(std::ldexp(std::tgamma(m + 1.0), m) * w);
    return norm * std::hermite(static_cast<unsigned>(m), u) * std::exp(-x * x / (w * w));
}

inline TransverseField hermite_gauss_field(int n, double extent, int m, int nn, double w, double x0 = 0.0,
                                           double y0 = 0.0) {
    return TransverseField::sample(n, extent, [&](double x, double y) {
        return cplx(hermite_gauss_1d(m, x - x0, w) * hermite_gauss_1d(nn, y - y0, w), 0.0);
    });
}

/// Flat-top disk of the given diameter with a Gaussian-softened rim (edge_width = 0 gives
/// a hard edge), normalized.
inline TransverseField electrode_profile(int n, double extent, double diameter, double edge_width = 0.0) {
    if (!(diameter > 0.0)) throw ValidationError("electrode_profile: diameter must be positive");
    const double r0 = 0.5 * diameter;
    TransverseField f = TransverseField::sample(n, extent, [&](double x, double y) {
        const double r = std::hypot(x, y);
        if (r <= r0) return cplx(1.0, 0.0);
        if (edge_width <= 0.0) return cplx(0.0, 0.0);
        const double d = (r - r0) / edge_width;
        return cplx(std::exp(-d * d), 0.0);
    });
    return f.normalize();
}

/// Gaussian electrode with 1/e field radius w.
inline TransverseField gaussian_electrode_profile(int n, double extent, double w) {
    return hermite_gauss_field(n, extent, 0, 0, w).normalize();
}

// ---------------------------------------------------------------------------------------
// Coupling

/// Couplings from the overlap of the electrode profile with each mode's amplitude at the
/// curved face. With anchor_g0 set, the strongest fundamental is scaled to anchor_g0.
inline std::vector<ModeRecord> coupling_rates(const AcousticGeometry& g, const MaterialParams& mat,
                                              const TransverseField& electrode, std::vector<ModeRecord> modes,
                                              std::optional<double> anchor_g0 = std::nullopt) {
    g.validate();
    mat.validate();
    constexpr double norm_tolerance = 1e-6;
    if (std::abs(electrode.norm_squared() - 1.0) > norm_tolerance) {
        throw ContractError("coupling_rates: electrode profile not normalized");
    }
    for (ModeRecord& mode : modes) {
        if (!(mode.frequency > 0.0)) throw ContractError("coupling_rates: mode frequency must be positive");
        const double w = mirror_beam_radius(g, mat, mode.frequency);
        cplx s = 0.0;
        for (int iy = 0; iy < electrode.n; ++iy) {
            const double hy = hermite_gauss_1d(mode.n, electrode.coord(iy), w);
            for (int ix = 0; ix < electrode.n; ++ix) {
                s += std::conj(electrode.at(ix, iy)) * hermite_gauss_1d(mode.m, electrode.coord(ix), w) * hy;
            }
        }
        mode.coupling = mat.piezo_coupling * std::abs(s) * electrode.dx() * electrode.dx();
    }
    if (anchor_g0) {
        double ref = 0.0;
        for (const ModeRecord& mode : modes) {
            if (mode.m == 0 && mode.n == 0) ref = std::max(ref, mode.coupling);
        }
        if (!(ref > 0.0)) throw ContractError("coupling_rates: no coupled fundamental mode to anchor");
        for (ModeRecord& mode : modes) mode.coupling *= *anchor_g0 / ref;
    }
    return modes;
}

// ---------------------------------------------------------------------------------------
// Surface profile

struct SurfaceProfile {
    std::vector<double> radius;  ///< m
    std::vector<double> height;  ///< m

    void validate() const {
        if (radius.size() != height.size()) throw ValidationError("SurfaceProfile: column length mismatch");
        if (radius.size() < 3) throw ValidationError("SurfaceProfile: need at least 3 samples");
        for (std::size_t k = 1; k < radius.size(); ++k) {
            if (!(radius[k] > radius[k - 1])) throw FormatError("SurfaceProfile: radius must increase");
        }
    }

    /// Linear interpolation, held constant outside the sampled range.
    double height_at(double r) const {
        if (r <= radius.front()) return height.front();
        if (r >= radius.back()) return height.back();
        const auto it = std::upper_bound(radius.begin(), radius.end(), r);
        const std::size_t k = static_cast<std::size_t>(it - radius.begin());
        const double t = (r - radius[k - 1]) / (radius[k] - radius[k - 1]);
        return height[k - 1] + t * (height[k] - height[k - 1]);
    }
};

/// Two whitespace- or comma-separated columns (radius, height) in the given unit;
/// '#' starts a comment.
inline SurfaceProfile parse_surface_profile(std::istream& in, double unit = 1.0, const std::string& source = "input") {
    SurfaceProfile out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double r = 0.0, h = 0.0;
        if (!(ss >> r)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw FormatError(source + ":" + std::to_string(lineno) + ":1: expected radius");
        }
        if (!(ss >> h)) throw FormatError(source + ":" + std::to_string(lineno) + ": expected height column");
        std::string extra;
        if (ss >> extra) throw FormatError(source + ":" + std::to_string(lineno) + ": more than two columns");
        out.radius.push_back(r * unit);
        out.height.push_back(h * unit);
    }
    out.validate();
    return out;
}

inline SurfaceProfile load_surface_profile(const std::string& path, double unit = 1.0) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open surface profile: " + path);
    return parse_surface_profile(in, unit, path);
}

/// Least-squares fit h = h0 - r^2 / (2R) over r <= r_max.
inline double fit_curvature_radius(const SurfaceProfile& p, double r_max) {
    p.validate();
    RMatrix a(0, 2);
    std::vector<double> rows_h;
    std::vector<double> rows_r2;
    for (std::size_t k = 0; k < p.radius.size(); ++k) {
        if (p.radius[k] <= r_max) {
            rows_r2.push_back(p.radius[k] * p.radius[k]);
            rows_h.push_back(p.height[k]);
        }
    }
    if (rows_h.size() < 3) throw ValidationError("fit_curvature_radius: fewer than 3 samples inside r_max");
    a.resize(static_cast<Eigen::Index>(rows_h.size()), 2);
    RVector b(a.rows());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = rows_r2[static_cast<std::size_t>(i)];
        b(i) = rows_h[static_cast<std::size_t>(i)];
    }
    const RVector coef = a.colPivHouseholderQr().solve(b);
    if (!(coef(1) < 0.0)) throw ValidationError("fit_curvature_radius: surface is not convex");
    return -0.5 / coef(1);
}

// ---------------------------------------------------------------------------------------
// Roundtrip beam propagation

struct RoundtripOptions {
    int spectrum_oversample = 8;      ///< spectral samples per FSR = oversample * n_roundtrips (rounded to 2^k)
    double absorber_start = 0.7;      ///< fraction of the half-extent where the absorbing taper begins
    double detector_spacing = 0.0;    ///< m; 0 picks waist / 4
    double peak_threshold = 1e-4;     ///< relative to the strongest peak
    double sidelobe_ratio = 1e-2;
    double alias_threshold = 1e-3;
    double min_samples_per_waist = 8.0;
    bool hann_window = true;
    std::optional<SurfaceProfile> surface;  ///< overrides the parabolic mirror
};

struct SpectrumPeak {
    double frequency = 0.0;
    double intensity = 0.0;
    double linewidth = 0.0;  ///< FWHM, Hz
};

struct RoundtripSpectrum {
    std::vector<double> frequency;
    std::vector<double> intensity;
    std::vector<SpectrumPeak> peaks;
    double fsr = 0.0;
    double absorbed_fraction = 0.0;
};

/// Paraxial angular-spectrum propagator over a fixed wavenumber, plus the curved-face
/// phase mask and absorbing rim.
class RoundtripPropagator {
public:
    RoundtripPropagator(const AcousticGeometry& g, const MaterialParams& mat, double frequency, int n, double extent,
                        const RoundtripOptions& opt = {})
        : n_(n), plan_(n), kernel_(static_cast<std::size_t>(n) * n), mirror_(kernel_.size()),
          absorber_(kernel_.size()) {
        detail::check_stable(g);
        const double k = two_pi * frequency / mat.v_l;
        const double len = g.effective_length();
        const double dx = extent / n;
        const double dk = two_pi / extent;
        for (int iy = 0; iy < n; ++iy) {
            const double ky = dk * (iy <= n / 2 ? iy : iy - n);
            for (int ix = 0; ix < n; ++ix) {
                const double kx = dk * (ix <= n / 2 ? ix : ix - n);
                kernel_[idx(ix, iy)] = std::exp(cplx(0.0, -(kx * kx + ky * ky) * len / (2.0 * k))) / double(n * n);
            }
        }
        const double half = 0.5 * extent;
        const double r_abs = opt.absorber_start * half;
        const double h0 = opt.surface ? opt.surface->height_at(0.0) : 0.0;
        for (int iy = 0; iy < n; ++iy) {
            const double y = (iy - 0.5 * (n - 1)) * dx;
            for (int ix = 0; ix < n; ++ix) {
                const double x = (ix - 0.5 * (n - 1)) * dx;
                const double r = std::hypot(x, y);
                const double sag = opt.surface ? h0 - opt.surface->height_at(r) : r * r / (2.0 * g.curvature_radius);
                mirror_[idx(ix, iy)] = std::exp(cplx(0.0, -2.0 * k * sag));
                double a = 1.0;
                if (r > r_abs) {
                    const double t = std::min(1.0, (r - r_abs) / (half - r_abs));
                    a = std::pow(std::cos(0.5 * pi * t), 2);
                }
                absorber_[idx(ix, iy)] = a;
            }
        }
    }

    /// Free propagation over the effective length (unitary).
    void propagate(std::vector<cplx>& field) const {
        plan_.forward(field);
        for (std::size_t i = 0; i < field.size(); ++i) field[i] *= kernel_[i];
        plan_.backward(field);
    }

    /// Reflection off the curved face (unitary).
    void reflect(std::vector<cplx>& field) const {
        for (std::size_t i = 0; i < field.size(); ++i) field[i] *= mirror_[i];
    }

    void absorb(std::vector<cplx>& field) const {
        for (std::size_t i = 0; i < field.size(); ++i) field[i] *= absorber_[i];
    }

    /// Flat face -> curved face -> flat face, then the absorbing rim.
    void roundtrip(std::vector<cplx>& field) const {
        propagate(field);
        reflect(field);
        propagate(field);
        absorb(field);
    }

    /// Fraction of spectral energy with |kx| or |ky| beyond 80% of Nyquist.
    double band_edge_fraction(const std::vector<cplx>& field) const {
        std::vector<cplx> tmp = field;
        plan_.forward(tmp);
        double total = 0.0, edge = 0.0;
        const int cut = static_cast<int>(0.8 * (n_ / 2));
        for (int iy = 0; iy < n_; ++iy) {
            const int ky = iy <= n_ / 2 ? iy : n_ - iy;
            for (int ix = 0; ix < n_; ++ix) {
                const int kx = ix <= n_ / 2 ? ix : n_ - ix;
                const double e = std::norm(tmp[idx(ix, iy)]);
                total += e;
                if (kx > cut || ky > cut) edge += e;
            }
        }
        return total > 0.0 ? edge / total : 0.0;
    }

private:
    std::size_t idx(int ix, int iy) const { return static_cast<std::size_t>(iy) * n_ + ix; }

    int n_;
    fft::Plan2D plan_;
    std::vector<cplx> kernel_;
    std::vector<cplx> mirror_;
    std::vector<double> absorber_;
};

namespace detail {
inline std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}
}  // namespace detail

/// Coherent sum over roundtrips of the field leaving the flat face, with the longitudinal
/// phase 2kL = 2 pi nu / FSR applied analytically; returns the area-integrated
/// intensity versus frequency and its peaks.
inline RoundtripSpectrum roundtrip_spectrum(const AcousticGeometry& g, const MaterialParams& mat,
                                            const FrequencyBand& band, int n_roundtrips,
                                            const TransverseField& excitation, const RoundtripOptions& opt = {}) {
    g.validate();
    mat.validate();
    band.validate();
    detail::check_stable(g);
    if (n_roundtrips < 16) throw ValidationError("roundtrip_spectrum: need at least 16 roundtrips");
    const double center = 0.5 * (band.lo + band.hi);
    const double w0 = mode_waist(g, mat, center);
    const double dx = excitation.dx();
    if (w0 / dx < opt.min_samples_per_waist) {
        throw ResolutionError("roundtrip_spectrum: " + std::to_string(w0 / dx) + " samples per waist, need " +
                              std::to_string(opt.min_samples_per_waist));
    }
    const RoundtripPropagator prop(g, mat, center, excitation.n, excitation.extent, opt);
    std::vector<cplx> field = excitation.values;
    auto check_alias = [&](const char* when) {
        const double frac = prop.band_edge_fraction(field);
        if (frac > opt.alias_threshold) {
            throw ResolutionError(std::string("roundtrip_spectrum: spectral energy at grid band edge (") + when +
                                  "): " + std::to_string(frac));
        }
    };
    check_alias("excitation");

    // Detector samples: sub-grid inside the absorber-free disk.
    const double spacing = opt.detector_spacing > 0.0 ? opt.detector_spacing : 0.25 * w0;
    const int stride = std::max(1, static_cast<int>(spacing / dx));
    const double r_abs = opt.absorber_start * 0.5 * excitation.extent;
    std::vector<std::size_t> pixels;
    for (int iy = 0; iy < excitation.n; iy += stride) {
        for (int ix = 0; ix < excitation.n; ix += stride) {
            if (std::hypot(excitation.coord(ix), excitation.coord(iy)) <= r_abs) {
                pixels.push_back(static_cast<std::size_t>(iy) * excitation.n + ix);
            }
        }
    }
    const auto nrt = static_cast<std::size_t>(n_roundtrips);
    std::vector<cplx> history(pixels.size() * nrt);
    const double norm0 = excitation.norm_squared();
    for (std::size_t r = 0; r < nrt; ++r) {
        const double w = opt.hann_window ? 0.5 * (1.0 - std::cos(two_pi * (r + 0.5) / nrt)) : 1.0;
        for (std::size_t p = 0; p < pixels.size(); ++p) history[p * nrt + r] = w * field[pixels[p]];
        prop.roundtrip(field);
        if ((r + 1) % 256 == 0) check_alias("propagation");
    }
    double norm_end = 0.0;
    for (const cplx& v : field) norm_end += std::norm(v);
    norm_end *= dx * dx;

    const std::size_t m = detail::next_pow2(nrt * static_cast<std::size_t>(std::max(1, opt.spectrum_oversample)));
    const fft::Plan1D plan(static_cast<int>(m));
    std::vector<double> period(m, 0.0);
    std::vector<cplx> buf(m);
    const double area = std::pow(dx * stride, 2);
    for (std::size_t p = 0; p < pixels.size(); ++p) {
        std::fill(buf.begin(), buf.end(), cplx(0.0, 0.0));
        std::copy_n(history.begin() + static_cast<std::ptrdiff_t>(p * nrt), nrt, buf.begin());
        plan.backward(buf);
        for (std::size_t j = 0; j < m; ++j) period[j] += std::norm(buf[j]) * area;
    }

    RoundtripSpectrum out;
    out.fsr = free_spectral_range(g, mat);
    out.absorbed_fraction = 1.0 - norm_end / norm0;
    const double df = out.fsr / static_cast<double>(m);

    // Peaks within one period (cyclic), then replicated over the band.
    const double top = *std::max_element(period.begin(), period.end());
    std::vector<SpectrumPeak> base;
    for (std::size_t j = 0; j < m; ++j) {
        const double c = period[j];
        const double l = period[(j + m - 1) % m];
        const double r = period[(j + 1) % m];
        if (!(c > l && c >= r) || c < opt.peak_threshold * top) continue;
        const double denom = l - 2.0 * c + r;
        const double shift = denom < 0.0 ? 0.5 * (l - r) / denom : 0.0;
        SpectrumPeak pk;
        pk.frequency = (static_cast<double>(j) + shift) * df;
        pk.intensity = c - 0.25 * (l - r) * shift;
        auto crossing = [&](int dir) {
            for (std::size_t s = 1; s < m / 2; ++s) {
                const std::size_t a = (j + m + dir * (s - 1)) % m;
                const std::size_t b = (j + m + dir * s) % m;
                if (period[b] <= 0.5 * pk.intensity) {
                    const double t = (period[a] - 0.5 * pk.intensity) / (period[a] - period[b]);
                    return (static_cast<double>(s) - 1.0 + t) * df;
                }
            }
            return 0.5 * out.fsr;
        };
        pk.linewidth = crossing(+1) + crossing(-1);
        base.push_back(pk);
    }
    // Drop window sidelobes: weak maxima within two linewidths of a much stronger peak.
    std::sort(base.begin(), base.end(),
              [](const SpectrumPeak& a, const SpectrumPeak& b) { return a.intensity > b.intensity; });
    std::vector<SpectrumPeak> kept;
    for (const SpectrumPeak& pk : base) {
        const bool sidelobe = std::any_of(kept.begin(), kept.end(), [&](const SpectrumPeak& k) {
            double d = std::abs(pk.frequency - k.frequency);
            d = std::min(d, out.fsr - d);
            return d < 2.0 * k.linewidth && pk.intensity < opt.sidelobe_ratio * k.intensity;
        });
        if (!sidelobe) kept.push_back(pk);
    }
    base.swap(kept);
    const long l_lo = static_cast<long>(std::floor(band.lo / out.fsr));
    const long l_hi = static_cast<long>(std::ceil(band.hi / out.fsr));
    for (long l = l_lo; l <= l_hi; ++l) {
        for (const SpectrumPeak& pk : base) {
            SpectrumPeak q = pk;
            q.frequency += static_cast<double>(l) * out.fsr;
            if (q.frequency >= band.lo && q.frequency <= band.hi) out.peaks.push_back(q);
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double f = (static_cast<double>(l) + static_cast<double>(j) / m) * out.fsr;
            if (f >= band.lo && f <= band.hi) {
                out.frequency.push_back(f);
                out.intensity.push_back(period[j]);
            }
        }
    }
    std::sort(out.peaks.begin(), out.peaks.end(),
              [](const SpectrumPeak& a, const SpectrumPeak& b) { return a.frequency < b.frequency; });
    return out;
}

/// Grid with extent 4 * convex_diameter.
inline TransverseField default_transverse_grid(const AcousticGeometry& g, int n = 512) {
    return TransverseField(n, 4.0 * g.convex_diameter);
}

}  // namespace qad::acoustics
