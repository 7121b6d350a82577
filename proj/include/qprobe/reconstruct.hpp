#pragma once
// Reconstruction pipeline: peak detection on transition curves, coupling-ratio
// calibration, momentum assignment by inverting the geometry factors (1D and
// 2D), measurement-window validation, noise injection, sweep segment planning,
// and Bloch-function deconvolution.
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <fftw3.h>

#include "core.hpp"
#include "grid.hpp"
#include "models.hpp"
#include "probe.hpp"
#include "rates.hpp"

namespace qprobe {

struct Peak {
    double frequency = 0.0;
    double amplitude = 0.0; // fitted height of the rescaled-rate peak
    double width = 0.0;     // effective main-lobe full width, ~4*pi/t
};

struct PeakSet {
    std::vector<Peak> peaks; // strictly increasing frequency
    int config_index = 1;
    double time = 0.0;
    CurveMetadata metadata;
};

// --------------------------------------------------------------------------
// Peak detection. A single threshold pass would report sinc^2 side lobes (4.7%
// of each main peak) as spurious maxima, so detection works iteratively:
// take the strongest remaining maximum, refine position/height (parabola seed,
// then a few Gauss-Newton steps on the main lobe), subtract the fitted
// sinc^2 line shape from the whole curve, and claim an exclusion zone around
// the fitted centre sized by the fit-residual floor. Candidates whose fitted
// width is inconsistent with the measurement time are treated as artefacts of
// overlapping tails: subtracted but not reported.

namespace detail {

inline void subtract_sinc2(std::vector<double>& resid, const std::vector<double>& nu_grid,
                           double h, double center, double t) {
    for (std::size_t j = 0; j < resid.size(); ++j)
        resid[j] -= h * sinc2_line(nu_grid[j] - center, t);
}

// Gauss-Newton refinement of (center, height) against the working residual
// plus the candidate peak, restricted to the central lobe.
inline void refine_peak(const std::vector<double>& data, const std::vector<double>& nu_grid,
                        double& center, double& height, double t) {
    double lobe = two_pi / t; // half-width of the central lobe
    auto lo = std::lower_bound(nu_grid.begin(), nu_grid.end(), center - lobe) - nu_grid.begin();
    auto hi = std::upper_bound(nu_grid.begin(), nu_grid.end(), center + lobe) - nu_grid.begin();
    if (hi - lo < 3) return;
    for (int iter = 0; iter < 6; ++iter) {
        double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
        for (auto j = lo; j < hi; ++j) {
            double x = 0.5 * (nu_grid[static_cast<std::size_t>(j)] - center) * t;
            double s = sinc(x);
            double f = s * s;
            // d sinc^2/dx = 2 s (cos x - s)/x ; chain rule for center: dx/dc = -t/2
            double ds;
            if (std::abs(x) < 1e-4)
                ds = -2.0 * x / 3.0;
            else
                ds = 2.0 * s * (std::cos(x) - s) / x;
            double dfd_center = height * ds * (-0.5 * t);
            double dfd_height = f;
            double r = data[static_cast<std::size_t>(j)] - height * f;
            a11 += dfd_center * dfd_center;
            a12 += dfd_center * dfd_height;
            a22 += dfd_height * dfd_height;
            b1 += dfd_center * r;
            b2 += dfd_height * r;
        }
        double det = a11 * a22 - a12 * a12;
        if (std::abs(det) < 1e-300) return;
        double dc = (b1 * a22 - b2 * a12) / det;
        double dh = (a11 * b2 - a12 * b1) / det;
        double step_cap = 0.5 * lobe;
        dc = std::clamp(dc, -step_cap, step_cap);
        center += dc;
        height += dh;
        if (height <= 0.0) {
            height = 1e-300;
            return;
        }
        if (std::abs(dc) < 1e-12 * lobe && std::abs(dh) < 1e-12 * height) break;
    }
}

} // namespace detail

struct DetectOptions {
    double threshold_rel = 1e-3; // relative to the curve's global maximum
    double artifact_floor = 1e-4; // fraction of a fitted height left behind as fit residue
    int max_peaks = 100000;
};

inline PeakSet detect_peaks(const TransitionCurve& curve, DetectOptions opt = {}) {
    PeakSet out;
    out.config_index = curve.config_index;
    out.time = curve.time;
    out.metadata = curve.metadata;
    const auto& nu = curve.nu_grid;
    std::size_t n = nu.size();
    if (n == 0) return out;
    double gmax = 0.0;
    for (double v : curve.values) gmax = std::max(gmax, v);
    if (gmax <= 0.0) return out;
    double thr = opt.threshold_rel * gmax;
    double t = curve.time;

    std::vector<double> resid = curve.values;
    std::vector<Peak> found;
    for (int it = 0; it < opt.max_peaks; ++it) {
        std::size_t jmax = 0;
        double vmax = -1.0;
        for (std::size_t j = 0; j < n; ++j)
            if (resid[j] > vmax) {
                vmax = resid[j];
                jmax = j;
            }
        if (vmax < thr) break;

        // parabola seed through the three points around the maximum
        double center = nu[jmax], height = vmax;
        if (jmax > 0 && jmax + 1 < n) {
            double ym = resid[jmax - 1], y0 = resid[jmax], yp = resid[jmax + 1];
            double denom = ym - 2.0 * y0 + yp;
            if (denom < 0.0) {
                double delta = 0.5 * (ym - yp) / denom;
                delta = std::clamp(delta, -0.5, 0.5);
                double hstep = nu[jmax + 1] - nu[jmax];
                center = nu[jmax] + delta * hstep;
                height = y0 - 0.25 * (ym - yp) * delta;
            }
        }

        detail::refine_peak(resid, nu, center, height, t);
        if (height < thr * 0.5) {
            // refinement collapsed the candidate; flatten the offending bin
            resid[jmax] = 0.0;
            continue;
        }

        // width sanity (from the pre-subtraction residual curvature at the
        // maximum): the effective time sqrt(-6 f''/h) must be within 50% of
        // the measurement time, else this bump is a tail artefact
        double t_eff = t;
        if (jmax > 0 && jmax + 1 < n) {
            double hstep = nu[jmax] - nu[jmax - 1];
            double ym = resid[jmax - 1], y0 = resid[jmax], yp = resid[jmax + 1];
            double curv = (ym - 2.0 * y0 + yp) / (hstep * hstep);
            if (curv < 0.0) {
                double t_fit = std::sqrt(std::max(0.0, -6.0 * curv / height));
                if (t_fit > 0.0) t_eff = t_fit;
            }
        }
        double width = 4.0 * pi / t_eff;

        detail::subtract_sinc2(resid, nu, height, center, t);

        // claim an exclusion zone around the subtracted centre: fit residue up
        // to artifact_floor * height must not be re-detected as a peak
        double zone = (2.0 / t) * std::sqrt(std::max(1.0, opt.artifact_floor * height / thr));
        auto lo = std::lower_bound(nu.begin(), nu.end(), center - zone) - nu.begin();
        auto hi = std::upper_bound(nu.begin(), nu.end(), center + zone) - nu.begin();
        for (auto j = lo; j < hi; ++j) resid[static_cast<std::size_t>(j)] = 0.0;

        if (t_eff < 0.5 * t || t_eff > 1.5 * t) continue; // artefact: subtracted, not reported

        found.push_back({center, height, width});
    }

    std::sort(found.begin(), found.end(),
              [](const Peak& a, const Peak& b) { return a.frequency < b.frequency; });

    // merge peaks closer than 4*pi/t: unresolvable at this measurement time
    double merge_radius = 4.0 * pi / t;
    for (const auto& p : found) {
        if (!out.peaks.empty() && p.frequency - out.peaks.back().frequency < merge_radius) {
            Peak& q = out.peaks.back();
            double wsum = q.amplitude + p.amplitude;
            q.frequency = (q.frequency * q.amplitude + p.frequency * p.amplitude) / wsum;
            q.amplitude = wsum;
            q.width = std::max(q.width, p.width);
        } else {
            out.peaks.push_back(p);
        }
    }
    return out;
}

// Amplitude extraction at known line positions (typically the frequencies
// found by blind detection on a reference configuration). Works strongest-
// first with global sinc^2 subtraction like the blind detector, but without
// any threshold: a coupling-ratio configuration can suppress individual lines
// by many orders of magnitude (geometry factors vanish at zone boundaries and
// corners), and those amplitudes still carry the momentum information. Fits
// whose centre drifts off its target by more than half the merge radius fall
// back to a fixed-centre height fit, so a weak target can never latch onto a
// stronger neighbour that is already accounted for.
inline PeakSet measure_peaks_segments(const std::vector<TransitionCurve>& segments,
                                      const std::vector<double>& positions) {
    if (segments.empty()) throw contract_error("measure_peaks_segments: no sweep segments");
    PeakSet out;
    out.config_index = segments.front().config_index;
    out.time = segments.front().time;
    out.metadata = segments.front().metadata;
    double t = out.time;
    if (!(t > 0.0)) throw contract_error("measure_peaks_segments: segment time must be > 0");

    std::vector<std::vector<double>> resid;
    resid.reserve(segments.size());
    for (const auto& c : segments) resid.push_back(c.values);

    struct Target {
        double position;
        int segment = -1;
        std::size_t index = 0; // nearest grid index within the segment
        bool done = false;
    };
    std::vector<Target> targets;
    for (double f : positions) {
        Target tg;
        tg.position = f;
        for (std::size_t s = 0; s < segments.size(); ++s) {
            const auto& nu = segments[s].nu_grid;
            if (nu.empty() || f < nu.front() || f > nu.back()) continue;
            tg.segment = static_cast<int>(s);
            auto it = std::lower_bound(nu.begin(), nu.end(), f);
            std::size_t j = static_cast<std::size_t>(it - nu.begin());
            if (j > 0 && (j == nu.size() || f - nu[j - 1] < nu[j] - f)) --j;
            tg.index = j;
            break;
        }
        if (tg.segment < 0)
            throw contract_error("measure_peaks_segments: position " + std::to_string(f) +
                                 " not covered by any sweep segment");
        targets.push_back(tg);
    }

    double lobe = two_pi / t;
    for (std::size_t round = 0; round < targets.size(); ++round) {
        // next target: largest current residual at its own position
        int pick = -1;
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < static_cast<int>(targets.size()); ++i) {
            const Target& tg = targets[static_cast<std::size_t>(i)];
            if (tg.done) continue;
            double v = resid[static_cast<std::size_t>(tg.segment)][tg.index];
            if (v > best) {
                best = v;
                pick = i;
            }
        }
        if (pick < 0) break;
        Target& tg = targets[static_cast<std::size_t>(pick)];
        auto& r = resid[static_cast<std::size_t>(tg.segment)];
        const auto& nu = segments[static_cast<std::size_t>(tg.segment)].nu_grid;

        double center = tg.position;
        double height = std::max(r[tg.index], 0.0);
        detail::refine_peak(r, nu, center, height, t);
        if (!(height > 0.0) || std::abs(center - tg.position) > lobe) {
            // drifted onto a neighbour or collapsed: height-only fit at the target
            center = tg.position;
            auto lo = std::lower_bound(nu.begin(), nu.end(), center - lobe) - nu.begin();
            auto hi = std::upper_bound(nu.begin(), nu.end(), center + lobe) - nu.begin();
            double num = 0.0, den = 0.0;
            for (auto j = lo; j < hi; ++j) {
                double f = sinc2_line(nu[static_cast<std::size_t>(j)] - center, t);
                num += f * r[static_cast<std::size_t>(j)];
                den += f * f;
            }
            height = den > 0.0 ? std::max(num / den, 0.0) : 0.0;
        }
        if (height > 0.0) detail::subtract_sinc2(r, nu, height, center, t);
        tg.done = true;
        out.peaks.push_back({center, height, 4.0 * pi / t});
    }

    std::sort(out.peaks.begin(), out.peaks.end(),
              [](const Peak& a, const Peak& b) { return a.frequency < b.frequency; });
    return out;
}

// Detect independently on each sweep segment, then merge the combined list.
inline PeakSet detect_peaks_segments(const std::vector<TransitionCurve>& segments,
                                     DetectOptions opt = {}) {
    if (segments.empty()) return {};
    // shared absolute threshold across segments: relative to the global max
    double gmax = 0.0;
    for (const auto& c : segments)
        for (double v : c.values) gmax = std::max(gmax, v);
    PeakSet out;
    out.config_index = segments.front().config_index;
    out.time = segments.front().time;
    out.metadata = segments.front().metadata;
    std::vector<Peak> all;
    for (const auto& c : segments) {
        DetectOptions local = opt;
        double cmax = 0.0;
        for (double v : c.values) cmax = std::max(cmax, v);
        if (cmax <= 0.0) continue;
        local.threshold_rel = opt.threshold_rel * gmax / cmax;
        if (local.threshold_rel >= 1.0) continue; // segment entirely below threshold
        auto ps = detect_peaks(c, local);
        all.insert(all.end(), ps.peaks.begin(), ps.peaks.end());
    }
    std::sort(all.begin(), all.end(),
              [](const Peak& a, const Peak& b) { return a.frequency < b.frequency; });
    double merge_radius = 4.0 * pi / out.time;
    for (const auto& p : all) {
        if (!out.peaks.empty() && p.frequency - out.peaks.back().frequency < merge_radius) {
            Peak& q = out.peaks.back();
            double wsum = q.amplitude + p.amplitude;
            q.frequency = (q.frequency * q.amplitude + p.frequency * p.amplitude) / wsum;
            q.amplitude = wsum;
            q.width = std::max(q.width, p.width);
        } else {
            out.peaks.push_back(p);
        }
    }
    return out;
}

// --------------------------------------------------------------------------
// Peak matching and ratio calibration.

struct MatchResult {
    std::vector<std::pair<int, int>> pairs; // (index in base, index in alt)
    std::vector<int> orphan_base, orphan_alt;
};

inline MatchResult match_peaks(const PeakSet& base, const PeakSet& alt, double tolerance) {
    MatchResult out;
    std::vector<bool> used(alt.peaks.size(), false);
    for (int i = 0; i < static_cast<int>(base.peaks.size()); ++i) {
        double f = base.peaks[static_cast<std::size_t>(i)].frequency;
        int best = -1;
        double best_d = tolerance;
        for (int j = 0; j < static_cast<int>(alt.peaks.size()); ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            double d = std::abs(alt.peaks[static_cast<std::size_t>(j)].frequency - f);
            if (d <= best_d) {
                best_d = d;
                best = j;
            }
        }
        if (best >= 0) {
            used[static_cast<std::size_t>(best)] = true;
            out.pairs.emplace_back(i, best);
        } else {
            out.orphan_base.push_back(i);
        }
    }
    for (int j = 0; j < static_cast<int>(alt.peaks.size()); ++j)
        if (!used[static_cast<std::size_t>(j)]) out.orphan_alt.push_back(j);
    return out;
}

enum class GeometryKind {
    line_pair,    // 1D, 4cos^2(ka/2)
    line_pair_sq, // 1D, (1+cos ka)^2
    plane_edge,   // 2D, 2[cos^2+cos^2]
    plane_diag    // 2D, 16cos^2 cos^2
};

// Analytic Brillouin-zone means of the geometry factors.
inline double bz_mean(GeometryKind kind) {
    switch (kind) {
        case GeometryKind::line_pair: return 2.0;
        case GeometryKind::line_pair_sq: return 1.5;
        case GeometryKind::plane_edge: return 2.0;
        case GeometryKind::plane_diag: return 4.0;
    }
    throw contract_error("bz_mean: unknown geometry");
}

inline double geometry_value(GeometryKind kind, double k_lo, double k_hi, double a = 1.0) {
    switch (kind) {
        case GeometryKind::line_pair: return kitaev_pair_factor(k_lo, a, RatioForm::cos2);
        case GeometryKind::line_pair_sq: return kitaev_pair_factor(k_lo, a, RatioForm::cos4);
        case GeometryKind::plane_edge: return geometry_factor(1, Vec2{k_lo, k_hi}, 2, a);
        case GeometryKind::plane_diag: return geometry_factor(2, Vec2{k_lo, k_hi}, 2, a);
    }
    throw contract_error("geometry_value: unknown geometry");
}

// Mean of a geometry factor over the point-group orbit representatives that
// carry peaks (the 2D set excludes the condensate at (0,0)). Peak lists sample
// one ratio per orbit, so blind initialization from peaks should normalize by
// this mean rather than the mode-space one.
inline double orbit_mean_geometry(const BrillouinGrid& grid, GeometryKind kind,
                                  bool exclude_origin) {
    double acc = 0.0;
    int count = 0;
    for (int rep : grid.orbit_representatives()) {
        if (exclude_origin && rep == 0) continue;
        Vec2 k = grid.momentum(rep);
        auto [mx, my] = grid.axis_indices(rep);
        (void)mx;
        (void)my;
        double lo = std::abs(k.x), hi = std::abs(k.y);
        if (grid.dimension == 2 && lo > hi) std::swap(lo, hi);
        acc += geometry_value(kind, lo, hi, grid.lattice_constant);
        ++count;
    }
    if (count == 0) throw contract_error("orbit_mean_geometry: empty grid");
    return acc / count;
}

// Blind estimate of |J_i/J_0|^2 from matched peak amplitudes: sum of ratios
// normalized by the analytic zone mean of the geometry factor.
inline double calibrate_ratio(const PeakSet& base, const PeakSet& alt, GeometryKind kind,
                              double match_tolerance = 0.0) {
    double tol = match_tolerance > 0.0 ? match_tolerance : 4.0 * pi / base.time;
    MatchResult m = match_peaks(base, alt, tol);
    if (m.pairs.size() < 3) {
        std::string msg = "calibrate_ratio: need at least 3 matched peaks, got " +
                          std::to_string(m.pairs.size()) + " (orphans: base " +
                          std::to_string(m.orphan_base.size()) + ", alt " +
                          std::to_string(m.orphan_alt.size()) + ")";
        throw calibration_error(msg);
    }
    double rsum = 0.0;
    for (auto [i, j] : m.pairs)
        rsum += alt.peaks[static_cast<std::size_t>(j)].amplitude /
                base.peaks[static_cast<std::size_t>(i)].amplitude;
    return rsum / (static_cast<double>(m.pairs.size()) * bz_mean(kind));
}

// Same estimate with the exact geometry factors of a known assignment
// (self-test mode for diagnosing pipeline error sources).
inline double calibrate_ratio_exact(const std::vector<double>& ratios,
                                    const std::vector<double>& geometry_values) {
    if (ratios.size() != geometry_values.size() || ratios.size() < 3)
        throw calibration_error("calibrate_ratio_exact: need >= 3 ratio/geometry pairs");
    double rs = 0.0, gs = 0.0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        rs += ratios[i];
        gs += geometry_values[i];
    }
    return rs / gs;
}

// --------------------------------------------------------------------------
// Momentum inversion. Solved in y = sin^2(ka/2) rather than cos^2 to avoid
// the arccos cancellation at small k; near-boundary values are clamped to the
// exact root when within a few ulp, which keeps noiseless round trips at the
// 1e-13 level.

inline double invert_1d(double r, double c, RatioForm form, double a = 1.0) {
    if (!(c > 0.0)) throw inversion_error("invert_1d: calibration must be > 0");
    if (r < 0.0) throw inversion_error("invert_1d: ratio must be >= 0");
    double q = r / (4.0 * c);
    if (q > 1.05) throw inversion_error("invert_1d: ratio exceeds the geometry maximum by >5%");
    q = clamp01(q);
    double y = form == RatioForm::cos2 ? 1.0 - q : 1.0 - std::sqrt(q);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (std::abs(y) <= 8.0 * eps) y = 0.0;
    if (std::abs(1.0 - y) <= 8.0 * eps) y = 1.0;
    return 2.0 / a * std::asin(std::sqrt(clamp01(y)));
}

// 2D: with u = cos^2(kx a/2), v = cos^2(ky a/2), the two measured ratios give
// u+v = r2/(2 c1) and uv = r3/(16 c2). In y-variables (y = 1-x) the quadratic
// is y^2 - B y + C = 0 with B = 2-S, C = 1-S+P.
inline std::array<double, 2> invert_2d(double r2, double r3, double c1, double c2,
                                       double a = 1.0) {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw inversion_error("invert_2d: calibrations must be > 0");
    if (r2 < 0.0 || r3 < 0.0) throw inversion_error("invert_2d: ratios must be >= 0");
    double S = r2 / (2.0 * c1);
    double P = r3 / (16.0 * c2);
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double mag = 1.0 + std::abs(S) + std::abs(P);
    double B = 2.0 - S;
    double C = 1.0 - S + P;
    if (std::abs(C) <= 8.0 * eps * mag) C = 0.0;
    if (std::abs(B) <= 8.0 * eps * mag) B = 0.0;
    double disc = B * B - 4.0 * C;
    if (std::abs(disc) <= 64.0 * eps * mag * mag) disc = 0.0;
    if (disc < 0.0) {
        // tolerate small negative discriminants (noise): relative 5% on B^2
        if (disc < -0.05 * std::max(B * B, 4.0 * std::abs(C)) - 64.0 * eps * mag * mag)
            throw inversion_error("invert_2d: discriminant negative beyond tolerance");
        disc = 0.0;
    }
    double root = std::sqrt(disc);
    double yb = 0.5 * (B + root);
    double ys = yb > 0.0 ? C / yb : 0.0;
    auto check_clip = [](double y, const char* which) {
        if (y < -0.05 || y > 1.05) {
            throw inversion_error(std::string("invert_2d: root ") + which +
                                  " outside [0,1] beyond 5% tolerance");
        }
        return clamp01(y);
    };
    ys = check_clip(ys, "small");
    yb = check_clip(yb, "large");
    double k_small = 2.0 / a * std::asin(std::sqrt(ys));
    double k_large = 2.0 / a * std::asin(std::sqrt(yb));
    return {k_small, k_large}; // ascending |k|
}

// --------------------------------------------------------------------------
// Measurement window: sinc peaks resolvable (t >= max_k 4*pi/(|v_k| V_R) with
// V_R = 1/(N_s a)) yet perturbative (t <= 1/g). Modes with essentially zero
// group velocity (band extrema under finite differences) are excluded from the
// lower-bound maximization and reported.

struct MeasurementWindow {
    double t_min = 0.0;
    double t_max = 0.0;
    bool empty = false;
    int excluded_modes = 0;
    std::vector<std::string> warnings;
};

namespace detail {
template <class Model>
inline MeasurementWindow window_from_speeds(const Model& model, double g,
                                            const std::vector<double>& speeds) {
    if (!(g > 0.0)) throw contract_error("measurement_window: g must be > 0");
    MeasurementWindow w;
    w.t_max = 1.0 / g;
    double vmax = 0.0;
    for (double v : speeds) vmax = std::max(vmax, v);
    if (vmax <= 0.0) throw contract_error("measurement_window: no mode has nonzero group velocity");
    double floor = 1e-6 * vmax;
    double vr = 1.0 / (model.grid.sites_per_axis * model.grid.lattice_constant);
    for (double v : speeds) {
        if (v < floor) {
            ++w.excluded_modes;
            continue;
        }
        w.t_min = std::max(w.t_min, 4.0 * pi / (v * vr));
    }
    if (w.excluded_modes > 0)
        w.warnings.push_back("excluded " + std::to_string(w.excluded_modes) +
                             " near-stationary modes from the resolvability bound");
    if (w.t_min >= w.t_max) {
        w.empty = true;
        w.warnings.push_back("window empty: coupling too large for this system size");
    }
    return w;
}
} // namespace detail

inline MeasurementWindow measurement_window(const KitaevModel& model, double g) {
    std::vector<double> speeds;
    for (int i = 0; i < model.grid.mode_count(); ++i) {
        Vec2 v = group_velocity(model, i);
        speeds.push_back(std::abs(v.x));
    }
    return detail::window_from_speeds(model, g, speeds);
}

inline MeasurementWindow measurement_window(const BHModel& model, double g) {
    std::vector<double> speeds;
    for (int i = 1; i < model.grid.mode_count(); ++i) {
        Vec2 v = group_velocity(model, i);
        speeds.push_back(std::hypot(v.x, v.y));
    }
    return detail::window_from_speeds(model, g, speeds);
}

// --------------------------------------------------------------------------
// Noise injection: each amplitude scaled by (1 + eps*u), u uniform in [-1,1].

inline PeakSet inject_noise(const PeakSet& peaks, double relative_error, std::uint64_t seed) {
    if (relative_error < 0.0) throw contract_error("inject_noise: relative error must be >= 0");
    PeakSet out = peaks;
    out.metadata.seed = seed;
    Rng rng(seed);
    for (auto& p : out.peaks) p.amplitude *= 1.0 + relative_error * rng.symmetric_unit();
    return out;
}

// --------------------------------------------------------------------------
// Assignment pipelines: match, calibrate (blind init, then fixed-point
// refinement against the snapped assignment), invert, snap.

struct DispersionPoint {
    std::array<double, 2> k{0.0, 0.0}; // 1D: {|k|, 0}; 2D: sorted {|k_lo|, |k_hi|}
    double omega = 0.0;
};

struct ReconstructedDispersion {
    int dimension = 1;
    std::vector<DispersionPoint> points;
    std::vector<double> unassigned; // frequencies whose inversion/matching failed
    std::vector<double> calibrations; // blind estimate first, refined estimate(s) after
    std::vector<std::string> notes;
};

struct AssignOptions {
    int max_iterations = 14;
    double match_tolerance = 0.0; // 0 -> 4*pi/t
};

inline ReconstructedDispersion assign_1d(const PeakSet& base, const PeakSet& alt,
                                         const BrillouinGrid& grid, RatioForm form,
                                         AssignOptions opt = {}) {
    if (grid.dimension != 1) throw contract_error("assign_1d: grid must be one-dimensional");
    ReconstructedDispersion out;
    out.dimension = 1;
    double tol = opt.match_tolerance > 0.0 ? opt.match_tolerance : 4.0 * pi / base.time;
    MatchResult m = match_peaks(base, alt, tol);
    for (int i : m.orphan_base) out.unassigned.push_back(base.peaks[static_cast<std::size_t>(i)].frequency);
    for (int j : m.orphan_alt) out.unassigned.push_back(alt.peaks[static_cast<std::size_t>(j)].frequency);
    if (m.pairs.size() < 3)
        throw calibration_error("assign_1d: need at least 3 matched peaks");
    GeometryKind kind = form == RatioForm::cos2 ? GeometryKind::line_pair : GeometryKind::line_pair_sq;
    std::vector<double> ratios;
    std::vector<double> freqs;
    for (auto [i, j] : m.pairs) {
        ratios.push_back(alt.peaks[static_cast<std::size_t>(j)].amplitude /
                         base.peaks[static_cast<std::size_t>(i)].amplitude);
        freqs.push_back(base.peaks[static_cast<std::size_t>(i)].frequency);
    }
    double c = 0.0;
    for (double r : ratios) c += r;
    c /= static_cast<double>(ratios.size()) * bz_mean(kind);
    out.calibrations.push_back(c);

    std::vector<int> snapped(ratios.size(), -1), prev(ratios.size(), -2);
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        for (std::size_t i = 0; i < ratios.size(); ++i) {
            try {
                double k = invert_1d(ratios[i], c, form, grid.lattice_constant);
                snapped[i] = grid.snap_axis(k);
            } catch (const inversion_error&) {
                snapped[i] = -1;
            }
        }
        if (snapped == prev) break;
        prev = snapped;
        double rs = 0.0, gs = 0.0;
        for (std::size_t i = 0; i < ratios.size(); ++i) {
            if (snapped[i] < 0) continue;
            rs += ratios[i];
            gs += geometry_value(kind, grid.axis_value(snapped[i]), 0.0, grid.lattice_constant);
        }
        if (gs > 0.0) c = rs / gs;
    }
    out.calibrations.push_back(c);
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (snapped[i] < 0) {
            out.unassigned.push_back(freqs[i]);
            continue;
        }
        out.points.push_back({{grid.axis_value(snapped[i]), 0.0}, freqs[i]});
    }
    std::sort(out.points.begin(), out.points.end(),
              [](const DispersionPoint& a, const DispersionPoint& b) { return a.omega < b.omega; });
    return out;
}

inline ReconstructedDispersion assign_2d(const PeakSet& on_site, const PeakSet& edge,
                                         const PeakSet& diagonal, const BrillouinGrid& grid,
                                         AssignOptions opt = {}) {
    if (grid.dimension != 2) throw contract_error("assign_2d: grid must be two-dimensional");
    ReconstructedDispersion out;
    out.dimension = 2;
    double tol = opt.match_tolerance > 0.0 ? opt.match_tolerance : 4.0 * pi / on_site.time;
    MatchResult m2 = match_peaks(on_site, edge, tol);
    MatchResult m3 = match_peaks(on_site, diagonal, tol);
    std::map<int, int> edge_of, diag_of;
    for (auto [i, j] : m2.pairs) edge_of[i] = j;
    for (auto [i, j] : m3.pairs) diag_of[i] = j;

    std::vector<double> r2, r3, freqs;
    for (int i = 0; i < static_cast<int>(on_site.peaks.size()); ++i) {
        auto e = edge_of.find(i);
        auto d = diag_of.find(i);
        if (e == edge_of.end() || d == diag_of.end()) {
            out.unassigned.push_back(on_site.peaks[static_cast<std::size_t>(i)].frequency);
            continue;
        }
        double b = on_site.peaks[static_cast<std::size_t>(i)].amplitude;
        r2.push_back(edge.peaks[static_cast<std::size_t>(e->second)].amplitude / b);
        r3.push_back(diagonal.peaks[static_cast<std::size_t>(d->second)].amplitude / b);
        freqs.push_back(on_site.peaks[static_cast<std::size_t>(i)].frequency);
    }
    if (r2.size() < 3) throw calibration_error("assign_2d: need at least 3 matched peak triples");

    // blind init normalized by the orbit-space means (what peak lists sample)
    double mg1 = orbit_mean_geometry(grid, GeometryKind::plane_edge, true);
    double mg2 = orbit_mean_geometry(grid, GeometryKind::plane_diag, true);
    double c1 = 0.0, c2 = 0.0;
    for (double r : r2) c1 += r;
    for (double r : r3) c2 += r;
    c1 /= static_cast<double>(r2.size()) * mg1;
    c2 /= static_cast<double>(r3.size()) * mg2;
    out.calibrations.push_back(c1);
    out.calibrations.push_back(c2);

    std::vector<std::array<int, 2>> snapped(r2.size(), {-1, -1}), prev(r2.size(), {-2, -2});
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        for (std::size_t i = 0; i < r2.size(); ++i) {
            try {
                auto kk = invert_2d(r2[i], r3[i], c1, c2, grid.lattice_constant);
                int flo = grid.snap_axis(kk[0]);
                int fhi = grid.snap_axis(kk[1]);
                if (flo > fhi) std::swap(flo, fhi);
                snapped[i] = {flo, fhi};
            } catch (const inversion_error&) {
                snapped[i] = {-1, -1};
            }
        }
        if (snapped == prev) break;
        prev = snapped;
        double rs2 = 0.0, gs2 = 0.0, rs3 = 0.0, gs3 = 0.0;
        for (std::size_t i = 0; i < r2.size(); ++i) {
            if (snapped[i][0] < 0) continue;
            double klo = grid.axis_value(snapped[i][0]);
            double khi = grid.axis_value(snapped[i][1]);
            rs2 += r2[i];
            gs2 += geometry_value(GeometryKind::plane_edge, klo, khi, grid.lattice_constant);
            rs3 += r3[i];
            gs3 += geometry_value(GeometryKind::plane_diag, klo, khi, grid.lattice_constant);
        }
        if (gs2 > 0.0) c1 = rs2 / gs2;
        if (gs3 > 0.0) c2 = rs3 / gs3;
    }
    out.calibrations.push_back(c1);
    out.calibrations.push_back(c2);
    for (std::size_t i = 0; i < r2.size(); ++i) {
        if (snapped[i][0] < 0) {
            out.unassigned.push_back(freqs[i]);
            continue;
        }
        out.points.push_back(
            {{grid.axis_value(snapped[i][0]), grid.axis_value(snapped[i][1])}, freqs[i]});
    }
    std::sort(out.points.begin(), out.points.end(),
              [](const DispersionPoint& a, const DispersionPoint& b) { return a.omega < b.omega; });
    return out;
}

// --------------------------------------------------------------------------
// Sweep segment planning: the full band is mostly empty at fine resolution, so
// the frequency grid covers only neighbourhoods of the resonance lines (an
// adaptive scan would find the same support). Overlapping neighbourhoods merge;
// each resulting segment is a uniform grid at the nominal spacing 2*pi/(5t).

struct SegmentPlan {
    std::vector<std::pair<double, double>> intervals; // [nu_lo, nu_hi]
    std::size_t total_points = 0;
};

inline SegmentPlan plan_segments(const std::vector<SpectralLine>& lines, double t,
                                 double margin_lobes = 30.0, bool positive_only = true,
                                 double weight_floor_rel = 0.0) {
    if (!(t > 0.0)) throw contract_error("plan_segments: t must be > 0");
    double wmax = 0.0;
    for (const auto& l : lines) wmax = std::max(wmax, l.weight);
    std::vector<double> centers;
    for (const auto& l : lines) {
        if (positive_only && l.omega <= 0.0) continue;
        if (l.weight < weight_floor_rel * wmax) continue;
        centers.push_back(l.omega);
    }
    if (centers.empty()) return {};
    std::sort(centers.begin(), centers.end());
    double margin = margin_lobes * 4.0 * pi / t;
    SegmentPlan plan;
    double lo = centers.front() - margin, hi = centers.front() + margin;
    for (double c : centers) {
        if (c - margin <= hi) {
            hi = c + margin;
        } else {
            plan.intervals.emplace_back(lo, hi);
            lo = c - margin;
            hi = c + margin;
        }
    }
    plan.intervals.emplace_back(lo, hi);
    double dnu = two_pi / (5.0 * t);
    for (auto& [a, b] : plan.intervals)
        plan.total_points += static_cast<std::size_t>(std::ceil((b - a) / dnu)) + 1;
    return plan;
}

template <class LineSweep>
inline std::vector<TransitionCurve> sweep_segments(const SegmentPlan& plan, double t,
                                                   LineSweep&& sweep_fn) {
    std::vector<TransitionCurve> out;
    double dnu = two_pi / (5.0 * t);
    for (const auto& [lo, hi] : plan.intervals) {
        std::size_t count = static_cast<std::size_t>(std::ceil((hi - lo) / dnu)) + 1;
        out.push_back(sweep_fn(lo, dnu, count));
    }
    return out;
}

// --------------------------------------------------------------------------
// Bloch-function reconstruction by deconvolution: divide the transform of the
// sampled |A|(s) by the transform of the probe level-pair product, zeroing
// frequencies where the probe transform is negligible, and fix the global
// sign by positivity at the centre.

// Overlap envelope of the two probe wavefunctions at relative displacement x:
// the convolution kernel relating the Wannier profile to the measured
// amplitude samples.
inline double bloch_probe_kernel(const ProbeConfig& probe, double x) {
    double we = probe.width_e, wg = probe.width_g;
    double norm = std::pow(pi * we * we, -0.25) * std::pow(pi * wg * wg, -0.25);
    return norm * std::exp(-0.5 * x * x * (1.0 / (we * we) + 1.0 / (wg * wg)));
}

inline std::vector<double> bloch_reconstruct(const std::vector<double>& abs_samples,
                                             const ProbeConfig& probe, double sample_spacing) {
    probe.validate();
    std::size_t n = abs_samples.size();
    if (n < 8) throw contract_error("bloch_reconstruct: need at least 8 samples");
    if (!(sample_spacing > 0.0)) throw contract_error("bloch_reconstruct: spacing must be > 0");
    double h = sample_spacing;

    // probe kernel psi(x) = psi_e(x) * psi_g(x), sampled on the same grid,
    // centred at index n/2 (same convention as the input samples)
    std::vector<double> psi(n);
    for (std::size_t j = 0; j < n; ++j) {
        double x = (static_cast<double>(j) - static_cast<double>(n / 2)) * h;
        psi[j] = bloch_probe_kernel(probe, x);
    }

    auto fft = [n](std::vector<double> in_shifted) {
        // ifftshift: move centre sample to index 0 before transforming
        std::vector<cplx> buf(n);
        std::size_t mid = n / 2;
        for (std::size_t j = 0; j < n; ++j) buf[j] = in_shifted[(j + mid) % n];
        std::vector<cplx> out(n);
        fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(buf.data()),
                                       reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD,
                                       FFTW_ESTIMATE);
        fftw_execute(p);
        fftw_destroy_plan(p);
        return out;
    };

    std::vector<cplx> Af = fft(abs_samples);
    std::vector<cplx> Pf = fft(psi);
    double pmax = 0.0, amax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        pmax = std::max(pmax, std::abs(Pf[j]));
        amax = std::max(amax, std::abs(Af[j]));
    }
    if (pmax <= 0.0) throw deconvolution_error("bloch_reconstruct: probe kernel transform vanished");
    std::vector<cplx> Wf(n, cplx(0.0, 0.0));
    for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(Pf[j]) < 1e-6 * pmax) {
            if (std::abs(Af[j]) > 1e-3 * amax)
                throw deconvolution_error(
                    "bloch_reconstruct: signal present outside the probe band (ill-posed)");
            continue;
        }
        Wf[j] = Af[j] / (Pf[j] * h);
    }

    std::vector<cplx> wbuf(n);
    fftw_plan pb = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(Wf.data()),
                                    reinterpret_cast<fftw_complex*>(wbuf.data()), FFTW_BACKWARD,
                                    FFTW_ESTIMATE);
    fftw_execute(pb);
    fftw_destroy_plan(pb);

    std::vector<double> w(n);
    std::size_t mid = n / 2;
    for (std::size_t j = 0; j < n; ++j) {
        cplx v = wbuf[(j + (n - mid)) % n] / static_cast<double>(n); // fftshift + scaling
        if (!std::isfinite(v.real()))
            throw deconvolution_error("bloch_reconstruct: non-finite reconstruction");
        w[j] = v.real();
    }
    if (w[mid] < 0.0)
        for (auto& v : w) v = -v;
    return w;
}

} // namespace qprobe
