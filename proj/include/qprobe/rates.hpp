#pragma once
// Single-probe transition rates: the time-rescaled sinc^2 mode sum, a direct
// double-time-integral evaluator for arbitrary bath correlators, the
// Bose-Hubbard three-term decomposition, and grid sweeps producing
// TransitionCurve objects. Sweeps have a fast path for uniform grids whose
// spacing is exactly 2*pi/(5t): the sinc phase then steps by pi/5, so sin^2 is
// 10-periodic along the grid and each mode needs one 10-entry table.
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "core.hpp"
#include "models.hpp"
#include "probe.hpp"

namespace qprobe {

// One resonance line: rate contribution weight * sinc^2((nu - omega) t / 2).
// Emission-side lines carry negative omega.
struct SpectralLine {
    double omega = 0.0;
    double weight = 0.0;
};

struct CurveMetadata {
    double g = 0.0;
    double beta = 0.0;
    std::string model_id;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

struct TransitionCurve {
    std::vector<double> nu_grid; // strictly increasing
    std::vector<double> values;  // time-rescaled rate, >= 0
    double time = 0.0;
    int config_index = 1;
    CurveMetadata metadata;

    void validate() const {
        if (nu_grid.size() != values.size())
            throw contract_error("TransitionCurve: grid/value size mismatch");
        if (!(time > 0.0)) throw contract_error("TransitionCurve: time must be > 0");
        double max_step = two_pi / (5.0 * time) * (1.0 + 1e-9);
        for (std::size_t i = 0; i < nu_grid.size(); ++i) {
            if (!std::isfinite(values[i]) || values[i] < 0.0)
                throw contract_error("TransitionCurve: values must be finite and >= 0");
            if (i > 0) {
                double step = nu_grid[i] - nu_grid[i - 1];
                if (step <= 0.0) throw contract_error("TransitionCurve: grid must be strictly increasing");
                if (step > max_step)
                    throw contract_error("TransitionCurve: grid spacing exceeds 2*pi/(5t)");
            }
        }
    }
};

// --------------------------------------------------------------------------
// Line builders.

inline std::vector<SpectralLine> kitaev_lines(const KitaevModel& model, double beta,
                                              int config_index, RatioForm form) {
    std::vector<SpectralLine> lines;
    for (const auto& m : model.modes(beta)) {
        double w = kitaev_amplitude_sq(m, config_index, form, model.grid.lattice_constant) *
                   m.occupation;
        lines.push_back({m.omega, w});
    }
    return lines;
}

// Absorption (+omega, weight n), emission (-omega, weight 1+n) and the elastic
// term for the superfluid. gamma0 is the direct level-pair overlap; it vanishes
// for orthogonal eigenfunctions of the same trap.
struct BHLineSet {
    std::vector<SpectralLine> lines; // absorption and emission together
    double elastic_weight = 0.0;     // |gamma0|^2 * Phi0^4 * (position factor)
};

inline BHLineSet bh_lines(const BHModel& model, double beta, int config_index,
                          double gamma0 = 0.0) {
    BHLineSet out;
    double a = model.grid.lattice_constant;
    double phi0_sq = model.n0;
    for (const auto& m : model.modes(beta)) {
        double amp = phi0_sq * bh_amplitude_sq(m, config_index, a);
        out.lines.push_back({m.omega, amp * m.occupation});
        out.lines.push_back({-m.omega, amp * (1.0 + m.occupation)});
    }
    double pos_factor = config_index == 1 ? 1.0 : geometry_factor(config_index - 1, Vec2{0.0, 0.0}, 2, a);
    out.elastic_weight = gamma0 * gamma0 * phi0_sq * phi0_sq * pos_factor;
    return out;
}

// --------------------------------------------------------------------------
// Point evaluators.

inline double rate_sinc_lines(const std::vector<SpectralLine>& lines, double nu, double t) {
    if (!(t > 0.0)) throw contract_error("rate_sinc: t must be > 0");
    double acc = 0.0;
    for (const auto& l : lines) acc += l.weight * sinc2_line(nu - l.omega, t);
    return acc;
}

inline double rate_sinc(const KitaevModel& model, double beta, int config_index, RatioForm form,
                        double nu, double t) {
    return rate_sinc_lines(kitaev_lines(model, beta, config_index, form), nu, t);
}

struct BHRateComponents {
    double elastic = 0.0;   // |gamma0|^2 Phi0^4 sinc(nu t) (times position factor)
    double emission = 0.0;  // sum of (1+n) lines, resonant at nu = -omega
    double absorption = 0.0; // sum of n lines, resonant at nu = +omega
    double total() const { return elastic + emission + absorption; }
};

inline BHRateComponents bh_rate_components(const BHModel& model, double beta, int config_index,
                                           double nu, double t, double gamma0 = 0.0) {
    if (!(t > 0.0)) throw contract_error("bh_rate_components: t must be > 0");
    BHLineSet ls = bh_lines(model, beta, config_index, gamma0);
    BHRateComponents out;
    out.elastic = ls.elastic_weight * sinc(nu * t);
    for (const auto& l : ls.lines) {
        double v = l.weight * sinc2_line(nu - l.omega, t);
        if (l.omega >= 0.0)
            out.absorption += v;
        else
            out.emission += v;
    }
    return out;
}

// --------------------------------------------------------------------------
// Sweeps.

namespace detail {

// values[j] += w * sin^2(x0 + j*phi) / (x0 + j*phi)^2 using the 10-periodic
// table (valid when 10*phi = 2*pi). Entries with |x| < eps are fixed up with
// the series form afterwards.
inline void accumulate_periodic10(std::vector<double>& values, double w, double x0, double phi) {
    const std::size_t n = values.size();
    double table[10];
    for (int r = 0; r < 10; ++r) {
        double s = std::sin(x0 + r * phi);
        table[r] = w * s * s;
    }
    std::size_t j = 0;
    while (j < n) {
        std::size_t blk = std::min<std::size_t>(10, n - j);
        for (std::size_t r = 0; r < blk; ++r) {
            double x = x0 + static_cast<double>(j + r) * phi;
            double x2 = x * x;
            if (x2 == 0.0) x2 = 1.0; // corrected below; keeps inf out of the array
            values[j + r] += table[r] / x2;
        }
        j += blk;
    }
    // Grid points straddling the resonance (x ~ 0): replace the tabulated
    // sin^2/x^2 value with the series-safe sinc^2 evaluation.
    double jcd = -x0 / phi;
    if (std::abs(jcd) > 1e15) return; // resonance far outside any real grid
    long jc = std::lround(jcd);
    for (long idx = jc - 2; idx <= jc + 2; ++idx) {
        if (idx < 0 || idx >= static_cast<long>(n)) continue;
        std::size_t u = static_cast<std::size_t>(idx);
        double x = x0 + static_cast<double>(idx) * phi;
        double x2 = x * x;
        if (x2 == 0.0) x2 = 1.0;
        double s = sinc(x);
        values[u] += w * s * s - table[idx % 10] / x2;
    }
}

inline void accumulate_direct(std::vector<double>& values, double w, double x0, double phi) {
    for (std::size_t j = 0; j < values.size(); ++j) {
        double x = x0 + static_cast<double>(j) * phi;
        double s = sinc(x);
        values[j] += w * s * s;
    }
}

} // namespace detail

// Uniform-grid sweep over a line set. nu_j = nu0 + j*dnu, j in [0, count).
inline TransitionCurve sweep_uniform(const std::vector<SpectralLine>& lines, double nu0,
                                     double dnu, std::size_t count, double t, int config_index,
                                     CurveMetadata metadata = {}, double elastic_weight = 0.0) {
    if (!(t > 0.0)) throw contract_error("sweep: t must be > 0");
    if (!(dnu > 0.0) && count > 1) throw contract_error("sweep: grid spacing must be > 0");
    TransitionCurve curve;
    curve.time = t;
    curve.config_index = config_index;
    curve.metadata = std::move(metadata);
    curve.nu_grid.resize(count);
    for (std::size_t j = 0; j < count; ++j) curve.nu_grid[j] = nu0 + static_cast<double>(j) * dnu;
    curve.values.assign(count, 0.0);
    if (count == 0) return curve;

    double phi = 0.5 * dnu * t;
    double nominal = two_pi / (5.0 * t);
    if (dnu > nominal * (1.0 + 1e-9))
        curve.metadata.warnings.push_back("grid spacing exceeds 2*pi/(5t); sinc peaks undersampled");
    bool periodic10 = std::abs(phi - pi / 5.0) < 1e-12;
    for (const auto& l : lines) {
        double x0 = 0.5 * (nu0 - l.omega) * t;
        if (periodic10)
            detail::accumulate_periodic10(curve.values, l.weight, x0, phi);
        else
            detail::accumulate_direct(curve.values, l.weight, x0, phi);
    }
    if (elastic_weight != 0.0) {
        bool clipped = false;
        for (std::size_t j = 0; j < count; ++j) {
            curve.values[j] += elastic_weight * sinc(curve.nu_grid[j] * t);
            if (curve.values[j] < 0.0) {
                curve.values[j] = 0.0;
                clipped = true;
            }
        }
        if (clipped)
            curve.metadata.warnings.push_back("elastic term drove the rate negative; clipped at 0");
    }
    return curve;
}

inline TransitionCurve sweep(const KitaevModel& model, double beta, int config_index,
                             RatioForm form, double nu0, double dnu, std::size_t count, double t,
                             CurveMetadata metadata = {}) {
    metadata.beta = beta;
    metadata.model_id = "kitaev";
    return sweep_uniform(kitaev_lines(model, beta, config_index, form), nu0, dnu, count, t,
                         config_index, std::move(metadata));
}

inline TransitionCurve sweep(const BHModel& model, double beta, int config_index, double nu0,
                             double dnu, std::size_t count, double t, CurveMetadata metadata = {},
                             double gamma0 = 0.0) {
    metadata.beta = beta;
    metadata.model_id = "bose_hubbard";
    BHLineSet ls = bh_lines(model, beta, config_index, gamma0);
    return sweep_uniform(ls.lines, nu0, dnu, count, t, config_index, std::move(metadata),
                         ls.elastic_weight);
}

// Arbitrary-grid sweep (plain evaluation; no uniformity assumption).
inline TransitionCurve sweep_grid(const std::vector<SpectralLine>& lines,
                                  const std::vector<double>& nu_grid, double t, int config_index,
                                  CurveMetadata metadata = {}) {
    if (!(t > 0.0)) throw contract_error("sweep: t must be > 0");
    TransitionCurve curve;
    curve.time = t;
    curve.config_index = config_index;
    curve.metadata = std::move(metadata);
    curve.nu_grid = nu_grid;
    curve.values.resize(nu_grid.size());
    for (std::size_t j = 0; j < nu_grid.size(); ++j)
        curve.values[j] = rate_sinc_lines(lines, nu_grid[j], t);
    return curve;
}

// --------------------------------------------------------------------------
// Direct numerical double integral of Eq-style transition probability:
// Gamma = g^2 * int_0^t int_0^t C(t1, t2) e^{-i nu (t1 - t2)} dt1 dt2.
// The bath correlator must be Hermitian: C(t1, t2) = conj(C(t2, t1)).
inline double rate_integral(const std::function<cplx(double, double)>& corr, double g, double nu,
                            double t, int n_points = 200) {
    if (!(t > 0.0)) throw contract_error("rate_integral: t must be > 0");
    if (n_points < 2) throw contract_error("rate_integral: need at least 2 quadrature points");
    GaussLegendre gl(n_points, 0.0, t);
    // spot-check Hermiticity on a few node pairs
    for (int s = 0; s < 3; ++s) {
        int i = (s * 7) % n_points, j = (s * 13 + 1) % n_points;
        cplx a = corr(gl.x[i], gl.x[j]), b = std::conj(corr(gl.x[j], gl.x[i]));
        double mag = std::abs(a) + std::abs(b);
        if (mag > 0.0 && std::abs(a - b) > 1e-9 * mag + 1e-15)
            throw contract_error("rate_integral: bath correlator is not Hermitian");
    }
    std::vector<cplx> phase(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) phase[i] = std::exp(cplx(0.0, -nu * gl.x[i]));
    cplx acc = 0.0;
    for (int i = 0; i < n_points; ++i) {
        for (int j = 0; j < n_points; ++j) {
            acc += gl.w[i] * gl.w[j] * corr(gl.x[i], gl.x[j]) * phase[i] * std::conj(phase[j]);
        }
    }
    acc *= g * g;
    double mag = std::abs(acc);
    if (mag > 0.0 && std::abs(acc.imag()) > 1e-9 * mag)
        throw integration_error("rate_integral: non-negligible imaginary part");
    return acc.real();
}

// Mode-sum bath correlator used by the cross-checks: C(t1, t2) =
// sum_lines weight * e^{i omega (t1 - t2)}.
inline std::function<cplx(double, double)> line_correlator(std::vector<SpectralLine> lines) {
    return [lines = std::move(lines)](double t1, double t2) {
        cplx acc = 0.0;
        for (const auto& l : lines) acc += l.weight * std::exp(cplx(0.0, l.omega * (t1 - t2)));
        return acc;
    };
}

} // namespace qprobe
