#pragma once
// Two-level probe in the Born-Markov regime: closed-form thermalization
// curves, adaptive numerical integration of the full master equation (both
// dissipators), and decay-rate extraction by least squares.
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_odeiv2.h>

#include "core.hpp"

namespace qprobe {

struct LindbladParams {
    double weight = 0.0;     // g^2 d(k) |J0 gamma(k)|^2, rate units
    double occupation = 0.0; // n(nu)
    Statistics statistics = Statistics::bosonic;

    void validate() const {
        if (!(weight >= 0.0)) throw contract_error("LindbladParams: weight must be >= 0");
        if (!(occupation >= 0.0)) throw contract_error("LindbladParams: occupation must be >= 0");
        if (statistics == Statistics::fermionic && occupation > 1.0)
            throw contract_error("LindbladParams: fermionic occupation must be <= 1");
    }
};

// Dissipator rates: gamma_down = w (1 + s n), gamma_up = w n,
// with s = +1 bosonic, -1 fermionic.
inline double absorption_rate(const LindbladParams& p) {
    p.validate();
    return p.weight * p.occupation;
}

inline double deexcitation_rate(const LindbladParams& p) {
    p.validate();
    double s = (p.statistics == Statistics::bosonic) ? 1.0 : -1.0;
    return p.weight * (1.0 + s * p.occupation);
}

// Total relaxation rate: gamma_B = w (2n+1) bosonic, gamma_F = w fermionic.
inline double decay_rate(const LindbladParams& p) {
    return absorption_rate(p) + deexcitation_rate(p);
}

inline double stationary_population(const LindbladParams& p) {
    p.validate();
    if (p.statistics == Statistics::bosonic)
        return p.occupation / (2.0 * p.occupation + 1.0);
    return p.occupation;
}

// rho_ee(t) starting from the ground state: p_inf (1 - e^{-gamma t}).
inline double excited_population(const LindbladParams& p, double t) {
    if (!(t >= 0.0)) throw contract_error("excited_population: t must be >= 0");
    double gamma = decay_rate(p);
    return -stationary_population(p) * std::expm1(-gamma * t);
}

// Full 2x2 density matrix samples: {rho_ee, rho_gg, Re rho_eg, Im rho_eg}.
using TwoLevelState = std::array<double, 4>;

namespace detail {
struct LindbladRates {
    double up, down;
};

inline int lindblad_rhs(double, const double y[], double dydt[], void* params) {
    const auto* r = static_cast<const LindbladRates*>(params);
    double total = r->up + r->down;
    dydt[0] = r->up * y[1] - r->down * y[0];
    dydt[1] = r->down * y[0] - r->up * y[1];
    dydt[2] = -0.5 * total * y[2];
    dydt[3] = -0.5 * total * y[3];
    return GSL_SUCCESS;
}
} // namespace detail

inline std::vector<TwoLevelState> evolve_numeric_states(const LindbladParams& p,
                                                        const std::vector<double>& t_grid,
                                                        double rel_tol = 1e-9) {
    p.validate();
    if (t_grid.empty()) return {};
    if (!(t_grid.front() >= 0.0)) throw contract_error("evolve_numeric: times must be >= 0");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (!(t_grid[i] >= t_grid[i - 1]))
            throw contract_error("evolve_numeric: time grid must be non-decreasing");
    gsl_quiet();

    detail::LindbladRates rates{absorption_rate(p), deexcitation_rate(p)};
    gsl_odeiv2_system sys{detail::lindblad_rhs, nullptr, 4, &rates};
    double hstart = 1e-6;
    double total = rates.up + rates.down;
    if (total > 0.0) hstart = std::min(hstart, 1e-3 / total);
    gsl_odeiv2_driver* drv =
        gsl_odeiv2_driver_alloc_y_new(&sys, gsl_odeiv2_step_rkf45, hstart, 1e-14, rel_tol);
    if (!drv) throw integration_error("evolve_numeric: driver allocation failed");

    std::vector<TwoLevelState> out;
    out.reserve(t_grid.size());
    double t = 0.0;
    double y[4] = {0.0, 1.0, 0.0, 0.0}; // |g><g|
    for (double target : t_grid) {
        if (target > t) {
            int status = gsl_odeiv2_driver_apply(drv, &t, target, y);
            if (status != GSL_SUCCESS) {
                gsl_odeiv2_driver_free(drv);
                throw integration_error("evolve_numeric: integrator failure, status " +
                                        std::to_string(status));
            }
        }
        out.push_back({y[0], y[1], y[2], y[3]});
    }
    gsl_odeiv2_driver_free(drv);
    return out;
}

inline std::vector<double> evolve_numeric(const LindbladParams& p,
                                          const std::vector<double>& t_grid,
                                          double rel_tol = 1e-9) {
    auto states = evolve_numeric_states(p, t_grid, rel_tol);
    std::vector<double> out(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) out[i] = states[i][0];
    return out;
}

// --------------------------------------------------------------------------
// Decay-rate extraction: fit p(t) = p_inf(n) (1 - e^{-c w t}) with the weight
// w as the single free parameter (occupation and statistics known). The
// decay_resolved flag reports whether the sample window actually constrains
// the exponential; it is cleared when the best fit sits at the search
// boundary or the window misses the decay entirely.

struct CouplingFit {
    double weight = 0.0;
    double residual = 0.0; // RMS misfit of the population samples
    bool decay_resolved = true;
};

inline CouplingFit extract_coupling(const std::vector<double>& times,
                                    const std::vector<double>& populations, double occupation,
                                    Statistics statistics) {
    if (times.size() != populations.size())
        throw contract_error("extract_coupling: size mismatch");
    if (times.size() < 10) throw contract_error("extract_coupling: need at least 10 samples");
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(populations[i]))
            throw contract_error("extract_coupling: non-finite sample");
        if (i > 0 && !(times[i] > times[i - 1]))
            throw contract_error("extract_coupling: times must be strictly increasing");
    }
    if (!(times.front() >= 0.0)) throw contract_error("extract_coupling: times must be >= 0");

    LindbladParams probe{1.0, occupation, statistics};
    probe.validate();
    double amp = stationary_population(probe);       // p_inf at w=1 (w-independent)
    double c = decay_rate(probe);                    // gamma per unit weight
    if (!(amp > 0.0)) throw estimation_error("extract_coupling: zero stationary population");

    double t_first = times.front() > 0.0 ? times.front() : times[1];
    double t_last = times.back();
    if (!(t_last > 0.0)) throw contract_error("extract_coupling: need positive times");

    auto sse = [&](double w) {
        double acc = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i) {
            double model = -amp * std::expm1(-w * c * times[i]);
            double r = populations[i] - model;
            acc += r * r;
        }
        return acc;
    };

    // log-space scan, then golden-section refinement
    double w_lo = 1e-6 / (c * t_last);
    double w_hi = 50.0 / (c * t_first);
    int scan_n = 600;
    double best_w = w_lo, best_s = std::numeric_limits<double>::infinity();
    int best_i = 0;
    for (int i = 0; i < scan_n; ++i) {
        double w = w_lo * std::pow(w_hi / w_lo, static_cast<double>(i) / (scan_n - 1));
        double s = sse(w);
        if (!std::isfinite(s)) throw estimation_error("extract_coupling: non-finite objective");
        if (s < best_s) {
            best_s = s;
            best_w = w;
            best_i = i;
        }
    }
    double lo = w_lo * std::pow(w_hi / w_lo, static_cast<double>(std::max(0, best_i - 1)) / (scan_n - 1));
    double hi = w_lo * std::pow(w_hi / w_lo, static_cast<double>(std::min(scan_n - 1, best_i + 1)) / (scan_n - 1));
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = std::log(lo), b = std::log(hi);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = sse(std::exp(x1)), f2 = sse(std::exp(x2));
    for (int it = 0; it < 200 && (b - a) > 1e-13; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = sse(std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = sse(std::exp(x2));
        }
    }
    double w_fit = std::exp(0.5 * (a + b));
    double s_fit = sse(w_fit);
    if (s_fit > best_s) {
        w_fit = best_w;
        s_fit = best_s;
    }
    if (!std::isfinite(w_fit) || !(w_fit > 0.0))
        throw estimation_error("extract_coupling: fit failed to converge");

    CouplingFit fit;
    fit.weight = w_fit;
    fit.residual = std::sqrt(s_fit / static_cast<double>(times.size()));
    double gamma = w_fit * c;
    bool at_boundary = w_fit >= 0.99 * w_hi || w_fit <= 1.01 * w_lo;
    fit.decay_resolved = !at_boundary && gamma * t_last >= 1.0 && gamma * t_first <= 5.0;
    return fit;
}

} // namespace qprobe
