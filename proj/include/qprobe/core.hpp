#pragma once
// Shared numerics: error taxonomy, sinc kernels, thermal factors, RNG, quadrature nodes.
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

namespace qprobe {

// GSL aborts on error by default; switch to status codes so callers can throw.
inline void gsl_quiet() {
    static const bool done = (gsl_set_error_handler_off(), true);
    (void)done;
}

inline constexpr double pi = 3.141592653589793238462643383279502884;
inline constexpr double two_pi = 2.0 * pi;

using cplx = std::complex<double>;

// Error taxonomy: contract violations (bad arguments, broken preconditions),
// capacity limits (state spaces, caps), inversion/calibration failures in the
// reconstruction pipeline, and I/O problems.
struct contract_error : std::runtime_error { using std::runtime_error::runtime_error; };
struct capacity_error : std::runtime_error { using std::runtime_error::runtime_error; };
struct inversion_error : std::runtime_error { using std::runtime_error::runtime_error; };
struct calibration_error : std::runtime_error { using std::runtime_error::runtime_error; };
struct integration_error : std::runtime_error { using std::runtime_error::runtime_error; };
struct estimation_error : std::runtime_error { using std::runtime_error::runtime_error; };
struct deconvolution_error : std::runtime_error { using std::runtime_error::runtime_error; };
struct io_error : std::runtime_error { using std::runtime_error::runtime_error; };

enum class Statistics { fermionic, bosonic };

// sinc(x) = sin(x)/x, sinc(0) = 1.
inline double sinc(double x) {
    double ax = std::abs(x);
    if (ax < 1e-4) {
        double x2 = x * x;
        return 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0);
    }
    return std::sin(x) / x;
}

// sinc^2((nu - omega) t / 2): the spectral line shape of a finite-time probe.
inline double sinc2_line(double detuning, double t) {
    double s = sinc(0.5 * detuning * t);
    return s * s;
}

// Thermal occupation of a mode at frequency omega. beta = +inf is the
// zero-temperature sentinel. Bosonic modes require omega > 0 (a zero-frequency
// boson must be handled upstream, e.g. the condensate mode).
inline double thermal_occupation(double omega, double beta, Statistics stat) {
    if (stat == Statistics::bosonic && omega <= 0.0)
        throw contract_error("thermal_occupation: bosonic mode requires omega > 0");
    if (std::isinf(beta)) {
        if (stat == Statistics::bosonic) return 0.0;
        return omega > 0.0 ? 0.0 : (omega < 0.0 ? 1.0 : 0.5);
    }
    if (beta <= 0.0) throw contract_error("thermal_occupation: beta must be > 0 (or +inf)");
    double x = beta * omega;
    if (stat == Statistics::fermionic) return 1.0 / (std::exp(x) + 1.0);
    if (x > 700.0) return 0.0;
    return 1.0 / std::expm1(x);
}

inline double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

// Deterministic RNG stream; one instance per logical stream so concurrent
// pipelines stay reproducible.
struct Rng {
    std::mt19937_64 eng;
    explicit Rng(std::uint64_t seed) : eng(seed) {}
    double uniform(double a, double b) {
        std::uniform_real_distribution<double> d(a, b);
        return d(eng);
    }
    double symmetric_unit() { return uniform(-1.0, 1.0); }
};

// Gauss-Legendre nodes/weights on [a, b].
struct GaussLegendre {
    std::vector<double> x, w;
    GaussLegendre(int n, double a, double b) : x(n), w(n) {
        if (n < 1) throw contract_error("GaussLegendre: need n >= 1");
        gsl_quiet();
        gsl_integration_glfixed_table* tbl = gsl_integration_glfixed_table_alloc(static_cast<std::size_t>(n));
        if (!tbl) throw integration_error("GaussLegendre: table allocation failed");
        for (int i = 0; i < n; ++i) {
            double xi = 0.0, wi = 0.0;
            gsl_integration_glfixed_point(a, b, static_cast<std::size_t>(i), &xi, &wi, tbl);
            x[static_cast<std::size_t>(i)] = xi;
            w[static_cast<std::size_t>(i)] = wi;
        }
        gsl_integration_glfixed_table_free(tbl);
    }
};

inline bool nearly_equal(double a, double b, double tol) { return std::abs(a - b) <= tol; }

} // namespace qprobe
