#pragma once
// Probe definition: two selected levels, position offset, Gaussian overlap
// integrals J_i, geometry factors G_i(k) and position-dependent interaction
// amplitudes for both models.
#include <cmath>
#include <vector>

#include "core.hpp"
#include "grid.hpp"
#include "models.hpp"

namespace qprobe {

struct ProbeConfig {
    double nu = 0.0;    // tunable level gap
    double g = 1e-3;    // dimensionless coupling, g << bandwidth
    Vec2 offset{};      // position offset in lattice units
    double width_g = 0.1; // Gaussian width of the lower-level wavefunction (units of a)
    double width_e = 0.1; // Gaussian width of the upper-level wavefunction

    void validate() const {
        if (!(g > 0.0)) throw contract_error("ProbeConfig: coupling g must be > 0");
        if (!(width_g > 0.0) || !(width_e > 0.0))
            throw contract_error("ProbeConfig: wavefunction widths must be > 0");
    }
};

// Which functional form relates the displaced-probe amplitude to the on-site
// one for the Kitaev ring: |1+e^{ika}|^2 = 4cos^2(ka/2), or (1+cos ka)^2.
enum class RatioForm { cos2, cos4 };

// Amplitude-ratio geometry factors for half-site displaced probes.
inline double geometry_factor(int config_index, const Vec2& k, int dimension, double a = 1.0) {
    double cx = std::cos(0.5 * k.x * a);
    if (dimension == 1) {
        if (config_index != 1) throw contract_error("geometry_factor: 1D supports index 1 only");
        return 4.0 * cx * cx;
    }
    double cy = std::cos(0.5 * k.y * a);
    if (config_index == 1) return 2.0 * (cx * cx + cy * cy);
    if (config_index == 2) return 16.0 * cx * cx * cy * cy;
    throw contract_error("geometry_factor: 2D supports indices 1 and 2");
}

inline double kitaev_pair_factor(double k, double a, RatioForm form) {
    if (form == RatioForm::cos2) {
        double c = std::cos(0.5 * k * a);
        return 4.0 * c * c;
    }
    double b = 1.0 + std::cos(k * a);
    return b * b;
}

// Squared interaction amplitude per mode. Position label: 1 = on-site,
// 2 = half-site displaced (1D), and for the 2D lattice 2 = edge-centred
// (averaged over the two orientations) and 3 = plaquette-centred.
inline double kitaev_amplitude_sq(const ModeData& mode, int config_index, RatioForm form,
                                  double a = 1.0, double overlap_ratio_sq = 1.0) {
    double base = mode.coupling * mode.coupling;
    if (config_index == 1) return base;
    if (config_index == 2) return overlap_ratio_sq * kitaev_pair_factor(mode.k.x, a, form) * base;
    throw contract_error("kitaev_amplitude_sq: config index must be 1 or 2");
}

inline double bh_amplitude_sq(const ModeData& mode, int config_index, double a = 1.0,
                              double overlap_ratio_sq = 1.0) {
    double base = mode.coupling * mode.coupling;
    if (config_index == 1) return base;
    return overlap_ratio_sq * geometry_factor(config_index - 1, mode.k, 2, a) * base;
}

// Signed amplitude for a single probe position (no orientation averaging);
// used by the exact-dynamics couplings.
inline double kitaev_amplitude(const ModeData& mode, int config_index, RatioForm form,
                               double a = 1.0) {
    if (config_index == 1) return mode.coupling;
    if (config_index != 2) throw contract_error("kitaev_amplitude: config index must be 1 or 2");
    if (form == RatioForm::cos2) return 2.0 * std::cos(0.5 * mode.k.x * a) * mode.coupling;
    return (1.0 + std::cos(mode.k.x * a)) * mode.coupling;
}

// --------------------------------------------------------------------------
// Overlap integrals of normalized Gaussians: probe level pair at displacement
// d from the nearest site, against a Gaussian-approximated on-site function.
struct OverlapSet {
    std::vector<double> J_values; // J_0, J_1[, J_2]
    std::vector<double> ratios;   // |J_i/J_0|^2
};

namespace detail {
// integral over one axis of N(x-d; we) N(x-d; wg) N(x; ww), all L2-normalized
// Gaussians exp(-x^2/(2w^2)) / (pi w^2)^{1/4} ... combined as densities:
// closed form of int exp(-A(x-d)^2 - B x^2) dx = sqrt(pi/(A+B)) exp(-A B d^2/(A+B)).
inline double axis_overlap(double d, double we, double wg, double ww) {
    double A = 0.5 / (we * we) + 0.5 / (wg * wg);
    double B = 0.5 / (ww * ww);
    double norm = std::pow(pi * we * we, -0.25) * std::pow(pi * wg * wg, -0.25) *
                  std::pow(pi * ww * ww, -0.25);
    return norm * std::sqrt(pi / (A + B)) * std::exp(-A * B * d * d / (A + B));
}
} // namespace detail

inline OverlapSet overlap_integrals(const ProbeConfig& probe, double wannier_width, int dimension) {
    probe.validate();
    if (!(wannier_width > 0.0)) throw contract_error("overlap_integrals: wannier width must be > 0");
    auto axis = [&](double d) {
        return detail::axis_overlap(d, probe.width_e, probe.width_g, wannier_width);
    };
    OverlapSet out;
    if (dimension == 1) {
        out.J_values = {axis(0.0), axis(0.5)};
    } else if (dimension == 2) {
        double on = axis(0.0), half = axis(0.5);
        out.J_values = {on * on, half * on, half * half};
    } else {
        throw contract_error("overlap_integrals: dimension must be 1 or 2");
    }
    double j0 = out.J_values.front();
    for (std::size_t i = 1; i < out.J_values.size(); ++i) {
        double r = out.J_values[i] / j0;
        out.ratios.push_back(r * r);
    }
    return out;
}

// Out-of-plane transition factor for a harmonic-oscillator level pair
// (n_z excited against the ground state) overlapping an on-site Gaussian:
// single real prefactor including the (-1)^{n_z} sign. n_z <= 2.
inline double ho_transition_prefactor(int n_z, double we, double wg, double ww) {
    if (n_z < 0 || n_z > 2) throw contract_error("ho_transition_prefactor: n_z must be 0..2");
    if (!(we > 0.0) || !(wg > 0.0) || !(ww > 0.0))
        throw contract_error("ho_transition_prefactor: widths must be > 0");
    double C = 0.5 / (we * we) + 0.5 / (wg * wg) + 0.5 / (ww * ww);
    double norm0 = std::pow(pi * we * we, -0.25) * std::pow(pi * wg * wg, -0.25) *
                   std::pow(pi * ww * ww, -0.25);
    double m0 = std::sqrt(pi / C);
    double sign = (n_z % 2 == 0) ? 1.0 : -1.0;
    if (n_z == 0) return sign * norm0 * m0;
    if (n_z == 1) return 0.0; // odd integrand vanishes
    // n_z = 2: Hermite H_2(z/we) = 4 z^2/we^2 - 2, normalization 1/sqrt(2^2 2!)
    double m2 = 0.5 / C * m0;
    return sign * norm0 / std::sqrt(8.0) * (4.0 * m2 / (we * we) - 2.0 * m0);
}

} // namespace qprobe
