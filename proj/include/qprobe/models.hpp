#pragma once
// Solvable lattice models: long-range Kitaev ring (1D), Bose-Hubbard superfluid
// at Bogoliubov level (2D), and a synthetic mode set for tests. Each exposes
// dispersion, coupling factor, degeneracy and thermal occupation per mode.
#include <cmath>
#include <string>
#include <vector>

#include "core.hpp"
#include "grid.hpp"

namespace qprobe {

struct ModeData {
    Vec2 k;
    int flat_index = 0;
    double omega = 0.0;
    double coupling = 1.0; // Kitaev: cos(theta/2); BH: (u - v) density factor
    double theta = 0.0;    // Bogoliubov angle (Kitaev only)
    int degeneracy = 1;
    double occupation = 0.0;
    Statistics statistics = Statistics::fermionic;
    bool gapless = false;
};

// --------------------------------------------------------------------------
// Kitaev ring with power-law hopping J_r = J |pi / (N sin(pi r / N))|^alpha,
// pairing gap 2*Delta*sin(k). Delta sets the energy and inverse-time unit.
struct KitaevModel {
    double J = 5.0;
    double Delta = 1.0;
    double alpha = 0.3;
    BrillouinGrid grid;

    KitaevModel(double J_, double Delta_, double alpha_, int ns, double a = 1.0)
        : J(J_), Delta(Delta_), alpha(alpha_), grid(1, ns, a) {
        if (Delta <= 0.0) throw contract_error("KitaevModel: Delta must be > 0");
    }

    double hopping(int r) const {
        int n = grid.sites_per_axis;
        if (r < 1 || r > n - 1) throw contract_error("KitaevModel: hopping separation out of range");
        return J * std::pow(std::abs(pi / (n * std::sin(pi * r / n))), alpha);
    }

    // Single-particle energy: ring sum over distinct bonds. Odd N: all bonds
    // come in mirror pairs; even N additionally has the unpaired diameter bond.
    double eps(double k) const {
        int n = grid.sites_per_axis;
        double a = grid.lattice_constant;
        double s = 0.0;
        for (int r = 1; r <= (n - 1) / 2; ++r) s += 2.0 * hopping(r) * std::cos(k * r * a);
        if (n % 2 == 0) s += hopping(n / 2) * std::cos(k * (n / 2) * a);
        return s;
    }

    double pairing(double k) const { return 2.0 * Delta * std::sin(k * grid.lattice_constant); }

    double omega(double k) const { return std::hypot(eps(k), pairing(k)); }

    double theta(double k) const {
        double e = eps(k), d = pairing(k);
        if (std::abs(e) < 1e-300 && std::abs(d) < 1e-300) return 0.0; // gapless convention
        return std::atan2(d, e);
    }

    std::vector<ModeData> modes(double beta) const {
        std::vector<ModeData> out;
        out.reserve(static_cast<std::size_t>(grid.mode_count()));
        for (int i = 0; i < grid.mode_count(); ++i) {
            ModeData m;
            m.k = grid.momentum(i);
            m.flat_index = i;
            m.omega = omega(m.k.x);
            m.theta = theta(m.k.x);
            m.coupling = std::cos(0.5 * m.theta);
            m.degeneracy = grid.degeneracy(i);
            m.statistics = Statistics::fermionic;
            m.gapless = m.omega < 1e-12;
            m.occupation = m.gapless && std::isinf(beta) ? 0.5
                                                        : thermal_occupation(m.omega, beta, m.statistics);
            out.push_back(m);
        }
        return out;
    }
};

// --------------------------------------------------------------------------
// 2D Bose-Hubbard superfluid, Bogoliubov spectrum over a square lattice.
struct BHModel {
    double J = 1.0;
    double U = 0.1;
    double n0 = 1.0; // condensate filling; Phi0^2 = n0
    BrillouinGrid grid;

    BHModel(double J_, double U_, double n0_, int ns, double a = 1.0)
        : J(J_), U(U_), n0(n0_), grid(2, ns, a) {
        if (J <= 0.0) throw contract_error("BHModel: J must be > 0");
        if (U < 0.0) throw contract_error("BHModel: U must be >= 0");
        if (n0 <= 0.0) throw contract_error("BHModel: condensate filling must be > 0");
    }

    double eps0(const Vec2& k) const {
        double a = grid.lattice_constant;
        double sx = std::sin(0.5 * k.x * a), sy = std::sin(0.5 * k.y * a);
        return 4.0 * J * (sx * sx + sy * sy);
    }

    double omega(const Vec2& k) const {
        double e = eps0(k);
        return std::sqrt(e * (e + 2.0 * U * n0));
    }

    // density coherence factor (u_k - v_k) = sqrt(eps0/omega), k != 0
    double coupling(const Vec2& k) const {
        double e = eps0(k);
        if (e <= 0.0) throw contract_error("BHModel: coupling undefined at the condensate mode");
        return std::sqrt(e / omega(k));
    }

    double sound_speed() const { return grid.lattice_constant * std::sqrt(2.0 * U * n0 * J); }

    // All grid modes except k = 0 (the condensate is removed from the mode set).
    std::vector<ModeData> modes(double beta) const {
        if (!(beta > 0.0)) throw contract_error("BHModel: modes require beta > 0 (or +inf)");
        std::vector<ModeData> out;
        out.reserve(static_cast<std::size_t>(grid.mode_count() - 1));
        for (int i = 0; i < grid.mode_count(); ++i) {
            if (i == 0) continue;
            ModeData m;
            m.k = grid.momentum(i);
            m.flat_index = i;
            m.omega = omega(m.k);
            m.coupling = coupling(m.k);
            m.degeneracy = grid.degeneracy(i);
            m.statistics = Statistics::bosonic;
            m.occupation = thermal_occupation(m.omega, beta, m.statistics);
            out.push_back(m);
        }
        return out;
    }
};

// --------------------------------------------------------------------------
// Synthetic mode list for tests and the exact-dynamics oracle.
struct SyntheticModel {
    std::vector<double> frequencies;
    std::vector<double> amplitudes;
    std::vector<double> occupations; // empty -> thermal at the requested beta
    Statistics statistics = Statistics::fermionic;

    std::vector<ModeData> modes(double beta) const {
        if (frequencies.size() != amplitudes.size())
            throw contract_error("SyntheticModel: frequency/amplitude size mismatch");
        if (!occupations.empty() && occupations.size() != frequencies.size())
            throw contract_error("SyntheticModel: occupation list size mismatch");
        std::vector<ModeData> out;
        for (std::size_t i = 0; i < frequencies.size(); ++i) {
            ModeData m;
            m.k.x = 0.0;
            m.flat_index = static_cast<int>(i);
            m.omega = frequencies[i];
            m.coupling = amplitudes[i];
            m.degeneracy = 1;
            m.statistics = statistics;
            m.occupation = !occupations.empty() ? occupations[i]
                                                : thermal_occupation(m.omega, beta, statistics);
            out.push_back(m);
        }
        return out;
    }
};

// Central finite-difference group velocity on the grid (periodic neighbours).
inline Vec2 group_velocity(const KitaevModel& model, int flat) {
    const auto& g = model.grid;
    double dk = two_pi / (g.sites_per_axis * g.lattice_constant);
    auto [m, unused] = g.axis_indices(flat);
    (void)unused;
    double wp = model.omega(g.momentum(g.flat_index(m + 1)).x);
    double wm = model.omega(g.momentum(g.flat_index(m - 1)).x);
    return {(wp - wm) / (2.0 * dk), 0.0};
}

inline Vec2 group_velocity(const BHModel& model, int flat) {
    const auto& g = model.grid;
    double dk = two_pi / (g.sites_per_axis * g.lattice_constant);
    auto [mx, my] = g.axis_indices(flat);
    double wxp = model.omega(g.momentum(g.flat_index(mx + 1, my)));
    double wxm = model.omega(g.momentum(g.flat_index(mx - 1, my)));
    double wyp = model.omega(g.momentum(g.flat_index(mx, my + 1)));
    double wym = model.omega(g.momentum(g.flat_index(mx, my - 1)));
    return {(wxp - wxm) / (2.0 * dk), (wyp - wym) / (2.0 * dk)};
}

} // namespace qprobe
