#pragma once
// Brillouin-zone grids: momenta in the symmetric zone, point-group orbits,
// degeneracies, and snapping of continuous momenta back to grid points.
#include <array>
#include <cmath>
#include <cstdlib>
#include <vector>

#include "core.hpp"

namespace qprobe {

struct Vec2 {
    double x = 0.0, y = 0.0;
};

struct BrillouinGrid {
    int dimension = 1;
    int sites_per_axis = 0;
    double lattice_constant = 1.0;

    BrillouinGrid(int dim, int ns, double a = 1.0)
        : dimension(dim), sites_per_axis(ns), lattice_constant(a) {
        if (dim != 1 && dim != 2) throw contract_error("BrillouinGrid: dimension must be 1 or 2");
        if (ns < 3) throw contract_error("BrillouinGrid: need at least 3 sites per axis");
        if (a <= 0.0) throw contract_error("BrillouinGrid: lattice constant must be positive");
    }

    int mode_count() const {
        return dimension == 1 ? sites_per_axis : sites_per_axis * sites_per_axis;
    }

    // k component for axis index m in {0..N-1}, mapped into (-pi/a, pi/a].
    double component(int m) const {
        int n = sites_per_axis;
        double k = two_pi * m / (n * lattice_constant);
        if (k > pi / lattice_constant + 1e-15) k -= two_pi / lattice_constant;
        return k;
    }

    std::array<int, 2> axis_indices(int flat) const {
        if (dimension == 1) return {flat, 0};
        return {flat / sites_per_axis, flat % sites_per_axis};
    }

    int flat_index(int mx, int my = 0) const {
        int n = sites_per_axis;
        mx = ((mx % n) + n) % n;
        my = ((my % n) + n) % n;
        return dimension == 1 ? mx : mx * n + my;
    }

    Vec2 momentum(int flat) const {
        auto [mx, my] = axis_indices(flat);
        Vec2 k;
        k.x = component(mx);
        if (dimension == 2) k.y = component(my);
        return k;
    }

    std::vector<Vec2> momenta() const {
        std::vector<Vec2> out;
        out.reserve(static_cast<std::size_t>(mode_count()));
        for (int i = 0; i < mode_count(); ++i) out.push_back(momentum(i));
        return out;
    }

    // fold an axis index onto {0..floor(N/2)} (the |k| value it represents)
    int fold(int m) const {
        int n = sites_per_axis;
        m = ((m % n) + n) % n;
        return std::min(m, n - m);
    }

    // Orbit size under the point group: {k -> -k} in 1D, {+-kx, +-ky, swap} in 2D.
    int degeneracy(int flat) const {
        auto [mx, my] = axis_indices(flat);
        int n = sites_per_axis;
        auto axis_mult = [&](int m) { int f = fold(m); return (f == 0 || 2 * f == n) ? 1 : 2; };
        if (dimension == 1) return axis_mult(mx);
        int d = axis_mult(mx) * axis_mult(my);
        if (fold(mx) != fold(my)) d *= 2;
        return d;
    }

    std::vector<int> orbit(int flat) const {
        auto [mx, my] = axis_indices(flat);
        std::vector<int> out;
        auto push_unique = [&](int idx) {
            for (int v : out)
                if (v == idx) return;
            out.push_back(idx);
        };
        if (dimension == 1) {
            push_unique(flat_index(mx));
            push_unique(flat_index(-mx));
            return out;
        }
        for (int sx : {1, -1})
            for (int sy : {1, -1}) {
                push_unique(flat_index(sx * mx, sy * my));
                push_unique(flat_index(sx * my, sy * mx));
            }
        return out;
    }

    // Canonical orbit representatives: folded axis index (1D) or the sorted
    // folded pair (2D, lo <= hi). Ordered lexicographically.
    std::vector<int> orbit_representatives() const {
        std::vector<int> reps;
        int half = sites_per_axis / 2;
        if (dimension == 1) {
            for (int f = 0; f <= half; ++f) reps.push_back(flat_index(f));
            return reps;
        }
        for (int fx = 0; fx <= half; ++fx)
            for (int fy = fx; fy <= half; ++fy) reps.push_back(flat_index(fx, fy));
        return reps;
    }

    // Nearest folded axis index to a continuous |k| >= 0.
    int snap_axis(double k_abs) const {
        double step = two_pi / (sites_per_axis * lattice_constant);
        // clamp before rounding so arbitrarily large inputs cannot overflow
        double q = std::clamp(k_abs / step, 0.0, static_cast<double>(sites_per_axis / 2));
        return static_cast<int>(std::lround(q));
    }

    double axis_value(int folded) const { return two_pi * folded / (sites_per_axis * lattice_constant); }
};

} // namespace qprobe
