#pragma once
// Two-probe protocol: thermal two-time correlators in closed form, the
// cross-correlation rate Gamma_bar (direct formula and the assembly from two-
// and one-probe rates), light-cone maps over (separation, time), and arrival-
// time extraction.
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "models.hpp"
#include "rates.hpp"

namespace qprobe {

struct ProbePair {
    int site_a = 0;
    int site_b = 1; // distinct sites; the pair starts in the symmetric Bell state
    double nu = 0.0;
    double g = 1e-3;

    void validate() const {
        if (site_a == site_b) throw contract_error("ProbePair: sites must differ");
        if (!(g > 0.0)) throw contract_error("ProbePair: coupling must be > 0");
    }
};

// --------------------------------------------------------------------------
// Thermal correlators. The mode expansion carries only occupation magnitudes,
// so the result is independent of the Bogoliubov phase convention.

// <c_l^dag(tau) c_j(0)> on the Kitaev ring, d = j - l.
inline cplx kitaev_correlator(const KitaevModel& model, int l, int j, double tau, double beta) {
    int n = model.grid.sites_per_axis;
    int d = j - l;
    cplx acc = 0.0;
    for (const auto& m : model.modes(beta)) {
        double u2 = std::cos(0.5 * m.theta);
        u2 *= u2;
        double v2 = 1.0 - u2;
        cplx phase = std::exp(cplx(0.0, m.k.x * d * model.grid.lattice_constant));
        acc += phase * (u2 * m.occupation * std::exp(cplx(0.0, m.omega * tau)) +
                        v2 * (1.0 - m.occupation) * std::exp(cplx(0.0, -m.omega * tau)));
    }
    return acc / static_cast<double>(n);
}

// Linearized density-density correlator of the superfluid:
// <dn_l(tau) dn_j(0)> with dn = Phi0 (dPhi + dPhi^dag) at Bogoliubov level.
inline cplx bh_density_correlator(const BHModel& model, int dx, int dy, double tau, double beta) {
    double a = model.grid.lattice_constant;
    cplx acc = 0.0;
    for (const auto& m : model.modes(beta)) {
        double c2 = m.coupling * m.coupling;
        cplx phase = std::exp(cplx(0.0, (m.k.x * dx + m.k.y * dy) * a));
        acc += phase * c2 * (m.occupation * std::exp(cplx(0.0, m.omega * tau)) +
                             (1.0 + m.occupation) * std::exp(cplx(0.0, -m.omega * tau)));
    }
    return acc * model.n0 / static_cast<double>(model.grid.mode_count());
}

// --------------------------------------------------------------------------
// Gamma_bar: the Bell-pair rate combination isolating the symmetrized cross
// correlator,
//   Gamma_bar = (g^2/2) int_0^t int_0^t <X_l^dag(t1) X_j(t2) + X_j^dag(t1) X_l(t2)>
//               e^{-i nu (t1-t2)} dt1 dt2,
// which reduces to a sinc^2 mode sum: each e^{+i w tau} (occupation) component
// integrates to t^2 sinc^2((nu-w)t/2), each e^{-i w tau} component to
// t^2 sinc^2((nu+w)t/2), with the momentum phase cos(k . d) surviving.

namespace detail {
// canonical ring separation: translation and reflection reduce d to [0, N/2]
inline int ring_separation(int l, int j, int n) {
    int d = ((j - l) % n + n) % n;
    return std::min(d, n - d);
}

struct CrossTerm {
    double plus_weight;  // occupation component, resonant at nu = +omega
    double minus_weight; // vacuum/emission component, resonant at nu = -omega
    double omega;
};
} // namespace detail

inline double gamma_bar_kitaev(const KitaevModel& model, const ProbePair& pair, double t,
                               double beta) {
    pair.validate();
    if (!(t > 0.0)) throw contract_error("gamma_bar: t must be > 0");
    int n = model.grid.sites_per_axis;
    int d = detail::ring_separation(pair.site_a, pair.site_b, n);
    double acc = 0.0;
    for (const auto& m : model.modes(beta)) {
        double u2 = std::cos(0.5 * m.theta);
        u2 *= u2;
        double v2 = 1.0 - u2;
        double ck = std::cos(m.k.x * d * model.grid.lattice_constant);
        acc += ck * (u2 * m.occupation * sinc2_line(pair.nu - m.omega, t) +
                     v2 * (1.0 - m.occupation) * sinc2_line(pair.nu + m.omega, t));
    }
    return pair.g * pair.g * t * t * acc / static_cast<double>(n);
}

inline double gamma_bar_bh(const BHModel& model, int dx, int dy, double nu, double g, double t,
                           double beta) {
    if (dx == 0 && dy == 0) throw contract_error("gamma_bar: sites must differ");
    if (!(t > 0.0)) throw contract_error("gamma_bar: t must be > 0");
    double a = model.grid.lattice_constant;
    double acc = 0.0;
    for (const auto& m : model.modes(beta)) {
        double c2 = m.coupling * m.coupling;
        double ck = std::cos((m.k.x * dx + m.k.y * dy) * a);
        acc += ck * c2 * (m.occupation * sinc2_line(nu - m.omega, t) +
                          (1.0 + m.occupation) * sinc2_line(nu + m.omega, t));
    }
    return g * g * t * t * model.n0 * acc / static_cast<double>(model.grid.mode_count());
}

// --------------------------------------------------------------------------
// Assembly identity pieces: the Bell two-probe rate (coupling operator is the
// sum of the two site couplings) and the single-probe rates. These follow an
// independent summation path (|1 + e^{ikd}|^2 = 2 + 2cos(kd) versus cos(kd)),
// so Gamma2 - Gamma1_a/2 - Gamma1_b/2 == gamma_bar is a nontrivial check.

inline double kitaev_single_probe_rate(const KitaevModel& model, double nu, double g, double t,
                                       double beta) {
    if (!(t > 0.0)) throw contract_error("single_probe_rate: t must be > 0");
    double acc = 0.0;
    for (const auto& m : model.modes(beta)) {
        double u2 = std::cos(0.5 * m.theta);
        u2 *= u2;
        double v2 = 1.0 - u2;
        acc += u2 * m.occupation * sinc2_line(nu - m.omega, t) +
               v2 * (1.0 - m.occupation) * sinc2_line(nu + m.omega, t);
    }
    return g * g * t * t * acc / static_cast<double>(model.grid.sites_per_axis);
}

inline double kitaev_two_probe_rate(const KitaevModel& model, const ProbePair& pair, double t,
                                    double beta) {
    pair.validate();
    if (!(t > 0.0)) throw contract_error("two_probe_rate: t must be > 0");
    int n = model.grid.sites_per_axis;
    int d = detail::ring_separation(pair.site_a, pair.site_b, n);
    double acc = 0.0;
    for (const auto& m : model.modes(beta)) {
        double u2 = std::cos(0.5 * m.theta);
        u2 *= u2;
        double v2 = 1.0 - u2;
        double pair_sq = 2.0 + 2.0 * std::cos(m.k.x * d * model.grid.lattice_constant);
        acc += pair_sq * (u2 * m.occupation * sinc2_line(pair.nu - m.omega, t) +
                          v2 * (1.0 - m.occupation) * sinc2_line(pair.nu + m.omega, t));
    }
    return 0.5 * pair.g * pair.g * t * t * acc / static_cast<double>(n);
}

inline double gamma_bar_assembled(const KitaevModel& model, const ProbePair& pair, double t,
                                  double beta) {
    double g2 = kitaev_two_probe_rate(model, pair, t, beta);
    double g1 = kitaev_single_probe_rate(model, pair.nu, pair.g, t, beta);
    return g2 - 0.5 * g1 - 0.5 * g1; // identical probes: Gamma1_a == Gamma1_b
}

// Bath cross-correlator for the numerical double-integral cross-check:
// (1/2) <X_l^dag(t1) X_j(t2) + X_j^dag(t1) X_l(t2)> as a function of (t1,t2).
inline std::function<cplx(double, double)> kitaev_cross_correlator(const KitaevModel& model,
                                                                   int site_a, int site_b,
                                                                   double beta) {
    int n = model.grid.sites_per_axis;
    int d = detail::ring_separation(site_a, site_b, n);
    auto modes = model.modes(beta);
    double a = model.grid.lattice_constant;
    return [modes, d, n, a](double t1, double t2) {
        double tau = t1 - t2;
        cplx acc = 0.0;
        for (const auto& m : modes) {
            double u2 = std::cos(0.5 * m.theta);
            u2 *= u2;
            double v2 = 1.0 - u2;
            double ck = std::cos(m.k.x * d * a);
            acc += ck * (u2 * m.occupation * std::exp(cplx(0.0, m.omega * tau)) +
                         v2 * (1.0 - m.occupation) * std::exp(cplx(0.0, -m.omega * tau)));
        }
        return acc / static_cast<double>(n);
    };
}

// --------------------------------------------------------------------------
// Light-cone maps. The stored observable is either the rate Gamma_bar(d, t)
// itself or the propagating part of the correlator, |C(d,t) - C(d,0)|, which
// is what the arrival analysis runs on: the second time-derivative of
// Gamma_bar recovers Re[e^{i nu t} C], so the correlator map is the content of
// the measured rate map with the static background removed.

enum class MapObservable { correlation, rate };
enum class MapNormalization { none, per_time };

struct CorrelationMap {
    std::vector<int> separations;
    std::vector<double> times;
    std::vector<std::vector<double>> values; // [separation][time]
    MapObservable observable = MapObservable::correlation;
    MapNormalization normalization = MapNormalization::none;
};

inline void normalize_per_time(CorrelationMap& map) {
    if (map.values.empty()) return;
    for (std::size_t ti = 0; ti < map.times.size(); ++ti) {
        double m = 0.0;
        for (const auto& row : map.values) m = std::max(m, std::abs(row[ti]));
        if (m > 0.0)
            for (auto& row : map.values) row[ti] /= m;
    }
    map.normalization = MapNormalization::per_time;
}

inline CorrelationMap lightcone_map_kitaev(const KitaevModel& model, const ProbePair& pair_template,
                                           const std::vector<int>& separations,
                                           const std::vector<double>& times, double beta,
                                           MapObservable observable = MapObservable::correlation,
                                           MapNormalization norm = MapNormalization::none) {
    CorrelationMap map;
    map.separations = separations;
    map.times = times;
    map.observable = observable;
    if (separations.empty()) return map;
    map.values.assign(separations.size(), std::vector<double>(times.size(), 0.0));
    for (std::size_t di = 0; di < separations.size(); ++di) {
        int d = separations[di];
        if (observable == MapObservable::rate) {
            ProbePair p = pair_template;
            p.site_a = 0;
            p.site_b = d;
            for (std::size_t ti = 0; ti < times.size(); ++ti)
                map.values[di][ti] = times[ti] > 0.0 ? gamma_bar_kitaev(model, p, times[ti], beta) : 0.0;
        } else {
            cplx c0 = kitaev_correlator(model, 0, d, 0.0, beta);
            for (std::size_t ti = 0; ti < times.size(); ++ti)
                map.values[di][ti] = std::abs(kitaev_correlator(model, 0, d, times[ti], beta) - c0);
        }
    }
    if (norm == MapNormalization::per_time) normalize_per_time(map);
    return map;
}

inline CorrelationMap lightcone_map_bh(const BHModel& model, double nu, double g,
                                       const std::vector<int>& separations,
                                       const std::vector<double>& times, double beta,
                                       MapObservable observable = MapObservable::correlation,
                                       MapNormalization norm = MapNormalization::none) {
    CorrelationMap map;
    map.separations = separations;
    map.times = times;
    map.observable = observable;
    if (separations.empty()) return map;
    map.values.assign(separations.size(), std::vector<double>(times.size(), 0.0));
    for (std::size_t di = 0; di < separations.size(); ++di) {
        int d = separations[di];
        if (observable == MapObservable::rate) {
            for (std::size_t ti = 0; ti < times.size(); ++ti)
                map.values[di][ti] =
                    times[ti] > 0.0 ? gamma_bar_bh(model, d, 0, nu, g, times[ti], beta) : 0.0;
        } else {
            cplx c0 = bh_density_correlator(model, d, 0, 0.0, beta);
            for (std::size_t ti = 0; ti < times.size(); ++ti)
                map.values[di][ti] = std::abs(bh_density_correlator(model, d, 0, times[ti], beta) - c0);
        }
    }
    if (norm == MapNormalization::per_time) normalize_per_time(map);
    return map;
}

// First crossing of the given fraction of the map's global maximum, per
// separation. Separations that never cross return +inf.
inline std::vector<double> arrival_times(const CorrelationMap& map, double fraction = 0.1) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw contract_error("arrival_times: fraction must be in (0,1)");
    double gmax = 0.0;
    for (const auto& row : map.values)
        for (double v : row) gmax = std::max(gmax, std::abs(v));
    std::vector<double> out(map.separations.size(),
                            std::numeric_limits<double>::infinity());
    if (gmax <= 0.0) return out;
    double thr = fraction * gmax;
    for (std::size_t di = 0; di < map.values.size(); ++di) {
        for (std::size_t ti = 0; ti < map.times.size(); ++ti) {
            if (std::abs(map.values[di][ti]) >= thr) {
                out[di] = map.times[ti];
                break;
            }
        }
    }
    return out;
}

} // namespace qprobe
