#pragma once
// Exact small-system references: full Fock-space evolution of probe plus M
// quasiparticle modes, dense real-space Bogoliubov-de Gennes diagonalization
// of the ring, and thermal correlators computed without the mode-sum closed
// forms. Everything here is an oracle for the perturbative modules.
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core.hpp"
#include "models.hpp"

namespace qprobe {

struct FockSystem {
    std::vector<double> mode_frequencies;
    std::vector<double> mode_couplings;
    Statistics statistics = Statistics::fermionic;
    double nu = 1.0; // probe gap
    double g = 1e-3; // overall coupling strength
    int truncation = 6; // max excitations per bosonic mode
    std::size_t dimension_cap = std::size_t(1) << 16;

    int mode_count() const { return static_cast<int>(mode_frequencies.size()); }

    int levels_per_mode() const {
        return statistics == Statistics::fermionic ? 2 : truncation + 1;
    }

    std::size_t bath_dimension() const {
        std::size_t d = 1;
        for (int m = 0; m < mode_count(); ++m) {
            if (d > dimension_cap / static_cast<std::size_t>(levels_per_mode()))
                throw capacity_error("FockSystem: state space exceeds dimension cap");
            d *= static_cast<std::size_t>(levels_per_mode());
        }
        return d;
    }

    std::size_t dimension() const {
        std::size_t db = bath_dimension();
        if (2 * db > dimension_cap)
            throw capacity_error("FockSystem: state space exceeds dimension cap");
        return 2 * db;
    }

    void validate() const {
        if (mode_frequencies.size() != mode_couplings.size())
            throw contract_error("FockSystem: frequency/coupling size mismatch");
        if (mode_frequencies.empty()) throw contract_error("FockSystem: need at least one mode");
        if (statistics == Statistics::bosonic && truncation < 1)
            throw contract_error("FockSystem: bosonic truncation must be >= 1");
        for (double w : mode_frequencies)
            if (!(w > 0.0)) throw contract_error("FockSystem: mode frequencies must be > 0");
        if (!(g >= 0.0)) throw contract_error("FockSystem: coupling must be >= 0");
        dimension();
    }
};

namespace detail {

// occupation of mode m in flat bath index s (mixed-radix digits, mode 0 fastest)
inline int bath_digit(std::size_t s, int mode, int levels) {
    for (int i = 0; i < mode; ++i) s /= static_cast<std::size_t>(levels);
    return static_cast<int>(s % static_cast<std::size_t>(levels));
}

// Apply annihilation operator of `mode` to bath basis state s.
// Returns false if the result vanishes; otherwise sets the target index and
// the matrix element (Jordan-Wigner sign for fermions, sqrt(n) for bosons).
inline bool apply_lowering(const FockSystem& sys, std::size_t s, int mode, std::size_t& out,
                           double& element) {
    int levels = sys.levels_per_mode();
    int n = bath_digit(s, mode, levels);
    if (n == 0) return false;
    std::size_t stride = 1;
    for (int i = 0; i < mode; ++i) stride *= static_cast<std::size_t>(levels);
    out = s - stride;
    if (sys.statistics == Statistics::fermionic) {
        int parity = 0;
        for (int p = 0; p < mode; ++p) parity += bath_digit(s, p, levels);
        element = (parity % 2 == 0) ? 1.0 : -1.0;
    } else {
        element = std::sqrt(static_cast<double>(n));
    }
    return true;
}

// Per-mode thermal weights over the truncated ladder; beta may be +inf.
inline std::vector<double> mode_weights(const FockSystem& sys, int mode, double beta) {
    if (!(beta > 0.0)) throw contract_error("FockSystem: inverse temperature must be > 0");
    int levels = sys.levels_per_mode();
    double w = sys.mode_frequencies[static_cast<std::size_t>(mode)];
    std::vector<double> p(static_cast<std::size_t>(levels), 0.0);
    if (std::isinf(beta)) {
        p[0] = 1.0;
        return p;
    }
    if (sys.statistics == Statistics::fermionic) {
        double n = thermal_occupation(w, beta, Statistics::fermionic);
        p[0] = 1.0 - n;
        p[1] = n;
        return p;
    }
    double x = std::exp(-beta * w);
    double z = 0.0, xp = 1.0;
    for (int n = 0; n < levels; ++n) {
        p[static_cast<std::size_t>(n)] = xp;
        z += xp;
        xp *= x;
    }
    for (auto& v : p) v /= z;
    return p;
}

inline std::vector<double> bath_weights(const FockSystem& sys, double beta) {
    std::size_t db = sys.bath_dimension();
    int levels = sys.levels_per_mode();
    std::vector<std::vector<double>> per_mode;
    per_mode.reserve(static_cast<std::size_t>(sys.mode_count()));
    for (int m = 0; m < sys.mode_count(); ++m) per_mode.push_back(mode_weights(sys, m, beta));
    std::vector<double> p(db, 1.0);
    for (std::size_t s = 0; s < db; ++s)
        for (int m = 0; m < sys.mode_count(); ++m)
            p[s] *= per_mode[static_cast<std::size_t>(m)][static_cast<std::size_t>(
                bath_digit(s, m, levels))];
    return p;
}

} // namespace detail

// Full Hamiltonian in the product basis |probe> x |bath>, probe index slowest
// (rows 0..Db-1 ground, Db..2Db-1 excited):
//   H = nu P_e + sum_m w_m n_m + g sum_m A_m (sigma^+ c_m + c_m^dag sigma^-).
inline Eigen::MatrixXd fock_hamiltonian(const FockSystem& sys) {
    sys.validate();
    std::size_t db = sys.bath_dimension();
    std::size_t d = 2 * db;
    int levels = sys.levels_per_mode();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                              static_cast<Eigen::Index>(d));
    for (std::size_t s = 0; s < db; ++s) {
        double diag = 0.0;
        for (int m = 0; m < sys.mode_count(); ++m)
            diag += sys.mode_frequencies[static_cast<std::size_t>(m)] *
                    detail::bath_digit(s, m, levels);
        auto gi = static_cast<Eigen::Index>(s);
        auto ei = static_cast<Eigen::Index>(db + s);
        h(gi, gi) = diag;
        h(ei, ei) = diag + sys.nu;
        // sigma^+ c_m : |g, s> -> element * |e, s'>
        for (int m = 0; m < sys.mode_count(); ++m) {
            std::size_t target = 0;
            double element = 0.0;
            if (!detail::apply_lowering(sys, s, m, target, element)) continue;
            double amp = sys.g * sys.mode_couplings[static_cast<std::size_t>(m)] * element;
            auto ti = static_cast<Eigen::Index>(db + target);
            h(ti, gi) += amp;
            h(gi, ti) += amp;
        }
    }
    return h;
}

// Exact transition probability Gamma(t) = sum_s p_th(s) || P_e U(t) |g,s> ||^2.
inline std::vector<double> exact_transition_probability(const FockSystem& sys, double beta,
                                                        const std::vector<double>& t_grid) {
    Eigen::MatrixXd h = fock_hamiltonian(sys);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success)
        throw integration_error("exact_transition_probability: eigendecomposition failed");
    const Eigen::VectorXd& energy = es.eigenvalues();
    const Eigen::MatrixXd& vec = es.eigenvectors();
    auto db = static_cast<Eigen::Index>(sys.bath_dimension());
    Eigen::MatrixXd vg = vec.topRows(db);    // <g,s | eigenvector i>
    Eigen::MatrixXd ve = vec.bottomRows(db); // <e,s'| eigenvector i>
    std::vector<double> weights = detail::bath_weights(sys, beta);

    std::vector<double> out;
    out.reserve(t_grid.size());
    Eigen::VectorXcd phase(energy.size());
    for (double t : t_grid) {
        for (Eigen::Index i = 0; i < energy.size(); ++i)
            phase(i) = std::exp(cplx(0.0, -energy(i) * t));
        Eigen::MatrixXcd amp = ve * phase.asDiagonal() * vg.transpose();
        double gamma = 0.0;
        for (Eigen::Index s = 0; s < db; ++s)
            gamma += weights[static_cast<std::size_t>(s)] * amp.col(s).squaredNorm();
        out.push_back(gamma);
    }
    return out;
}

inline double exact_transition_probability(const FockSystem& sys, double beta, double t) {
    return exact_transition_probability(sys, beta, std::vector<double>{t}).front();
}

// Thermal mean occupation of one mode under the truncated product state.
inline double fock_thermal_occupation(const FockSystem& sys, double beta, int mode) {
    sys.validate();
    if (mode < 0 || mode >= sys.mode_count())
        throw contract_error("fock_thermal_occupation: mode out of range");
    auto p = detail::mode_weights(sys, mode, beta);
    double n = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) n += static_cast<double>(i) * p[i];
    return n;
}

// --------------------------------------------------------------------------
// Real-space quadratic description of the ring: hopping matrix (long-range
// bonds; the diameter bond on even rings enters once, i.e. at half weight)
// and the antisymmetric nearest-neighbour pairing matrix.

inline Eigen::MatrixXd kitaev_hopping_matrix(const KitaevModel& model) {
    int n = model.grid.sites_per_axis;
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    int rmax = (n - 1) / 2;
    for (int l = 0; l < n; ++l) {
        for (int r = 1; r <= rmax; ++r) {
            int j = (l + r) % n;
            double jr = model.hopping(r);
            h(l, j) += jr;
            h(j, l) += jr;
        }
    }
    if (n % 2 == 0) {
        double jd = model.hopping(n / 2);
        for (int l = 0; l < n / 2; ++l) {
            int j = l + n / 2;
            h(l, j) += jd;
            h(j, l) += jd;
        }
    }
    return h;
}

inline Eigen::MatrixXd kitaev_pairing_matrix(const KitaevModel& model) {
    int n = model.grid.sites_per_axis;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    for (int l = 0; l < n; ++l) {
        int j = (l + 1) % n;
        // pairing term Delta (c_l c_{l+1} + h.c.) => d_{l+1,l} = +Delta
        d(j, l) += model.Delta;
        d(l, j) -= model.Delta;
    }
    return d;
}

struct BdgResult {
    Eigen::VectorXd energies; // non-negative branch, ascending
    Eigen::MatrixXd u, v;     // N x N blocks of the positive-energy eigenvectors
    Eigen::MatrixXd transform; // full 2N x 2N orthogonal eigenbasis
};

// Diagonalize H_BdG = [[h, d], [-d, -h]] for real symmetric h, antisymmetric d.
inline BdgResult bdg_spectrum(const Eigen::MatrixXd& hopping, const Eigen::MatrixXd& pairing) {
    auto n = hopping.rows();
    if (n != hopping.cols() || n != pairing.rows() || n != pairing.cols())
        throw contract_error("bdg_spectrum: matrix shape mismatch");
    if (n > 64) throw capacity_error("bdg_spectrum: dense route limited to 64 sites");
    if ((hopping - hopping.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw contract_error("bdg_spectrum: hopping matrix must be symmetric");
    if ((pairing + pairing.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw contract_error("bdg_spectrum: pairing matrix must be antisymmetric");

    Eigen::MatrixXd hb(2 * n, 2 * n);
    hb.topLeftCorner(n, n) = hopping;
    hb.topRightCorner(n, n) = pairing;
    hb.bottomLeftCorner(n, n) = -pairing;
    hb.bottomRightCorner(n, n) = -hopping;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(hb);
    if (es.info() != Eigen::Success) throw integration_error("bdg_spectrum: diagonalization failed");

    BdgResult out;
    out.transform = es.eigenvectors();
    out.energies.resize(n);
    out.u.resize(n, n);
    out.v.resize(n, n);
    // eigenvalues ascending: the upper half is the non-negative branch
    for (Eigen::Index a = 0; a < n; ++a) {
        Eigen::Index col = n + a;
        out.energies(a) = es.eigenvalues()(col);
        out.u.col(a) = es.eigenvectors().col(col).head(n);
        out.v.col(a) = es.eigenvectors().col(col).tail(n);
    }
    return out;
}

inline BdgResult bdg_spectrum(const KitaevModel& model) {
    return bdg_spectrum(kitaev_hopping_matrix(model), kitaev_pairing_matrix(model));
}

// --------------------------------------------------------------------------
// Exact thermal correlator <c_l^dag(tau) c_j(0)>.

// Quadratic route via the numerical Bogoliubov transformation (N_s <= 64):
//   c_l = sum_a u_{la} gamma_a + v_{la} gamma_a^dag  (real coefficients)
//   C_lj = sum_a [ u_{la} u_{ja} n_a e^{+iE tau} + v_{la} v_{ja} (1-n_a) e^{-iE tau} ].
inline cplx bdg_thermal_correlator(const BdgResult& bdg, int l, int j, double tau, double beta) {
    auto n = bdg.u.rows();
    if (l < 0 || l >= n || j < 0 || j >= n)
        throw contract_error("bdg_thermal_correlator: site out of range");
    cplx acc = 0.0;
    for (Eigen::Index a = 0; a < bdg.energies.size(); ++a) {
        double e = bdg.energies(a);
        double occ = (e > 0.0) ? thermal_occupation(e, beta, Statistics::fermionic) : 0.5;
        acc += bdg.u(l, a) * bdg.u(j, a) * occ * std::exp(cplx(0.0, e * tau));
        acc += bdg.v(l, a) * bdg.v(j, a) * (1.0 - occ) * std::exp(cplx(0.0, -e * tau));
    }
    return acc;
}

inline cplx bdg_thermal_correlator(const Eigen::MatrixXd& hopping, const Eigen::MatrixXd& pairing,
                                   int l, int j, double tau, double beta) {
    return bdg_thermal_correlator(bdg_spectrum(hopping, pairing), l, j, tau, beta);
}

inline cplx bdg_thermal_correlator(const KitaevModel& model, int l, int j, double tau,
                                   double beta) {
    return bdg_thermal_correlator(bdg_spectrum(model), l, j, tau, beta);
}

// Fock-space route (N_s <= 10): dense 2^N Hamiltonian including pairing,
// exact thermal density matrix, Heisenberg evolution in the eigenbasis.
inline cplx exact_thermal_correlator(const KitaevModel& model, int l, int j, double tau,
                                     double beta) {
    int n = model.grid.sites_per_axis;
    if (n > 10) throw capacity_error("exact_thermal_correlator: Fock route limited to 10 sites");
    if (l < 0 || l >= n || j < 0 || j >= n)
        throw contract_error("exact_thermal_correlator: site out of range");
    if (!(beta > 0.0)) throw contract_error("exact_thermal_correlator: beta must be > 0");
    std::size_t dim = std::size_t(1) << n;
    Eigen::MatrixXd hop = kitaev_hopping_matrix(model);

    // dense annihilation operators with Jordan-Wigner signs
    auto lowering = [&](int site) {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                                  static_cast<Eigen::Index>(dim));
        for (std::size_t s = 0; s < dim; ++s) {
            if (!(s & (std::size_t(1) << site))) continue;
            std::size_t t = s ^ (std::size_t(1) << site);
            int parity = 0;
            for (int p = 0; p < site; ++p)
                if (s & (std::size_t(1) << p)) ++parity;
            c(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) =
                (parity % 2 == 0) ? 1.0 : -1.0;
        }
        return c;
    };

    std::vector<Eigen::MatrixXd> ops;
    ops.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) ops.push_back(lowering(s));

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim),
                                              static_cast<Eigen::Index>(dim));
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
            if (hop(a, b) == 0.0) continue;
            Eigen::MatrixXd term = ops[static_cast<std::size_t>(a)].transpose() *
                                   ops[static_cast<std::size_t>(b)];
            h += hop(a, b) * (term + term.transpose());
        }
    for (int a = 0; a < n; ++a) {
        int b = (a + 1) % n;
        // Delta (c_a c_b + c_b^dag c_a^dag)
        Eigen::MatrixXd term = ops[static_cast<std::size_t>(a)] * ops[static_cast<std::size_t>(b)];
        h += model.Delta * (term + term.transpose());
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success)
        throw integration_error("exact_thermal_correlator: eigendecomposition failed");
    const Eigen::VectorXd& energy = es.eigenvalues();
    const Eigen::MatrixXd& vec = es.eigenvectors();

    Eigen::VectorXd weights(energy.size());
    if (std::isinf(beta)) {
        weights.setZero();
        weights(0) = 1.0;
    } else {
        double e0 = energy.minCoeff();
        double z = 0.0;
        for (Eigen::Index i = 0; i < energy.size(); ++i) {
            weights(i) = std::exp(-beta * (energy(i) - e0));
            z += weights(i);
        }
        weights /= z;
    }

    Eigen::MatrixXd cl_dag = vec.transpose() * ops[static_cast<std::size_t>(l)].transpose() * vec;
    Eigen::MatrixXd cj = vec.transpose() * ops[static_cast<std::size_t>(j)] * vec;
    cplx acc = 0.0;
    for (Eigen::Index a = 0; a < energy.size(); ++a) {
        if (weights(a) == 0.0) continue;
        for (Eigen::Index b = 0; b < energy.size(); ++b) {
            double el = cl_dag(a, b) * cj(b, a);
            if (el == 0.0) continue;
            acc += weights(a) * el * std::exp(cplx(0.0, (energy(a) - energy(b)) * tau));
        }
    }
    return acc;
}

} // namespace qprobe
