#include <catch2/catch_amalgamated.hpp>

#include <qprobe/oracle.hpp>
#include <qprobe/rates.hpp>

#include <Eigen/Dense>

#include <cmath>

using namespace qprobe;

TEST_CASE("decoupled probe never transitions") {
    FockSystem sys;
    sys.mode_frequencies = {1.0, 1.7};
    sys.mode_couplings = {0.8, 0.4};
    sys.g = 0.0;
    sys.nu = 1.3;
    for (double t : {0.5, 2.0, 10.0})
        CHECK(exact_transition_probability(sys, 1.0, t) == Catch::Approx(0.0).margin(1e-14));
}

TEST_CASE("resonant single mode performs thermal-weighted Rabi oscillations") {
    FockSystem sys;
    sys.mode_frequencies = {1.0};
    sys.mode_couplings = {1.7};
    sys.statistics = Statistics::fermionic;
    sys.nu = 1.0; // resonant
    sys.g = 0.3;  // strong coupling: the two-state formula is exact, not perturbative
    double beta = 0.7;
    double n = thermal_occupation(1.0, beta, Statistics::fermionic);
    for (double t : {0.3, 1.0, 2.7, 6.1}) {
        double expected = n * std::pow(std::sin(sys.g * 1.7 * t), 2);
        CHECK(exact_transition_probability(sys, beta, t) == Catch::Approx(expected).margin(1e-10));
    }
}

TEST_CASE("transition probability stays inside the unit interval") {
    FockSystem sys;
    sys.mode_frequencies = {0.9, 1.1};
    sys.mode_couplings = {1.0, 0.5};
    sys.g = 0.4;
    sys.nu = 1.0;
    for (double t : {0.5, 3.0, 12.0}) {
        double p = exact_transition_probability(sys, 0.5, t);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0 + 1e-12);
    }
}

TEST_CASE("weak coupling reproduces the golden-rule rate quadratically") {
    FockSystem sys;
    sys.mode_frequencies = {0.8, 1.0, 1.3};
    sys.mode_couplings = {0.5, 1.0, 0.7};
    sys.statistics = Statistics::fermionic;
    sys.nu = 1.0;
    double beta = 1.0;

    SyntheticModel lines_model;
    lines_model.frequencies = sys.mode_frequencies;
    lines_model.amplitudes = sys.mode_couplings;
    std::vector<SpectralLine> lines;
    for (const auto& m : lines_model.modes(beta))
        lines.push_back({m.omega, m.coupling * m.coupling * m.occupation});

    // fixed absolute times: the second-order deviation then scales as g^4,
    // while a window scaled with 1/g would keep it g-independent
    auto max_deviation = [&](double g) {
        sys.g = g;
        std::vector<double> ts;
        for (int i = 1; i <= 25; ++i) ts.push_back(i * 4.0 / 25.0);
        auto exact = exact_transition_probability(sys, beta, ts);
        double dev = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < ts.size(); ++i) {
            double fgr = g * g * ts[i] * ts[i] * rate_sinc_lines(lines, sys.nu, ts[i]);
            dev = std::max(dev, std::abs(exact[i] - fgr));
            scale = std::max(scale, fgr);
        }
        return std::pair{dev, scale};
    };

    auto [d1, s1] = max_deviation(0.01);
    CHECK(d1 < 0.05 * s1);
    auto [d2, s2] = max_deviation(0.02);
    CHECK(d2 < 0.05 * s2);
    double ratio = d2 / d1;
    CHECK(ratio > 8.0);
    CHECK(ratio < 32.0);
}

TEST_CASE("bosonic truncation is converged at depth six") {
    FockSystem sys;
    sys.mode_frequencies = {1.0};
    sys.mode_couplings = {1.0};
    sys.statistics = Statistics::bosonic;
    sys.nu = 1.0;
    sys.g = 0.01;
    double beta = 3.0; // thermal weight above depth six must be negligible
    for (double t : {5.0, 20.0, 50.0}) {
        sys.truncation = 6;
        double p6 = exact_transition_probability(sys, beta, t);
        sys.truncation = 7;
        double p7 = exact_transition_probability(sys, beta, t);
        CHECK(std::abs(p6 - p7) < 1e-8);
    }
}

TEST_CASE("truncated thermal occupations approach the exact factors") {
    FockSystem sys;
    sys.mode_frequencies = {1.3};
    sys.mode_couplings = {1.0};
    sys.statistics = Statistics::fermionic;
    CHECK(fock_thermal_occupation(sys, 0.9, 0) ==
          Catch::Approx(thermal_occupation(1.3, 0.9, Statistics::fermionic)).margin(1e-12));

    sys.statistics = Statistics::bosonic;
    sys.truncation = 6;
    double exact = thermal_occupation(1.3, 2.0, Statistics::bosonic);
    CHECK(std::abs(fock_thermal_occupation(sys, 2.0, 0) - exact) < 1e-4);
    sys.truncation = 40;
    CHECK(std::abs(fock_thermal_occupation(sys, 2.0, 0) - exact) < 1e-12);
    CHECK_THROWS_AS(fock_thermal_occupation(sys, 2.0, 1), contract_error);
}

TEST_CASE("time evolution is unitary") {
    FockSystem sys;
    sys.mode_frequencies = {0.9, 1.4};
    sys.mode_couplings = {0.8, 0.3};
    sys.g = 0.2;
    sys.nu = 1.1;
    Eigen::MatrixXd h = fock_hamiltonian(sys);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    REQUIRE(es.info() == Eigen::Success);
    Eigen::VectorXcd phase(es.eigenvalues().size());
    double t = 3.7;
    for (Eigen::Index i = 0; i < phase.size(); ++i)
        phase(i) = std::exp(cplx(0.0, -es.eigenvalues()(i) * t));
    Eigen::MatrixXcd u = es.eigenvectors().cast<cplx>() * phase.asDiagonal() *
                         es.eigenvectors().transpose().cast<cplx>();
    Rng rng(11);
    Eigen::VectorXcd psi(h.rows());
    for (Eigen::Index i = 0; i < psi.size(); ++i)
        psi(i) = cplx(rng.symmetric_unit(), rng.symmetric_unit());
    psi.normalize();
    CHECK((u * psi).norm() == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("state-space caps and input contracts") {
    FockSystem sys;
    sys.mode_couplings.assign(7, 1.0);
    sys.mode_frequencies.assign(7, 1.0);
    sys.statistics = Statistics::bosonic;
    sys.truncation = 6; // 7^7 states exceeds the cap
    CHECK_THROWS_AS(sys.validate(), capacity_error);

    FockSystem fermi;
    fermi.mode_couplings.assign(17, 1.0);
    fermi.mode_frequencies.assign(17, 1.0);
    fermi.statistics = Statistics::fermionic;
    CHECK_THROWS_AS(fermi.validate(), capacity_error);

    FockSystem bad;
    CHECK_THROWS_AS(bad.validate(), contract_error); // no modes
    bad.mode_frequencies = {1.0, 2.0};
    bad.mode_couplings = {1.0};
    CHECK_THROWS_AS(bad.validate(), contract_error); // size mismatch
    bad.mode_couplings = {1.0, 1.0};
    bad.mode_frequencies = {1.0, -2.0};
    CHECK_THROWS_AS(bad.validate(), contract_error); // negative frequency
}

TEST_CASE("quadratic-form diagonalization limits") {
    // pure hopping: spectrum is |eps(k)|
    KitaevModel hop_model(1.3, 1.0, 1.0, 8);
    Eigen::MatrixXd hop = kitaev_hopping_matrix(hop_model);
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(8, 8);
    auto r1 = bdg_spectrum(hop, zero);
    std::vector<double> expect1;
    for (int i = 0; i < 8; ++i) expect1.push_back(std::abs(hop_model.eps(hop_model.grid.momentum(i).x)));
    std::sort(expect1.begin(), expect1.end());
    for (int i = 0; i < 8; ++i) CHECK(r1.energies(i) == Catch::Approx(expect1[static_cast<std::size_t>(i)]).margin(1e-10));

    // pure pairing: spectrum is 2 Delta |sin k|
    KitaevModel pair_model(1.0, 0.7, 1.0, 8);
    auto r2 = bdg_spectrum(zero, kitaev_pairing_matrix(pair_model));
    std::vector<double> expect2;
    for (int i = 0; i < 8; ++i)
        expect2.push_back(2.0 * 0.7 * std::abs(std::sin(pair_model.grid.momentum(i).x)));
    std::sort(expect2.begin(), expect2.end());
    for (int i = 0; i < 8; ++i) CHECK(r2.energies(i) == Catch::Approx(expect2[static_cast<std::size_t>(i)]).margin(1e-10));

    // steep power law: effectively nearest-neighbour, so the spectrum is
    // hypot(2 J1 cos k, 2 Delta sin k) with J1 the model's own r=1 coupling
    // (the distance normalization rescales it away from the bare J)
    KitaevModel nn(1.0, 0.5, 50.0, 8);
    auto r3 = bdg_spectrum(nn);
    double j1 = nn.hopping(1);
    std::vector<double> expect3;
    for (int i = 0; i < 8; ++i) {
        double k = nn.grid.momentum(i).x;
        expect3.push_back(std::hypot(2.0 * j1 * std::cos(k), 2.0 * 0.5 * std::sin(k)));
    }
    std::sort(expect3.begin(), expect3.end());
    for (int i = 0; i < 8; ++i) CHECK(r3.energies(i) == Catch::Approx(expect3[static_cast<std::size_t>(i)]).margin(1e-9));

    // contract checks
    Eigen::MatrixXd skew = Eigen::MatrixXd::Zero(8, 8);
    skew(0, 1) = 1.0;
    CHECK_THROWS_AS(bdg_spectrum(skew, zero), contract_error);   // hopping not symmetric
    CHECK_THROWS_AS(bdg_spectrum(zero, hop), contract_error);    // pairing not antisymmetric
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(65, 65);
    CHECK_THROWS_AS(bdg_spectrum(big, big), capacity_error);
}

TEST_CASE("filled and half-filled bands anchor the correlator") {
    // dispersionless filled band: <c_l^dag c_j> = delta_lj at zero temperature
    int n = 6;
    Eigen::MatrixXd h = -1.5 * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(n, n);
    double inf = std::numeric_limits<double>::infinity();
    CHECK(std::abs(bdg_thermal_correlator(h, zero, 2, 2, 0.0, inf) - cplx(1.0, 0.0)) < 1e-12);
    CHECK(std::abs(bdg_thermal_correlator(h, zero, 2, 4, 0.0, inf)) < 1e-12);

    // infinite temperature: every site half filled
    KitaevModel m(1.0, 0.6, 1.0, 8);
    CHECK(std::abs(bdg_thermal_correlator(m, 3, 3, 0.0, 1e-12) - cplx(0.5, 0.0)) < 1e-9);
}

TEST_CASE("independent correlator routes agree") {
    KitaevModel m(1.0, 0.5, 1.0, 8);
    auto bdg = bdg_spectrum(m);
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        int l = static_cast<int>(rng.uniform(0.0, 8.0)) % 8;
        int j = static_cast<int>(rng.uniform(0.0, 8.0)) % 8;
        double tau = rng.uniform(0.0, 5.0);
        double beta = rng.uniform(0.2, 2.0);
        cplx a = bdg_thermal_correlator(bdg, l, j, tau, beta);
        cplx b = exact_thermal_correlator(m, l, j, tau, beta);
        CHECK(std::abs(a - b) < 1e-9);
    }
    CHECK_THROWS_AS(exact_thermal_correlator(KitaevModel(1.0, 0.5, 1.0, 11), 0, 1, 0.0, 1.0),
                    capacity_error);
    CHECK_THROWS_AS(exact_thermal_correlator(m, 0, 9, 0.0, 1.0), contract_error);
}
