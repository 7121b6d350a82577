#include <catch2/catch_amalgamated.hpp>

#include <qprobe/lindblad.hpp>

#include <algorithm>
#include <cmath>

using namespace qprobe;

TEST_CASE("relaxation rates in the statistics limits") {
    LindbladParams empty{0.7, 0.0, Statistics::bosonic};
    CHECK(decay_rate(empty) == Catch::Approx(0.7).epsilon(1e-15)); // spontaneous only

    LindbladParams boson{0.7, 1.0, Statistics::bosonic};
    CHECK(decay_rate(boson) == Catch::Approx(3.0 * 0.7).epsilon(1e-15));
    CHECK(absorption_rate(boson) == Catch::Approx(0.7).epsilon(1e-15));
    CHECK(deexcitation_rate(boson) == Catch::Approx(1.4).epsilon(1e-15));

    for (double n : {0.0, 0.3, 0.9}) {
        LindbladParams fermi{0.7, n, Statistics::fermionic};
        CHECK(decay_rate(fermi) == Catch::Approx(0.7).epsilon(1e-14)); // Pauli blocking cancels n
    }
}

TEST_CASE("stationary populations") {
    CHECK(stationary_population({1.0, 1.0, Statistics::bosonic}) == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(stationary_population({1.0, 0.4, Statistics::fermionic}) == Catch::Approx(0.4).epsilon(1e-15));
    for (double n : {0.01, 0.5, 3.0, 100.0})
        CHECK(stationary_population({1.0, n, Statistics::bosonic}) < 0.5);
}

TEST_CASE("excited population rises monotonically to the stationary value") {
    LindbladParams p{0.37, 0.8, Statistics::bosonic};
    CHECK(excited_population(p, 0.0) == 0.0);
    double gamma = decay_rate(p);
    double prev = -1.0;
    for (int i = 1; i <= 40; ++i) {
        double v = excited_population(p, 0.2 * i / gamma);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(excited_population(p, 50.0 / gamma) ==
          Catch::Approx(stationary_population(p)).epsilon(1e-12));
    CHECK_THROWS_AS(excited_population(p, -1.0), contract_error);
}

TEST_CASE("numerical master equation matches the closed form") {
    std::vector<std::pair<double, Statistics>> cases{
        {0.1, Statistics::bosonic},  {1.0, Statistics::bosonic},  {10.0, Statistics::bosonic},
        {0.1, Statistics::fermionic}, {0.5, Statistics::fermionic}, {0.9, Statistics::fermionic}};
    for (auto [n, stat] : cases) {
        LindbladParams p{0.37, n, stat};
        double gamma = decay_rate(p);
        std::vector<double> grid;
        for (int i = 0; i <= 50; ++i) grid.push_back(5.0 * i / (50.0 * gamma));
        auto states = evolve_numeric_states(p, grid);
        REQUIRE(states.size() == grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(std::abs(states[i][0] - excited_population(p, grid[i])) < 1e-8);
            CHECK(states[i][0] + states[i][1] == Catch::Approx(1.0).margin(1e-10)); // trace
            CHECK(states[i][2] == 0.0); // coherence never sourced
            CHECK(states[i][3] == 0.0);
        }
    }
}

TEST_CASE("zero coupling freezes the state") {
    LindbladParams p{0.0, 1.0, Statistics::bosonic};
    auto pops = evolve_numeric(p, {0.0, 1.0, 10.0, 100.0});
    for (double v : pops) CHECK(v == 0.0);
    CHECK(excited_population(p, 42.0) == 0.0);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(LindbladParams({-1.0, 0.5, Statistics::bosonic}).validate(), contract_error);
    CHECK_THROWS_AS(LindbladParams({1.0, -0.5, Statistics::bosonic}).validate(), contract_error);
    CHECK_THROWS_AS(LindbladParams({1.0, 1.5, Statistics::fermionic}).validate(), contract_error);
    CHECK_NOTHROW(LindbladParams({1.0, 1.5, Statistics::bosonic}).validate());

    LindbladParams p{0.3, 0.5, Statistics::bosonic};
    CHECK_THROWS_AS(evolve_numeric(p, {1.0, 0.5}), contract_error);
    CHECK_THROWS_AS(evolve_numeric(p, {-1.0, 0.5}), contract_error);
    CHECK(evolve_numeric(p, {}).empty());
}

TEST_CASE("coupling extraction recovers the weight from clean data") {
    LindbladParams truth{0.37, 0.8, Statistics::bosonic};
    double gamma = decay_rate(truth);
    std::vector<double> times, pops;
    for (int i = 0; i <= 50; ++i) {
        double t = 5.0 * i / (50.0 * gamma);
        times.push_back(t);
        pops.push_back(excited_population(truth, t));
    }
    CouplingFit fit = extract_coupling(times, pops, truth.occupation, truth.statistics);
    CHECK(fit.weight == Catch::Approx(truth.weight).epsilon(1e-6));
    CHECK(fit.decay_resolved);
    CHECK(fit.residual < 1e-9);
}

TEST_CASE("unresolved decay windows are flagged") {
    LindbladParams truth{0.37, 0.8, Statistics::bosonic};
    double gamma = decay_rate(truth);

    // window far too short: the exponential looks linear
    std::vector<double> times, pops;
    for (int i = 0; i <= 20; ++i) {
        double t = 0.01 * i / (20.0 * gamma);
        times.push_back(t);
        pops.push_back(excited_population(truth, t));
    }
    CHECK_FALSE(extract_coupling(times, pops, truth.occupation, truth.statistics).decay_resolved);

    // window entirely after saturation
    times.clear();
    pops.clear();
    for (int i = 0; i <= 20; ++i) {
        double t = (20.0 + 10.0 * i / 20.0) / gamma;
        times.push_back(t);
        pops.push_back(excited_population(truth, t));
    }
    CHECK_FALSE(extract_coupling(times, pops, truth.occupation, truth.statistics).decay_resolved);
}

TEST_CASE("extraction is robust to one percent amplitude noise") {
    LindbladParams truth{0.37, 0.8, Statistics::bosonic};
    double gamma = decay_rate(truth);
    std::vector<double> times;
    for (int i = 0; i <= 50; ++i) times.push_back(5.0 * i / (50.0 * gamma));
    std::vector<double> clean;
    for (double t : times) clean.push_back(excited_population(truth, t));

    std::vector<double> errors;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        Rng rng(seed);
        std::vector<double> noisy = clean;
        for (auto& v : noisy) v *= 1.0 + 0.01 * rng.symmetric_unit();
        CouplingFit fit = extract_coupling(times, noisy, truth.occupation, truth.statistics);
        errors.push_back(std::abs(fit.weight - truth.weight) / truth.weight);
    }
    std::sort(errors.begin(), errors.end());
    CHECK(errors[errors.size() / 2] < 0.05);
}

TEST_CASE("extraction input contracts") {
    std::vector<double> t10(10), p10(10, 0.0);
    for (int i = 0; i < 10; ++i) t10[static_cast<std::size_t>(i)] = i;
    CHECK_THROWS_AS(extract_coupling({0.0, 1.0}, {0.0, 0.1}, 0.5, Statistics::bosonic),
                    contract_error); // too few samples
    std::vector<double> bad_t = t10;
    bad_t[5] = bad_t[4];
    CHECK_THROWS_AS(extract_coupling(bad_t, p10, 0.5, Statistics::bosonic), contract_error);
    std::vector<double> short_p(9, 0.0);
    CHECK_THROWS_AS(extract_coupling(t10, short_p, 0.5, Statistics::bosonic), contract_error);
    // zero stationary population cannot constrain the weight
    CHECK_THROWS_AS(extract_coupling(t10, p10, 0.0, Statistics::fermionic), estimation_error);
}
