#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "zoo/boxes.hpp"
#include "zoo/functional.hpp"

using namespace zoo;

TEST_CASE("chsh values") {
    BellFunctional chsh = chsh_functional();
    REQUIRE(bell_value(chsh, pr_box()) == Catch::Approx(4.0).margin(1e-12));
    REQUIRE(bell_value(chsh, uniform_box(chsh.scenario)) == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(bell_value(chsh, make_isotropic(0.8)) == Catch::Approx(3.2).margin(1e-12));
    Box det = deterministic_box(chsh.scenario, {{0, 0}, {0, 0}});
    REQUIRE(bell_value(chsh, det) == Catch::Approx(2.0).margin(1e-12));
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const double lam = U(rng);
        REQUIRE(bell_value(chsh, make_isotropic(lam)) == Catch::Approx(4.0 * lam).margin(1e-12));
    }
}

TEST_CASE("bell_value is linear") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    Scenario sc = Scenario::uniform(2, 2, 2);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> c(sc.table_size());
        for (double& v : c) v = 2.0 * U(rng) - 1.0;
        BellFunctional f(sc, c);
        Box b1 = make_isotropic(U(rng)), b2 = make_isotropic(U(rng));
        const double lam = U(rng);
        std::vector<double> mix(sc.table_size());
        for (std::size_t i = 0; i < mix.size(); ++i)
            mix[i] = lam * b1.table()[i] + (1 - lam) * b2.table()[i];
        Box bm(sc, mix);
        REQUIRE(bell_value(f, bm) ==
                Catch::Approx(lam * bell_value(f, b1) + (1 - lam) * bell_value(f, b2)).margin(1e-12));
    }
}

TEST_CASE("i3322 anchor evaluations") {
    BellFunctional f = i3322_functional();
    Box w = ghost_witness_box();
    REQUIRE(bell_value(f, w) == Catch::Approx(1.0 / 3.0).margin(1e-14));
    // exact rational check: every coefficient is an integer, the witness table
    // lives in twelfths, so 12 * value must be exactly 4
    auto num = ghost_witness_numerators_base12();
    long acc = 0;
    for (std::size_t i = 0; i < num.size(); ++i) {
        const double c = f.coeffs[i];
        REQUIRE(c == std::round(c));
        acc += static_cast<long>(std::llround(c)) * num[i];
    }
    REQUIRE(acc == 4);
    // local maximum over all 64 deterministic boxes is 0
    double best = -1e9;
    for (int fa = 0; fa < 8; ++fa)
        for (int fb = 0; fb < 8; ++fb) {
            std::vector<int> ra = {fa & 1, (fa >> 1) & 1, (fa >> 2) & 1};
            std::vector<int> rb = {fb & 1, (fb >> 1) & 1, (fb >> 2) & 1};
            best = std::max(best, bell_value(f, deterministic_box(f.scenario, {ra, rb})));
        }
    REQUIRE(best == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("s409 symmetrized functional") {
    BellFunctional f = s409_functional();
    // frozen contraction on the uniform box
    REQUIRE(bell_value(f, uniform_box(f.scenario)) == Catch::Approx(-3.375).margin(1e-12));
    // classical bound 0, attained
    double best = -1e9;
    for (int fa = 0; fa < 4; ++fa)
        for (int fb = 0; fb < 4; ++fb)
            for (int fc = 0; fc < 4; ++fc) {
                std::vector<int> ra = {fa & 1, (fa >> 1) & 1};
                std::vector<int> rb = {fb & 1, (fb >> 1) & 1};
                std::vector<int> rc = {fc & 1, (fc >> 1) & 1};
                best = std::max(best, bell_value(f, deterministic_box(f.scenario, {ra, rb, rc})));
            }
    REQUIRE(best == Catch::Approx(0.0).margin(1e-12));
    // invariant under party permutations by construction
    Box probe = make_pr3();
    const double v = bell_value(f, probe);
    REQUIRE(bell_value(f, swap_parties(probe, {1, 2, 0})) == Catch::Approx(v).margin(1e-12));
    REQUIRE(bell_value(f, swap_parties(probe, {2, 1, 0})) == Catch::Approx(v).margin(1e-12));
}

TEST_CASE("gyni local bound") {
    BellFunctional f = gyni_functional();
    double best = -1e9;
    for (int fa = 0; fa < 4; ++fa)
        for (int fb = 0; fb < 4; ++fb)
            for (int fc = 0; fc < 4; ++fc) {
                std::vector<int> ra = {fa & 1, (fa >> 1) & 1};
                std::vector<int> rb = {fb & 1, (fb >> 1) & 1};
                std::vector<int> rc = {fc & 1, (fc >> 1) & 1};
                best = std::max(best, bell_value(f, deterministic_box(f.scenario, {ra, rb, rc})));
            }
    REQUIRE(best == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("chsh symmetric under party swap") {
    BellFunctional chsh = chsh_functional();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
        Box b = make_isotropic(U(rng));
        REQUIRE(bell_value(chsh, swap_parties(b, {1, 0})) ==
                Catch::Approx(bell_value(chsh, b)).margin(1e-12));
    }
}

TEST_CASE("direct sum functional blocks") {
    BellFunctional chsh = chsh_functional();
    BellFunctional z = BellFunctional::zeros(chsh.scenario);
    BellFunctional f = direct_sum_functional(chsh, z);
    REQUIRE(f.scenario.inputs(0) == 4);
    REQUIRE(f.scenario.inputs(1) == 4);
    // off-diagonal input blocks vanish
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y) {
            if ((x < 2) == (y < 2)) continue;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) REQUIRE(f.coeff({a, b}, {x, y}) == 0.0);
        }
    // block 1 reproduces chsh
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    REQUIRE(f.coeff({a, b}, {x, y}) == chsh.coeff({a, b}, {x, y}));
}

TEST_CASE("affine combination and lifting") {
    BellFunctional chsh = chsh_functional();
    BellFunctional g = affine_combination(chsh, 0.5, -1.0); // (chsh - 2)/2 at value level
    Box b = make_isotropic(0.9);
    REQUIRE(bell_value(g, b) == Catch::Approx(0.5 * bell_value(chsh, b) - 1.0).margin(1e-12));
    Scenario s3322 = Scenario::uniform(2, 3, 2);
    BellFunctional lifted = lift_inputs(chsh, s3322);
    Box w = ghost_witness_box();
    // lifted functional only reads the first two inputs
    double manual = 0.0;
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    manual += chsh.coeff({a, b}, {x, y}) * w.at({a, b}, {x, y});
    REQUIRE(bell_value(lifted, w) == Catch::Approx(manual).margin(1e-12));
}
