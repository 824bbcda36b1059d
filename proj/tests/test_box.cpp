#include <catch2/catch_amalgamated.hpp>

#include "zoo/boxes.hpp"

using namespace zoo;

TEST_CASE("scenario packing roundtrip") {
    Scenario sc({3, 2, 4}, {2, 3, 2});
    REQUIRE(sc.parties() == 3);
    REQUIRE(sc.joint_inputs() == 24);
    REQUIRE(sc.joint_outcomes() == 12);
    for (std::size_t i = 0; i < sc.joint_inputs(); ++i)
        REQUIRE(sc.pack_inputs(sc.unpack_inputs(i)) == i);
    for (std::size_t o = 0; o < sc.joint_outcomes(); ++o)
        REQUIRE(sc.pack_outcomes(sc.unpack_outcomes(o)) == o);
    REQUIRE_THROWS_AS(Scenario({0}, {2}), validation_error);
    REQUIRE_THROWS_AS(Scenario({2}, {1}), validation_error);
}

TEST_CASE("isotropic box") {
    Box pr = make_isotropic(1.0);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const double expect = ((a ^ b) == (x & y)) ? 0.5 : 0.0;
                    REQUIRE(pr.at({a, b}, {x, y}) == Catch::Approx(expect).margin(1e-15));
                }
    Box u = make_isotropic(0.0);
    for (double v : u.table()) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(check_no_signalling(make_isotropic(0.73)).max_residual <= 1e-15);
    REQUIRE_THROWS_AS(make_isotropic(1.2), validation_error);
}

TEST_CASE("pr3 box") {
    Box b = make_pr3();
    REQUIRE(b.at({0, 0, 0}, {1, 1, 1}) == 0.0);
    REQUIRE(b.at({0, 0, 0}, {0, 1, 1}) == Catch::Approx(0.25).margin(1e-15));
    // all bipartite marginals uniform
    Box ab = marginal(b, {0, 1});
    for (double v : ab.table()) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
    Box bc = marginal(b, {1, 2});
    for (double v : bc.table()) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(check_no_signalling(b).max_residual <= 1e-15);
}

TEST_CASE("postselect pr3 on charlie") {
    Box pr3 = make_pr3();
    Box onZ1 = postselect(pr3, 2, 1, 0);
    Box pr = pr_box();
    REQUIRE(onZ1.scenario() == pr.scenario());
    for (std::size_t i = 0; i < pr.table().size(); ++i)
        REQUIRE(onZ1.table()[i] == Catch::Approx(pr.table()[i]).margin(1e-12));
    // z=0 gives the correlated local box
    Box onZ0 = postselect(pr3, 2, 0, 0);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const double expect = (a == b) ? 0.5 : 0.0;
                    REQUIRE(onZ0.at({a, b}, {x, y}) == Catch::Approx(expect).margin(1e-12));
                }
}

TEST_CASE("postselect on product box leaves partner marginal") {
    Box iso = make_isotropic(0.4);
    Box det = deterministic_box(Scenario::uniform(1, 2, 2), {{0, 1}});
    // 3-party product: iso on parties (0,1), det as party 2
    Box prod = tensor_and_assign({iso, det}, {{{0, 1}, {2}}});
    Box cond = postselect(prod, 2, 1, 1);
    for (std::size_t i = 0; i < iso.table().size(); ++i)
        REQUIRE(cond.table()[i] == Catch::Approx(iso.table()[i]).margin(1e-12));
    REQUIRE_THROWS_AS(postselect(prod, 2, 0, 1), validation_error); // zero-probability event
}

TEST_CASE("swap and relabel") {
    Box pr = pr_box();
    Box swapped = swap_parties(pr, {1, 0});
    for (std::size_t i = 0; i < pr.table().size(); ++i)
        REQUIRE(swapped.table()[i] == pr.table()[i]);
    Box iso = make_isotropic(0.3);
    Box twice = swap_parties(swap_parties(iso, {1, 0}), {1, 0});
    REQUIRE(twice.table() == iso.table());
    // relabel roundtrip: applying a permutation then its inverse
    std::vector<std::vector<int>> inp = {{1, 0}, {0, 1}}, outp = {{0, 1}, {1, 0}};
    Box once = relabel(iso, inp, outp);
    Box back = relabel(once, inp, outp); // both perms are involutions
    REQUIRE(back.table() == iso.table());
}

TEST_CASE("no-signalling detector") {
    // Alice's outcome copies Bob's input: Bob's input signals
    Scenario sc = Scenario::uniform(2, 2, 2);
    std::vector<double> p(sc.table_size(), 0.0);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) p[sc.flat(sc.pack_inputs({x, y}), sc.pack_outcomes({y, 0}))] = 1.0;
    Box b(sc, std::move(p));
    auto rep = check_no_signalling(b);
    REQUIRE(rep.max_residual == Catch::Approx(1.0));
    REQUIRE(rep.party_residual[1] == Catch::Approx(1.0)); // attributed to the signalling input
    REQUIRE_FALSE(rep.ok());
    // deterministic boxes are silent
    Box det = deterministic_box(sc, {{0, 1}, {1, 1}});
    REQUIRE(check_no_signalling(det).max_residual == 0.0);
}

TEST_CASE("tensor and assign") {
    Box i1 = make_isotropic(0.2), i2 = make_isotropic(0.9);
    // identity assignment: four effective parties
    Box prod = tensor_and_assign({i1, i2}, {{{0, 1}, {2, 3}}});
    REQUIRE(prod.scenario().parties() == 4);
    Box m01 = marginal(prod, {0, 1});
    for (std::size_t i = 0; i < i1.table().size(); ++i)
        REQUIRE(m01.table()[i] == Catch::Approx(i1.table()[i]).margin(1e-12));
    Box m23 = marginal(prod, {2, 3});
    for (std::size_t i = 0; i < i2.table().size(); ++i)
        REQUIRE(m23.table()[i] == Catch::Approx(i2.table()[i]).margin(1e-12));
    REQUIRE(check_no_signalling(prod).max_residual <= 1e-12);
    // group PR3 slots (B,C) into one effective party
    Box g = tensor_and_assign({make_pr3()}, {{{0, 1, 1}}});
    REQUIRE(g.scenario().parties() == 2);
    REQUIRE(g.scenario().inputs(1) == 4);
    REQUIRE(g.scenario().outputs(1) == 4);
    REQUIRE(check_no_signalling(g).max_residual <= 1e-12);
}

TEST_CASE("box validation") {
    Scenario sc = Scenario::uniform(2, 2, 2);
    std::vector<double> bad(sc.table_size(), 0.25);
    bad[0] = -1e-6;
    REQUIRE_THROWS_AS(Box(sc, bad), validation_error);
    std::vector<double> offNorm(sc.table_size(), 0.3);
    REQUIRE_THROWS_AS(Box(sc, offNorm), validation_error);
    // tiny negatives are clamped
    std::vector<double> noisy(sc.table_size(), 0.25);
    noisy[0] = -0.5e-12;
    noisy[1] = 0.5 + 0.5e-12;
    noisy[2] = 0.25;
    noisy[3] = 0.25;
    Box ok(sc, noisy);
    REQUIRE(ok.table()[0] == 0.0);
    // renormalizing ingest fixes solver noise
    std::vector<double> off(sc.table_size(), 0.25 * (1 + 1e-7));
    Box renorm = Box::renormalized(sc, off);
    for (double v : renorm.table()) REQUIRE(v == Catch::Approx(0.25).margin(1e-15));
}
