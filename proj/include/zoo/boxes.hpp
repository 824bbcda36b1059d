#pragma once

#include "box.hpp"

namespace zoo {

/// Uniformly random outcomes for every input.
inline Box uniform_box(const Scenario& sc) {
    std::vector<double> p(sc.table_size(), 1.0 / static_cast<double>(sc.joint_outcomes()));
    return Box(sc, std::move(p));
}

/// Deterministic behaviour from per-party response functions
/// (responses[p][x] = outcome of party p on input x).
inline Box deterministic_box(const Scenario& sc, const std::vector<std::vector<int>>& responses) {
    if (static_cast<int>(responses.size()) != sc.parties())
        throw validation_error("deterministic_box: need responses for each party");
    for (int p = 0; p < sc.parties(); ++p) {
        if (static_cast<int>(responses[p].size()) != sc.inputs(p))
            throw validation_error("deterministic_box: response arity mismatch");
        for (int v : responses[p])
            if (v < 0 || v >= sc.outputs(p)) throw validation_error("deterministic_box: outcome out of range");
    }
    std::vector<double> p(sc.table_size(), 0.0);
    const int n = sc.parties();
    std::vector<int> a(n);
    for (std::size_t xi = 0; xi < sc.joint_inputs(); ++xi) {
        auto xd = sc.unpack_inputs(xi);
        for (int q = 0; q < n; ++q) a[q] = responses[q][xd[q]];
        p[sc.flat(xi, sc.pack_outcomes(a))] = 1.0;
    }
    return Box(sc, std::move(p));
}

/// Noisy nonlocal box: weight lambda on the extremal correlated part
/// (1/2 when a xor b = x.y, else 0) and 1-lambda on uniform noise.
inline Box make_isotropic(double lambda) {
    if (lambda < 0.0 || lambda > 1.0) throw validation_error("isotropic: lambda outside [0,1]");
    Scenario sc = Scenario::uniform(2, 2, 2);
    std::vector<double> p(sc.table_size());
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) {
                    const double extremal = ((a ^ b) == (x & y)) ? 0.5 : 0.0;
                    p[sc.flat(sc.pack_inputs({x, y}), sc.pack_outcomes({a, b}))] =
                        lambda * extremal + (1.0 - lambda) * 0.25;
                }
    return Box(sc, std::move(p));
}

inline Box pr_box() { return make_isotropic(1.0); }

/// Three-party analogue of the extremal correlated box:
/// P(abc|xyz) = 1/4 when a xor b xor c = x.y.z, else 0.
inline Box make_pr3() {
    Scenario sc = Scenario::uniform(3, 2, 2);
    std::vector<double> p(sc.table_size(), 0.0);
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z)
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b)
                        for (int c = 0; c < 2; ++c)
                            if ((a ^ b ^ c) == (x & y & z))
                                p[sc.flat(sc.pack_inputs({x, y, z}), sc.pack_outcomes({a, b, c}))] = 0.25;
    return Box(sc, std::move(p));
}

/// The 3322 behaviour whose I3322 value is exactly 1/3 while admitting the
/// ghost extensions tested elsewhere; entries are small fractions.
inline Box ghost_witness_box() {
    Scenario sc = Scenario::uniform(2, 3, 2);
    std::vector<double> p(sc.table_size());
    // rows: (x,y) -> probabilities of ab = 00, 01, 10, 11 in twelfths
    auto row = [&](int x, int y, int p00, int p01, int p10, int p11) {
        const std::size_t xi = sc.pack_inputs({x, y});
        p[sc.flat(xi, 0)] = p00 / 12.0;
        p[sc.flat(xi, 1)] = p01 / 12.0;
        p[sc.flat(xi, 2)] = p10 / 12.0;
        p[sc.flat(xi, 3)] = p11 / 12.0;
    };
    row(0, 0, 4, 0, 4, 4);
    row(0, 1, 4, 0, 4, 4);
    row(1, 0, 4, 0, 4, 4);
    row(1, 1, 4, 0, 4, 4);
    row(0, 2, 0, 4, 6, 2);
    row(1, 2, 4, 0, 2, 6);
    row(2, 0, 2, 4, 6, 0);
    row(2, 1, 6, 0, 2, 4);
    row(2, 2, 3, 3, 3, 3);
    return Box(sc, std::move(p));
}

/// Same table with integer numerators over twelve, for exact arithmetic.
inline std::vector<long> ghost_witness_numerators_base12() {
    Box b = ghost_witness_box();
    std::vector<long> num(b.table().size());
    for (std::size_t i = 0; i < num.size(); ++i)
        num[i] = std::lround(b.table()[i] * 12.0);
    return num;
}

} // namespace zoo
