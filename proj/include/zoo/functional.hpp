#pragma once

#include <map>
#include <optional>

#include "box.hpp"

namespace zoo {

/// A linear functional on behaviours: value = sum of coeff(a|x) * P(a|x).
/// Marginal terms are represented in lifted form: a coefficient intended for
/// P_S(a_S|x_S) is spread over full-table entries with the complementary
/// parties held at input 0 and their outcomes summed.
struct BellFunctional {
    Scenario scenario;
    std::vector<double> coeffs; // same layout as Box tables
    std::string name;
    std::map<std::string, double> known_bounds; // e.g. {"local", 2.0}

    BellFunctional() = default;
    BellFunctional(Scenario sc, std::vector<double> c, std::string n = "")
        : scenario(std::move(sc)), coeffs(std::move(c)), name(std::move(n)) {
        if (coeffs.size() != scenario.table_size())
            throw validation_error("functional: coefficient size mismatch");
    }

    static BellFunctional zeros(Scenario sc, std::string n = "") {
        std::vector<double> c(sc.table_size(), 0.0);
        return BellFunctional(std::move(sc), std::move(c), std::move(n));
    }

    double& coeff(const std::vector<int>& a, const std::vector<int>& x) {
        return coeffs[scenario.flat(scenario.pack_inputs(x), scenario.pack_outcomes(a))];
    }
    double coeff(const std::vector<int>& a, const std::vector<int>& x) const {
        return coeffs[scenario.flat(scenario.pack_inputs(x), scenario.pack_outcomes(a))];
    }

    /// Add c * P_S(a_S | x_S) for a subset S of parties, lifting to the full
    /// table by fixing the remaining parties at input 0 and summing outcomes.
    void add_marginal_term(const std::vector<int>& parties, const std::vector<int>& a_sub,
                           const std::vector<int>& x_sub, double c) {
        const int n = scenario.parties();
        std::vector<int> x(n, 0), a(n, 0);
        std::vector<bool> in_sub(n, false);
        for (std::size_t k = 0; k < parties.size(); ++k) {
            x[parties[k]] = x_sub[k];
            a[parties[k]] = a_sub[k];
            in_sub[parties[k]] = true;
        }
        std::vector<int> rest;
        for (int p = 0; p < n; ++p)
            if (!in_sub[p]) rest.push_back(p);
        std::size_t combos = 1;
        for (int p : rest) combos *= static_cast<std::size_t>(scenario.outputs(p));
        for (std::size_t c_idx = 0; c_idx < combos; ++c_idx) {
            std::size_t rem = c_idx;
            for (std::size_t k = rest.size(); k-- > 0;) {
                const int p = rest[k];
                a[p] = static_cast<int>(rem % scenario.outputs(p));
                rem /= static_cast<std::size_t>(scenario.outputs(p));
            }
            coeff(a, x) += c;
        }
    }
};

inline double bell_value(const BellFunctional& f, const Box& b) {
    if (f.scenario != b.scenario()) throw validation_error("bell_value: scenario mismatch");
    double v = 0.0;
    for (std::size_t i = 0; i < f.coeffs.size(); ++i) v += f.coeffs[i] * b.table()[i];
    return v;
}

/// Scale and shift: c1 * f + c0 * (unit functional).  The unit functional
/// evaluates to one on every normalized behaviour; it puts weight
/// 1/#joint-inputs on each outcome-sum.
inline BellFunctional affine_combination(const BellFunctional& f, double c1, double c0,
                                         std::string name = "") {
    BellFunctional g = f;
    g.name = std::move(name);
    g.known_bounds.clear();
    const double u = c0 / static_cast<double>(f.scenario.joint_inputs());
    for (double& c : g.coeffs) c = c1 * c + 0.0;
    for (std::size_t xi = 0; xi < f.scenario.joint_inputs(); ++xi)
        for (std::size_t o = 0; o < f.scenario.joint_outcomes(); ++o)
            g.coeffs[f.scenario.flat(xi, o)] += u;
    return g;
}

/// Embed a functional into a scenario with more inputs per party (same
/// outputs); added inputs carry zero coefficients.
inline BellFunctional lift_inputs(const BellFunctional& f, const Scenario& target,
                                  std::string name = "") {
    const Scenario& src = f.scenario;
    if (src.parties() != target.parties()) throw validation_error("lift: party mismatch");
    for (int p = 0; p < src.parties(); ++p) {
        if (target.inputs(p) < src.inputs(p) || target.outputs(p) != src.outputs(p))
            throw validation_error("lift: target must extend inputs and keep outputs");
    }
    BellFunctional g = BellFunctional::zeros(target, name.empty() ? f.name : std::move(name));
    g.known_bounds = f.known_bounds;
    for (std::size_t xi = 0; xi < src.joint_inputs(); ++xi) {
        auto xd = src.unpack_inputs(xi);
        const std::size_t ti = target.pack_inputs(xd);
        for (std::size_t o = 0; o < src.joint_outcomes(); ++o)
            g.coeffs[target.flat(ti, o)] = f.coeffs[src.flat(xi, o)];
    }
    return g;
}

/// The two-input correlator expression <00> + <01> + <10> - <11> written on
/// probabilities: coefficient (-1)^(a xor b) on P(ab|xy), negated at x=y=1.
inline BellFunctional chsh_functional() {
    Scenario sc = Scenario::uniform(2, 2, 2);
    BellFunctional f = BellFunctional::zeros(sc, "chsh");
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y) {
            const double sgn = (x == 1 && y == 1) ? -1.0 : 1.0;
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b)
                    f.coeff({a, b}, {x, y}) = sgn * (((a ^ b) == 0) ? 1.0 : -1.0);
        }
    f.known_bounds = {{"local", 2.0}, {"quantum", 2.0 * std::sqrt(2.0)}, {"ns", 4.0}};
    return f;
}

/// Three-input two-output facet, normalized so the local bound is zero:
///   -P_A(1|1) - P_B(1|0) - 2 P_B(1|1)
///   + P(11|00) + P(11|01) + P(11|10) + P(11|11)
///   - P(11|02) + P(11|12) - P(11|20) + P(11|21)
inline BellFunctional i3322_functional() {
    Scenario sc = Scenario::uniform(2, 3, 2);
    BellFunctional f = BellFunctional::zeros(sc, "i3322");
    f.add_marginal_term({0}, {1}, {1}, -1.0); // -P_A(1|1)
    f.add_marginal_term({1}, {1}, {0}, -1.0); // -P_B(1|0)
    f.add_marginal_term({1}, {1}, {1}, -2.0); // -2 P_B(1|1)
    auto joint = [&f](int x, int y, double c) { f.coeff({1, 1}, {x, y}) += c; };
    joint(0, 0, 1.0);
    joint(0, 1, 1.0);
    joint(1, 0, 1.0);
    joint(1, 1, 1.0);
    joint(0, 2, -1.0);
    joint(1, 2, 1.0);
    joint(2, 0, -1.0);
    joint(2, 1, 1.0);
    f.known_bounds = {{"local", 0.0}, {"ns", 1.0}};
    return f;
}

namespace detail {
// Accumulate a term and all its images under joint relabelling of the three
// parties, counting each distinct coefficient pattern once.
inline void symmetrize_terms(BellFunctional& f,
                             const std::vector<std::tuple<std::vector<int>, std::vector<int>, std::vector<int>, double>>& terms) {
    const Scenario& sc = f.scenario;
    std::vector<std::vector<int>> perms = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& [parties, a_sub, x_sub, c] : terms) {
        std::vector<std::vector<double>> images;
        for (const auto& perm : perms) {
            BellFunctional g = BellFunctional::zeros(sc);
            std::vector<int> mapped(parties.size());
            for (std::size_t k = 0; k < parties.size(); ++k) mapped[k] = perm[parties[k]];
            g.add_marginal_term(mapped, a_sub, x_sub, c);
            bool dup = false;
            for (const auto& seen : images) {
                double d = 0.0;
                for (std::size_t i = 0; i < seen.size(); ++i) d = std::max(d, std::abs(seen[i] - g.coeffs[i]));
                if (d < 1e-12) { dup = true; break; }
            }
            if (!dup) images.push_back(g.coeffs);
        }
        for (const auto& img : images)
            for (std::size_t i = 0; i < img.size(); ++i) f.coeffs[i] += img[i];
    }
}
} // namespace detail

/// Symmetrized three-party two-input inequality, nonpositive on local
/// behaviours.  Base terms (before summing over distinct party relabellings):
///   -2 P_A(0|1) + P_AB(00|11) - 2 P_AB(00|12)
///   - P(000|111) + 4 P(000|112) + 2 P(000|122) - 2 P(000|222)
/// with inputs written here 1-based; the table uses 0-based inputs.
inline BellFunctional s409_functional() {
    Scenario sc = Scenario::uniform(3, 2, 2);
    BellFunctional f = BellFunctional::zeros(sc, "s409");
    using Term = std::tuple<std::vector<int>, std::vector<int>, std::vector<int>, double>;
    std::vector<Term> terms = {
        {{0}, {0}, {0}, -2.0},
        {{0, 1}, {0, 0}, {0, 0}, 1.0},
        {{0, 1}, {0, 0}, {0, 1}, -2.0},
        {{0, 1, 2}, {0, 0, 0}, {0, 0, 0}, -1.0},
        {{0, 1, 2}, {0, 0, 0}, {0, 0, 1}, 4.0},
        {{0, 1, 2}, {0, 0, 0}, {0, 1, 1}, 2.0},
        {{0, 1, 2}, {0, 0, 0}, {1, 1, 1}, -2.0},
    };
    detail::symmetrize_terms(f, terms);
    f.known_bounds = {{"local", 0.0}};
    return f;
}

/// Guess-your-neighbour's-input game on three parties: unit payoff when each
/// party outputs the next party's input, played on the four inputs with
/// x + y + z even.
inline BellFunctional gyni_functional() {
    Scenario sc = Scenario::uniform(3, 2, 2);
    BellFunctional f = BellFunctional::zeros(sc, "gyni");
    for (int x = 0; x < 2; ++x)
        for (int y = 0; y < 2; ++y)
            for (int z = 0; z < 2; ++z) {
                if ((x + y + z) % 2 != 0) continue;
                f.coeff({y, z, x}, {x, y, z}) = 1.0;
            }
    f.known_bounds = {{"local", 1.0}};
    return f;
}

/// Combine two bipartite functionals on disjoint input blocks: party inputs
/// are concatenated, block (1,1) carries f1, block (2,2) carries f2, and the
/// mixed blocks carry zero coefficients.  Outputs must agree.
inline BellFunctional direct_sum_functional(const BellFunctional& f1, const BellFunctional& f2,
                                            std::string name = "") {
    const Scenario &s1 = f1.scenario, &s2 = f2.scenario;
    if (s1.parties() != 2 || s2.parties() != 2)
        throw validation_error("direct_sum: bipartite functionals required");
    for (int p = 0; p < 2; ++p)
        if (s1.outputs(p) != s2.outputs(p))
            throw validation_error("direct_sum: output arities must agree");
    Scenario sc({s1.inputs(0) + s2.inputs(0), s1.inputs(1) + s2.inputs(1)},
                {s1.outputs(0), s1.outputs(1)});
    BellFunctional f = BellFunctional::zeros(sc, std::move(name));
    for (int x = 0; x < s1.inputs(0); ++x)
        for (int y = 0; y < s1.inputs(1); ++y)
            for (int a = 0; a < s1.outputs(0); ++a)
                for (int b = 0; b < s1.outputs(1); ++b)
                    f.coeff({a, b}, {x, y}) = f1.coeff({a, b}, {x, y});
    for (int x = 0; x < s2.inputs(0); ++x)
        for (int y = 0; y < s2.inputs(1); ++y)
            for (int a = 0; a < s2.outputs(0); ++a)
                for (int b = 0; b < s2.outputs(1); ++b)
                    f.coeff({a, b}, {s1.inputs(0) + x, s1.inputs(1) + y}) = f2.coeff({a, b}, {x, y});
    return f;
}

} // namespace zoo
