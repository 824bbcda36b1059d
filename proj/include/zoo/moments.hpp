#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "box.hpp"
#include "functional.hpp"
#include "scenario.hpp"
#include "sdp.hpp"

namespace zoo {

/// Operator algebra behind a moment relaxation.  `commuting` models
/// projective measurements of separated parties: operators of different
/// parties commute, projectors of one input are idempotent and mutually
/// orthogonal, and the last outcome of every input is eliminated through
/// completeness.  `tracial` models one shared algebra with a trace-like
/// state: words are never reordered and the state is cyclic.
enum class AlgebraMode { commuting, tracial };

/// One measurement-operator symbol.
struct OpSymbol {
    int party = 0, input = 0, outcome = 0;
    friend auto operator<=>(const OpSymbol&, const OpSymbol&) = default;
};

/// Product of symbols; `zero` flags a word annihilated by orthogonality.
struct Monomial {
    std::vector<OpSymbol> word;
    bool zero = false;
    int degree() const { return static_cast<int>(word.size()); }
    friend bool operator==(const Monomial&, const Monomial&) = default;
};

/// Normal form of a word.  Commuting mode stably partitions the word by
/// party, collapses adjacent equal projectors, and annihilates the word when
/// two projectors of one input but different outcomes meet.  Tracial mode
/// keeps words verbatim.
inline Monomial canonicalize(Monomial m, AlgebraMode mode) {
    if (m.zero) return Monomial{{}, true};
    if (mode == AlgebraMode::tracial) return m;
    std::stable_sort(m.word.begin(), m.word.end(),
                     [](const OpSymbol& a, const OpSymbol& b) { return a.party < b.party; });
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i + 1 < m.word.size(); ++i) {
            const OpSymbol& u = m.word[i];
            const OpSymbol& v = m.word[i + 1];
            if (u.party != v.party || u.input != v.input) continue;
            if (u.outcome != v.outcome) return Monomial{{}, true};
            m.word.erase(m.word.begin() + static_cast<std::ptrdiff_t>(i + 1));
            changed = true;
            break;
        }
    }
    return m;
}

/// Symbols are self-adjoint, so the adjoint of a word is its reversal.
inline Monomial adjoint(Monomial m) {
    std::reverse(m.word.begin(), m.word.end());
    return m;
}

inline Monomial operator*(const Monomial& a, const Monomial& b) {
    Monomial r;
    r.zero = a.zero || b.zero;
    if (!r.zero) {
        r.word = a.word;
        r.word.insert(r.word.end(), b.word.begin(), b.word.end());
    }
    return r;
}

/// Union of degree-capped product sets: a word belongs when its per-party
/// degree vector is dominated by at least one cap.  The identity and every
/// single symbol are always members.
struct OperatorSet {
    int parties = 2;
    std::vector<std::vector<int>> caps;

    /// Only the identity and the single-party symbols.
    static OperatorSet level1(int n_parties) {
        OperatorSet o;
        o.parties = n_parties;
        return o;
    }

    /// All words with per-party degrees below one common cap.
    static OperatorSet product(std::vector<int> degs) {
        OperatorSet o;
        o.parties = static_cast<int>(degs.size());
        o.caps.push_back(std::move(degs));
        return o;
    }

    bool contains(const std::vector<int>& deg) const {
        int total = 0;
        for (int d : deg) total += d;
        if (total <= 1) return true;
        for (const auto& cap : caps) {
            bool ok = true;
            for (int p = 0; p < parties && ok; ++p) ok = deg[p] <= cap[p];
            if (ok) return true;
        }
        return false;
    }

    int max_degree(int party) const {
        int d = 1;
        for (const auto& cap : caps) d = std::max(d, cap[party]);
        return d;
    }
};

/// Affine expression over moment variables.
struct MomentExpr {
    double constant = 0.0;
    std::map<int, double> terms;
};

/// Compiled semidefinite relaxation over shared moment variables.  SDP
/// variable k is the moment class with representative word `rep[k]`; the
/// identity moment is folded into constants, which also fixes L(1)=1.
/// `prob.objective` and `obj_offset` are installed by the front ends.
struct MomentProblem {
    Scenario scenario;
    AlgebraMode mode = AlgebraMode::commuting;
    std::vector<Monomial> basis;               // labels of the main block
    std::map<std::vector<OpSymbol>, int> ids;  // class key -> variable
    std::vector<std::vector<OpSymbol>> rep;    // variable -> representative
    std::vector<std::uint32_t> masks;          // allowed per-party reversals
    int level = 0;                             // tracial window half-width k
    SdpProblem prob;
    double obj_offset = 0.0;
};

namespace detail {

inline constexpr int kUnitMoment = -2; // the identity moment, value 1
inline constexpr int kZeroMoment = -3; // annihilated word, value 0

/// Subgroup of per-party reversal patterns generated by the global adjoint
/// and by each individually transposable party.
inline std::vector<std::uint32_t> reversal_masks(int parties, const std::vector<int>& transposed) {
    std::set<std::uint32_t> group = {0u};
    std::vector<std::uint32_t> gens = {(1u << parties) - 1u};
    for (int p : transposed) gens.push_back(1u << p);
    bool grew = true;
    while (grew) {
        grew = false;
        std::vector<std::uint32_t> cur(group.begin(), group.end());
        for (std::uint32_t m : cur)
            for (std::uint32_t g : gens)
                if (group.insert(m ^ g).second) grew = true;
    }
    return {group.begin(), group.end()};
}

/// Reverse the contiguous party blocks of a party-sorted word selected by
/// the bit mask.
inline std::vector<OpSymbol> reverse_blocks(std::vector<OpSymbol> w, std::uint32_t mask) {
    std::size_t i = 0;
    while (i < w.size()) {
        std::size_t j = i;
        while (j < w.size() && w[j].party == w[i].party) ++j;
        if (mask & (1u << w[i].party))
            std::reverse(w.begin() + static_cast<std::ptrdiff_t>(i),
                         w.begin() + static_cast<std::ptrdiff_t>(j));
        i = j;
    }
    return w;
}

inline std::vector<OpSymbol> commuting_class_key(const std::vector<OpSymbol>& w,
                                                 const std::vector<std::uint32_t>& masks) {
    std::vector<OpSymbol> best = reverse_blocks(w, masks.front());
    for (std::size_t k = 1; k < masks.size(); ++k) {
        std::vector<OpSymbol> cand = reverse_blocks(w, masks[k]);
        if (cand < best) best = cand;
    }
    return best;
}

/// Trace cyclicity and self-adjointness: the class of a word is its orbit
/// under rotation and reversal.
inline std::vector<OpSymbol> tracial_class_key(const std::vector<OpSymbol>& w) {
    if (w.size() <= 1) return w;
    std::vector<OpSymbol> best = w;
    std::vector<OpSymbol> cand = w;
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t r = 0; r < cand.size(); ++r) {
            std::rotate(cand.begin(), cand.begin() + 1, cand.end());
            if (cand < best) best = cand;
        }
        std::reverse(cand.begin(), cand.end());
    }
    return best;
}

/// Shared moment-variable registry bound to one problem under construction.
struct MomentTable {
    AlgebraMode mode;
    const std::vector<std::uint32_t>* masks;
    std::map<std::vector<OpSymbol>, int>* ids;
    std::vector<std::vector<OpSymbol>>* rep;

    int id_for(const Monomial& raw, bool create) const {
        Monomial m = canonicalize(raw, mode);
        if (m.zero) return kZeroMoment;
        if (m.word.empty()) return kUnitMoment;
        std::vector<OpSymbol> key = mode == AlgebraMode::commuting
                                        ? commuting_class_key(m.word, *masks)
                                        : tracial_class_key(m.word);
        auto it = ids->find(key);
        if (it != ids->end()) return it->second;
        if (!create) throw validation_error("moments: word outside the compiled operator set");
        const int id = static_cast<int>(rep->size());
        rep->push_back(key);
        ids->emplace(std::move(key), id);
        return id;
    }
};

inline MomentTable table_of(MomentProblem& mp) {
    return MomentTable{mp.mode, &mp.masks, &mp.ids, &mp.rep};
}

/// One multiplicand of a product: an affine combination of "no symbol"
/// (identity) and single symbols.
using AffineFactor = std::vector<std::pair<double, std::optional<OpSymbol>>>;

/// The operator of outcome `a` at `(party, input)` over the eliminated-last
/// -outcome symbol set: a kept outcome is its own symbol, the last outcome
/// is the identity minus the kept ones.
inline AffineFactor outcome_factor(const Scenario& sc, int party, int input, int outcome) {
    const int d = sc.outputs(party);
    AffineFactor f;
    if (outcome < d - 1) {
        f.push_back({1.0, OpSymbol{party, input, outcome}});
    } else {
        f.push_back({1.0, std::nullopt});
        for (int a = 0; a + 1 < d; ++a) f.push_back({-1.0, OpSymbol{party, input, a}});
    }
    return f;
}

/// Expand a product of affine factors into a moment expression.
inline void expand_product(const MomentTable& tab, const std::vector<AffineFactor>& fs,
                           bool create, double scale, MomentExpr& out) {
    std::vector<std::size_t> pick(fs.size(), 0);
    while (true) {
        double c = scale;
        Monomial w;
        for (std::size_t i = 0; i < fs.size(); ++i) {
            const auto& [cf, s] = fs[i][pick[i]];
            c *= cf;
            if (s) w.word.push_back(*s);
        }
        const int id = tab.id_for(w, create);
        if (id == kUnitMoment)
            out.constant += c;
        else if (id != kZeroMoment)
            out.terms[id] += c;
        std::size_t i = 0;
        for (; i < fs.size(); ++i) {
            if (++pick[i] < fs[i].size()) break;
            pick[i] = 0;
        }
        if (i == fs.size()) break;
    }
}

/// Canonical single-party words of degree <= maxdeg over the kept outcomes:
/// consecutive symbols never share an input (equal pairs collapse, unequal
/// pairs annihilate), so these are exactly the commuting normal forms.
inline std::vector<std::vector<OpSymbol>> party_words(const Scenario& sc, int party, int maxdeg) {
    std::vector<OpSymbol> syms;
    for (int x = 0; x < sc.inputs(party); ++x)
        for (int a = 0; a + 1 < sc.outputs(party); ++a) syms.push_back({party, x, a});
    std::vector<std::vector<OpSymbol>> out = {{}};
    std::size_t lo = 0, hi = out.size();
    for (int d = 1; d <= maxdeg; ++d) {
        for (std::size_t i = lo; i < hi; ++i)
            for (const OpSymbol& s : syms) {
                if (!out[i].empty() && out[i].back().input == s.input) continue;
                std::vector<OpSymbol> w = out[i];
                w.push_back(s);
                out.push_back(std::move(w));
            }
        lo = hi;
        hi = out.size();
    }
    return out;
}

inline void guard_order(std::size_t order) {
    if (order > 200)
        throw capacity_error("moments: matrix order " + std::to_string(order) +
                             " exceeds the 200 limit");
}

/// Emit one affine expression into a block cell (upper triangle only).
inline void emit_cell(SdpProblem& p, int block, int row, int col, const MomentExpr& e) {
    if (e.constant != 0.0) p.entries.push_back({block, row, col, -1, e.constant});
    for (const auto& [id, c] : e.terms)
        if (std::abs(c) > 1e-15) p.entries.push_back({block, row, col, id, c});
}

} // namespace detail

/// Moment-matrix positivity program over operator set O in the commuting
/// algebra.  `transposed` lists parties whose word blocks may be reversed
/// inside any moment class; transposing one side of a bipartition is the
/// partial-transpose tightening of the set.
inline MomentProblem build_O_positivity(const Scenario& sc, const OperatorSet& O,
                                        const std::vector<int>& transposed = {}) {
    if (O.parties != sc.parties())
        throw validation_error("moments: operator set arity does not match the scenario");
    for (const auto& cap : O.caps)
        if (static_cast<int>(cap.size()) != sc.parties())
            throw validation_error("moments: cap length does not match the scenario");
    for (int p : transposed)
        if (p < 0 || p >= sc.parties()) throw validation_error("moments: transposed party index");
    MomentProblem mp;
    mp.scenario = sc;
    mp.mode = AlgebraMode::commuting;
    mp.masks = detail::reversal_masks(sc.parties(), transposed);

    std::vector<std::vector<std::vector<OpSymbol>>> per_party;
    for (int p = 0; p < sc.parties(); ++p)
        per_party.push_back(detail::party_words(sc, p, O.max_degree(p)));
    std::vector<std::size_t> pick(per_party.size(), 0);
    while (true) {
        Monomial m;
        std::vector<int> deg(sc.parties());
        for (int p = 0; p < sc.parties(); ++p) {
            const auto& w = per_party[p][pick[p]];
            deg[p] = static_cast<int>(w.size());
            m.word.insert(m.word.end(), w.begin(), w.end());
        }
        if (O.contains(deg)) mp.basis.push_back(std::move(m));
        std::size_t i = 0;
        for (; i < pick.size(); ++i) {
            if (++pick[i] < per_party[i].size()) break;
            pick[i] = 0;
        }
        if (i == pick.size()) break;
    }
    std::sort(mp.basis.begin(), mp.basis.end(), [](const Monomial& a, const Monomial& b) {
        return std::pair(a.degree(), a.word) < std::pair(b.degree(), b.word);
    });
    detail::guard_order(mp.basis.size());

    const int n = static_cast<int>(mp.basis.size());
    mp.prob.block_sizes.push_back(n);
    detail::MomentTable tab = detail::table_of(mp);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const int id = tab.id_for(adjoint(mp.basis[i]) * mp.basis[j], true);
            if (id == detail::kUnitMoment)
                mp.prob.entries.push_back({0, i, j, -1, 1.0});
            else if (id != detail::kZeroMoment)
                mp.prob.entries.push_back({0, i, j, id, 1.0});
        }
    mp.prob.num_vars = static_cast<int>(mp.rep.size());
    mp.prob.objective.assign(mp.rep.size(), 0.0);
    return mp;
}

/// Tracial moment program at level k.  The main block ranges over all words
/// of degree <= k; one localizing block per measurement operator and per
/// ordered cross-party operator pair enforces operator positivity, indexed
/// by words of degree <= k-1 (or by the identity alone with
/// `scalar_localizers`).  The last outcome of every input is substituted as
/// identity minus the kept ones, which realizes the completeness relations
/// by construction, and moment classes are shared across rotations and
/// reversal of words.
inline MomentProblem build_tracial(const Scenario& sc, int k, bool scalar_localizers = false) {
    if (k < 1) throw validation_error("moments: tracial level must be at least 1");
    if (sc.parties() != 2)
        throw validation_error("moments: the tracial hierarchy is built for two parties");
    MomentProblem mp;
    mp.scenario = sc;
    mp.mode = AlgebraMode::tracial;
    mp.level = k;

    std::vector<OpSymbol> syms;
    for (int p = 0; p < sc.parties(); ++p)
        for (int x = 0; x < sc.inputs(p); ++x)
            for (int a = 0; a + 1 < sc.outputs(p); ++a) syms.push_back({p, x, a});
    std::vector<std::vector<OpSymbol>> words = {{}};
    std::size_t lo = 0, hi = words.size(), sub_count = 1;
    for (int d = 1; d <= k; ++d) {
        for (std::size_t i = lo; i < hi; ++i)
            for (const OpSymbol& s : syms) {
                std::vector<OpSymbol> w = words[i];
                w.push_back(s);
                words.push_back(std::move(w));
            }
        lo = hi;
        hi = words.size();
        if (d == k - 1) sub_count = words.size();
    }
    detail::guard_order(words.size());
    for (auto& w : words) mp.basis.push_back(Monomial{w, false});

    const int n = static_cast<int>(words.size());
    const int ns = scalar_localizers ? 1 : static_cast<int>(sub_count);
    mp.prob.block_sizes.push_back(n);
    detail::MomentTable tab = detail::table_of(mp);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const int id = tab.id_for(adjoint(mp.basis[i]) * mp.basis[j], true);
            if (id == detail::kUnitMoment)
                mp.prob.entries.push_back({0, i, j, -1, 1.0});
            else if (id != detail::kZeroMoment)
                mp.prob.entries.push_back({0, i, j, id, 1.0});
        }

    // localizing blocks: cell (f,g) holds L(f X g') for single centers X and
    // L(f X g' Y) for cross-party pairs (X,Y), with g' the reversal of g
    auto add_localizer = [&](const std::vector<detail::AffineFactor>& centers) {
        const int block = static_cast<int>(mp.prob.block_sizes.size());
        mp.prob.block_sizes.push_back(ns);
        for (int fi = 0; fi < ns; ++fi)
            for (int gi = fi; gi < ns; ++gi) {
                std::vector<detail::AffineFactor> fs;
                for (const OpSymbol& s : words[static_cast<std::size_t>(fi)])
                    fs.push_back({{1.0, s}});
                fs.push_back(centers[0]);
                std::vector<OpSymbol> g = words[static_cast<std::size_t>(gi)];
                std::reverse(g.begin(), g.end());
                for (const OpSymbol& s : g) fs.push_back({{1.0, s}});
                if (centers.size() > 1) fs.push_back(centers[1]);
                MomentExpr e;
                detail::expand_product(tab, fs, true, 1.0, e);
                detail::emit_cell(mp.prob, block, fi, gi, e);
            }
    };
    for (int p = 0; p < sc.parties(); ++p)
        for (int x = 0; x < sc.inputs(p); ++x)
            for (int a = 0; a < sc.outputs(p); ++a)
                add_localizer({detail::outcome_factor(sc, p, x, a)});
    for (int p = 0; p < sc.parties(); ++p)
        for (int q = 0; q < sc.parties(); ++q) {
            if (p == q) continue;
            for (int x = 0; x < sc.inputs(p); ++x)
                for (int a = 0; a < sc.outputs(p); ++a)
                    for (int y = 0; y < sc.inputs(q); ++y)
                        for (int b = 0; b < sc.outputs(q); ++b)
                            add_localizer({detail::outcome_factor(sc, p, x, a),
                                           detail::outcome_factor(sc, q, y, b)});
        }
    mp.prob.num_vars = static_cast<int>(mp.rep.size());
    mp.prob.objective.assign(mp.rep.size(), 0.0);
    return mp;
}

/// L-expression of one joint probability.  Throws when the operator set is
/// too small to express it.
inline MomentExpr probability_expr(MomentProblem& mp, const std::vector<int>& outcomes,
                                   const std::vector<int>& inputs) {
    detail::MomentTable tab = detail::table_of(mp);
    std::vector<detail::AffineFactor> fs;
    for (int p = 0; p < mp.scenario.parties(); ++p)
        fs.push_back(detail::outcome_factor(mp.scenario, p, inputs[p], outcomes[p]));
    MomentExpr e;
    detail::expand_product(tab, fs, false, 1.0, e);
    return e;
}

/// Install a Bell functional as the SDP objective.
inline void attach_objective(MomentProblem& mp, const BellFunctional& f) {
    if (f.scenario != mp.scenario)
        throw validation_error("moments: functional scenario mismatch");
    MomentExpr total;
    for (std::size_t xi = 0; xi < mp.scenario.joint_inputs(); ++xi) {
        auto x = mp.scenario.unpack_inputs(xi);
        for (std::size_t oi = 0; oi < mp.scenario.joint_outcomes(); ++oi) {
            const double c = f.coeffs[mp.scenario.flat(xi, oi)];
            if (c == 0.0) continue;
            auto a = mp.scenario.unpack_outcomes(oi);
            MomentExpr e = probability_expr(mp, a, x);
            total.constant += c * e.constant;
            for (const auto& [id, v] : e.terms) total.terms[id] += c * v;
        }
    }
    mp.prob.objective.assign(mp.rep.size(), 0.0);
    for (const auto& [id, v] : total.terms)
        if (std::abs(v) > 1e-15) mp.prob.objective[static_cast<std::size_t>(id)] = v;
    mp.obj_offset = total.constant;
}

/// One 1x1 block per table entry keeps every modelled probability
/// nonnegative, so bounds range over behaviours rather than bare moment
/// vectors.
inline void add_probability_positivity(MomentProblem& mp) {
    for (std::size_t xi = 0; xi < mp.scenario.joint_inputs(); ++xi) {
        auto x = mp.scenario.unpack_inputs(xi);
        for (std::size_t oi = 0; oi < mp.scenario.joint_outcomes(); ++oi) {
            auto a = mp.scenario.unpack_outcomes(oi);
            MomentExpr e = probability_expr(mp, a, x);
            const int block = static_cast<int>(mp.prob.block_sizes.size());
            mp.prob.block_sizes.push_back(1);
            detail::emit_cell(mp.prob, block, 0, 0, e);
        }
    }
}

/// A solved moment bound: optimal value (objective plus constant offset),
/// solver report, and the compiled problem for inspection or dumping.
struct MomentBound {
    double value = 0.0;
    SolveReport report;
    MomentProblem problem;
};

/// Upper bound on a Bell functional over the behaviours admitting a PSD
/// moment completion on operator set O (with optional partial transposes).
inline MomentBound npa_bell_max(const Scenario& sc, const OperatorSet& O,
                                const BellFunctional& f, const std::vector<int>& transposed = {},
                                const SdpOptions& opt = {}) {
    MomentBound out;
    out.problem = build_O_positivity(sc, O, transposed);
    attach_objective(out.problem, f);
    add_probability_positivity(out.problem);
    out.report = sdp_solve(out.problem.prob, opt);
    out.value = out.report.objective + out.problem.obj_offset;
    return out;
}

/// Three-party bound at symmetric level N.
inline MomentBound npa_bell_max_tripartite(int N, const BellFunctional& f,
                                           const std::vector<int>& transposed = {},
                                           const SdpOptions& opt = {}) {
    if (f.scenario.parties() != 3)
        throw validation_error("moments: tripartite bound needs a three-party functional");
    if (N < 1) throw validation_error("moments: level must be at least 1");
    return npa_bell_max(f.scenario, OperatorSet::product({N, N, N}), f, transposed, opt);
}

/// Tracial-hierarchy bound at level k.
inline MomentBound tracial_bell_max(const Scenario& sc, int k, const BellFunctional& f,
                                    bool scalar_localizers = false, const SdpOptions& opt = {}) {
    MomentBound out;
    out.problem = build_tracial(sc, k, scalar_localizers);
    attach_objective(out.problem, f);
    out.report = sdp_solve(out.problem.prob, opt);
    out.value = out.report.objective + out.problem.obj_offset;
    return out;
}

inline double qplus_bound(const Scenario& sc, int k, const BellFunctional& f,
                          bool scalar_localizers = false, const SdpOptions& opt = {}) {
    return tracial_bell_max(sc, k, f, scalar_localizers, opt).value;
}

/// Box membership in the set cut out by an operator set.  `margin` is the
/// largest t with moment matrix >= t*I among completions matching the box;
/// a strictly negative margin certifies non-membership and yields a
/// separating functional: separator * q <= separator_bound for every member
/// q, while separator * box exceeds it by |margin|.
struct MembershipResult {
    bool member = false;
    double margin = 0.0;
    SolveReport report;
    bool has_separator = false;
    BellFunctional separator;
    double separator_bound = 0.0;
};

inline MembershipResult npa_membership(const Box& box, const OperatorSet& O,
                                       const std::vector<int>& transposed = {},
                                       const SdpOptions& opt = {}) {
    const Scenario& sc = box.scenario();
    MembershipResult res;
    MomentProblem mp = build_O_positivity(sc, O, transposed);
    const int nv = static_cast<int>(mp.rep.size());
    const int order = mp.prob.block_sizes.front();
    const int tvar = nv;
    mp.prob.num_vars = nv + 1;
    for (int i = 0; i < order; ++i) mp.prob.entries.push_back({0, i, i, tvar, -1.0});
    mp.prob.objective.assign(static_cast<std::size_t>(nv + 1), 0.0);
    mp.prob.objective.back() = 1.0;

    // pin every table entry; keep one row per independent direction but
    // check the full system for consistency first
    const std::size_t rows = sc.table_size();
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), nv + 1);
    Eigen::VectorXd rhs(static_cast<Eigen::Index>(rows));
    std::size_t e = 0;
    for (std::size_t xi = 0; xi < sc.joint_inputs(); ++xi) {
        auto x = sc.unpack_inputs(xi);
        for (std::size_t oi = 0; oi < sc.joint_outcomes(); ++oi, ++e) {
            auto a = sc.unpack_outcomes(oi);
            MomentExpr ex = probability_expr(mp, a, x);
            for (const auto& [id, v] : ex.terms) R(static_cast<Eigen::Index>(e), id) = v;
            rhs(static_cast<Eigen::Index>(e)) = box.table()[sc.flat(xi, oi)] - ex.constant;
        }
    }
    {
        Eigen::VectorXd v = R.colPivHouseholderQr().solve(rhs);
        const double resid = (R * v - rhs).cwiseAbs().maxCoeff();
        if (resid > tol::kCertificate) {
            res.member = false;
            res.margin = -resid;
            res.report.status = SolveStatus::infeasible;
            res.report.note = "no moment completion matches the table";
            return res;
        }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(R.transpose());
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    std::vector<int> kept;
    for (int i = 0; i < rank; ++i) kept.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
    std::sort(kept.begin(), kept.end());
    mp.prob.eq.resize(rank, nv + 1);
    mp.prob.eq_rhs.resize(rank);
    for (int i = 0; i < rank; ++i) {
        mp.prob.eq.row(i) = R.row(kept[static_cast<std::size_t>(i)]);
        mp.prob.eq_rhs(i) = rhs(kept[static_cast<std::size_t>(i)]);
    }

    res.report = sdp_solve(mp.prob, opt);
    res.margin = res.report.objective;
    res.member = res.report.status == SolveStatus::optimal && res.margin >= -tol::kCertificate;
    if (!res.member && res.report.status == SolveStatus::optimal &&
        static_cast<int>(res.report.reduced_costs.size()) == rank) {
        res.separator = BellFunctional::zeros(sc, "separator");
        for (int i = 0; i < rank; ++i)
            res.separator.coeffs[static_cast<std::size_t>(kept[static_cast<std::size_t>(i)])] =
                -res.report.reduced_costs[static_cast<std::size_t>(i)];
        res.separator_bound = res.margin + bell_value(res.separator, box);
        res.separator.known_bounds["set"] = res.separator_bound;
        res.has_separator = true;
    }
    return res;
}

} // namespace zoo
