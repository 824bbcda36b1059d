#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "scenario.hpp"

namespace zoo {

/// Per-party worst-case signalling residuals of a conditional distribution.
struct NoSignallingReport {
    std::vector<double> party_residual; // max marginal deviation when that party's input changes
    double max_residual = 0.0;
    bool ok(double tolerance = tol::kNoSignalling) const { return max_residual <= tolerance; }
};

/// A behaviour P(a_1..a_n | x_1..x_n), stored dense in row-major order with
/// the joint-outcome index running fastest.  Construction validates
/// normalization and nonnegativity; tiny negative noise is clamped to zero.
class Box {
  public:
    Box() = default;
    Box(Scenario sc, std::vector<double> p) : sc_(std::move(sc)), p_(std::move(p)) {
        if (p_.size() != sc_.table_size()) throw validation_error("box: table size mismatch");
        sanitize(tol::kIngest);
    }

    /// Ingest a table whose input-blocks may be off-normalized by solver noise;
    /// each block is rescaled to sum exactly to one.
    static Box renormalized(Scenario sc, std::vector<double> p) {
        if (p.size() != sc.table_size()) throw validation_error("box: table size mismatch");
        const std::size_t nO = sc.joint_outcomes();
        for (std::size_t xi = 0; xi < sc.joint_inputs(); ++xi) {
            double s = 0.0;
            for (std::size_t o = 0; o < nO; ++o) {
                double& v = p[sc.flat(xi, o)];
                if (v < 0.0) v = (v >= -1e-7) ? 0.0 : throw validation_error("box: negative entry");
                s += v;
            }
            if (s <= 0.5) throw validation_error("box: block mass too low to renormalize");
            for (std::size_t o = 0; o < nO; ++o) p[sc.flat(xi, o)] /= s;
        }
        return Box(std::move(sc), std::move(p));
    }

    const Scenario& scenario() const { return sc_; }
    const std::vector<double>& table() const { return p_; }
    std::vector<double>& mutable_table() { return p_; }

    double at(std::size_t input_idx, std::size_t outcome_idx) const {
        return p_[sc_.flat(input_idx, outcome_idx)];
    }
    double at(const std::vector<int>& a, const std::vector<int>& x) const {
        return p_[sc_.flat(sc_.pack_inputs(x), sc_.pack_outcomes(a))];
    }

  private:
    void sanitize(double eps) {
        const std::size_t nO = sc_.joint_outcomes();
        for (std::size_t xi = 0; xi < sc_.joint_inputs(); ++xi) {
            double s = 0.0;
            for (std::size_t o = 0; o < nO; ++o) {
                double& v = p_[sc_.flat(xi, o)];
                if (v < -eps) throw validation_error("box: negative entry");
                if (v < 0.0) v = 0.0;
                s += v;
            }
            if (std::abs(s - 1.0) > eps * static_cast<double>(nO) + eps)
                throw validation_error("box: block not normalized");
        }
    }

    Scenario sc_;
    std::vector<double> p_;
};

/// Marginal over a subset of parties.  Dropped parties are fixed to input 0
/// and summed out, which agrees with every choice of their inputs when the
/// box is no-signalling.
inline Box marginal(const Box& b, const std::vector<int>& keep) {
    const Scenario& sc = b.scenario();
    const int n = sc.parties();
    std::vector<bool> kept(n, false);
    for (int p : keep) {
        if (p < 0 || p >= n) throw validation_error("marginal: bad party");
        if (kept[p]) throw validation_error("marginal: duplicate party");
        kept[p] = true;
    }
    std::vector<int> ins, outs;
    for (int p : keep) { ins.push_back(sc.inputs(p)); outs.push_back(sc.outputs(p)); }
    Scenario msc(ins, outs);
    std::vector<double> table(msc.table_size(), 0.0);
    std::vector<int> x(n, 0), a(n, 0);
    for (std::size_t mx = 0; mx < msc.joint_inputs(); ++mx) {
        auto mxd = msc.unpack_inputs(mx);
        std::fill(x.begin(), x.end(), 0);
        for (std::size_t k = 0; k < keep.size(); ++k) x[keep[k]] = mxd[k];
        const std::size_t xi = sc.pack_inputs(x);
        for (std::size_t o = 0; o < sc.joint_outcomes(); ++o) {
            a = sc.unpack_outcomes(o);
            std::vector<int> ma(keep.size());
            for (std::size_t k = 0; k < keep.size(); ++k) ma[k] = a[keep[k]];
            table[msc.flat(mx, msc.pack_outcomes(ma))] += b.at(xi, o);
        }
    }
    return Box(std::move(msc), std::move(table));
}

/// Condition on one party observing a fixed input/outcome pair, then drop it.
/// Each remaining input block is renormalized by the selected outcome's
/// probability at that block.
inline Box postselect(const Box& b, int party, int input, int outcome) {
    const Scenario& sc = b.scenario();
    const int n = sc.parties();
    if (party < 0 || party >= n) throw validation_error("postselect: bad party");
    if (input < 0 || input >= sc.inputs(party)) throw validation_error("postselect: bad input");
    if (outcome < 0 || outcome >= sc.outputs(party)) throw validation_error("postselect: bad outcome");
    if (n < 2) throw validation_error("postselect: need at least two parties");
    std::vector<int> ins, outs, rest;
    for (int p = 0; p < n; ++p)
        if (p != party) { rest.push_back(p); ins.push_back(sc.inputs(p)); outs.push_back(sc.outputs(p)); }
    Scenario rsc(ins, outs);
    std::vector<double> table(rsc.table_size(), 0.0);
    std::vector<int> x(n, 0), a(n, 0);
    for (std::size_t rx = 0; rx < rsc.joint_inputs(); ++rx) {
        auto rxd = rsc.unpack_inputs(rx);
        for (std::size_t k = 0; k < rest.size(); ++k) x[rest[k]] = rxd[k];
        x[party] = input;
        const std::size_t xi = sc.pack_inputs(x);
        double mass = 0.0;
        for (std::size_t ro = 0; ro < rsc.joint_outcomes(); ++ro) {
            auto rad = rsc.unpack_outcomes(ro);
            for (std::size_t k = 0; k < rest.size(); ++k) a[rest[k]] = rad[k];
            a[party] = outcome;
            const double v = b.at(xi, sc.pack_outcomes(a));
            table[rsc.flat(rx, ro)] = v;
            mass += v;
        }
        if (mass <= tol::kIngest) throw validation_error("postselect: conditioning on zero-probability event");
        for (std::size_t ro = 0; ro < rsc.joint_outcomes(); ++ro) table[rsc.flat(rx, ro)] /= mass;
    }
    return Box(std::move(rsc), std::move(table));
}

/// Reorder parties by a permutation: party p of the result is party perm[p]
/// of the source.
inline Box swap_parties(const Box& b, const std::vector<int>& perm) {
    const Scenario& sc = b.scenario();
    const int n = sc.parties();
    if (static_cast<int>(perm.size()) != n) throw validation_error("swap_parties: bad permutation");
    std::vector<bool> seen(n, false);
    std::vector<int> ins(n), outs(n);
    for (int p = 0; p < n; ++p) {
        if (perm[p] < 0 || perm[p] >= n || seen[perm[p]]) throw validation_error("swap_parties: bad permutation");
        seen[perm[p]] = true;
        ins[p] = sc.inputs(perm[p]);
        outs[p] = sc.outputs(perm[p]);
    }
    Scenario nsc(ins, outs);
    std::vector<double> table(nsc.table_size());
    std::vector<int> x(n), a(n);
    for (std::size_t nx = 0; nx < nsc.joint_inputs(); ++nx) {
        auto nxd = nsc.unpack_inputs(nx);
        for (int p = 0; p < n; ++p) x[perm[p]] = nxd[p];
        const std::size_t xi = sc.pack_inputs(x);
        for (std::size_t no = 0; no < nsc.joint_outcomes(); ++no) {
            auto nad = nsc.unpack_outcomes(no);
            for (int p = 0; p < n; ++p) a[perm[p]] = nad[p];
            table[nsc.flat(nx, no)] = b.at(xi, sc.pack_outcomes(a));
        }
    }
    return Box(std::move(nsc), std::move(table));
}

/// Apply per-party input and output permutations.  Entry (a|x) of the result
/// reads the source at inputs in_perm[p][x_p] and outcomes out_perm[p][a_p].
inline Box relabel(const Box& b, const std::vector<std::vector<int>>& in_perm,
                   const std::vector<std::vector<int>>& out_perm) {
    const Scenario& sc = b.scenario();
    const int n = sc.parties();
    if (static_cast<int>(in_perm.size()) != n || static_cast<int>(out_perm.size()) != n)
        throw validation_error("relabel: need one permutation per party");
    auto check = [](const std::vector<int>& perm, int arity, const char* what) {
        if (static_cast<int>(perm.size()) != arity) throw validation_error(std::string("relabel: bad ") + what);
        std::vector<bool> seen(arity, false);
        for (int v : perm) {
            if (v < 0 || v >= arity || seen[v]) throw validation_error(std::string("relabel: bad ") + what);
            seen[v] = true;
        }
    };
    for (int p = 0; p < n; ++p) {
        check(in_perm[p], sc.inputs(p), "input permutation");
        check(out_perm[p], sc.outputs(p), "output permutation");
    }
    std::vector<double> table(sc.table_size());
    std::vector<int> x(n), a(n);
    for (std::size_t xi = 0; xi < sc.joint_inputs(); ++xi) {
        auto xd = sc.unpack_inputs(xi);
        for (int p = 0; p < n; ++p) x[p] = in_perm[p][xd[p]];
        const std::size_t sx = sc.pack_inputs(x);
        for (std::size_t o = 0; o < sc.joint_outcomes(); ++o) {
            auto ad = sc.unpack_outcomes(o);
            for (int p = 0; p < n; ++p) a[p] = out_perm[p][ad[p]];
            table[sc.flat(xi, o)] = b.at(sx, sc.pack_outcomes(a));
        }
    }
    return Box(sc, std::move(table));
}

/// For each party, the largest change of the other parties' outcome marginal
/// produced by switching that party's input (all other inputs held fixed).
inline NoSignallingReport check_no_signalling(const Box& b) {
    const Scenario& sc = b.scenario();
    const int n = sc.parties();
    NoSignallingReport rep;
    rep.party_residual.assign(n, 0.0);
    std::vector<int> x(n), a(n);
    for (int p = 0; p < n; ++p) {
        std::vector<int> rest;
        for (int q = 0; q < n; ++q)
            if (q != p) rest.push_back(q);
        std::vector<int> rIns, rOuts;
        for (int q : rest) { rIns.push_back(sc.inputs(q)); rOuts.push_back(sc.outputs(q)); }
        Scenario rsc(rIns.empty() ? std::vector<int>{1} : rIns, rOuts.empty() ? std::vector<int>{2} : rOuts);
        if (rest.empty()) continue;
        for (std::size_t rx = 0; rx < rsc.joint_inputs(); ++rx) {
            auto rxd = rsc.unpack_inputs(rx);
            for (std::size_t k = 0; k < rest.size(); ++k) x[rest[k]] = rxd[k];
            // reference marginal at input 0, then compare other inputs
            std::vector<double> ref;
            for (int xp = 0; xp < sc.inputs(p); ++xp) {
                x[p] = xp;
                const std::size_t xi = sc.pack_inputs(x);
                std::vector<double> marg(rsc.joint_outcomes(), 0.0);
                for (std::size_t o = 0; o < sc.joint_outcomes(); ++o) {
                    a = sc.unpack_outcomes(o);
                    std::vector<int> rad(rest.size());
                    for (std::size_t k = 0; k < rest.size(); ++k) rad[k] = a[rest[k]];
                    marg[rsc.pack_outcomes(rad)] += b.at(xi, o);
                }
                if (xp == 0) {
                    ref = marg;
                } else {
                    for (std::size_t i = 0; i < marg.size(); ++i)
                        rep.party_residual[p] = std::max(rep.party_residual[p], std::abs(marg[i] - ref[i]));
                }
            }
        }
    }
    for (double r : rep.party_residual) rep.max_residual = std::max(rep.max_residual, r);
    return rep;
}

/// Which effective party ends up holding each subsystem of each source box.
/// assignment[i][s] is the effective party receiving slot s of box i.
struct PartyAssignment {
    std::vector<std::vector<int>> effective_party;
};

/// Tensor several boxes and regroup their subsystems into effective parties.
/// An effective party holding several slots gets product input/output
/// alphabets, ordered by (box index, slot index).
inline Box tensor_and_assign(const std::vector<Box>& boxes, const PartyAssignment& pa) {
    if (boxes.empty()) throw validation_error("tensor: no boxes");
    if (pa.effective_party.size() != boxes.size()) throw validation_error("tensor: assignment shape");
    int nEff = 0;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (static_cast<int>(pa.effective_party[i].size()) != boxes[i].scenario().parties())
            throw validation_error("tensor: assignment shape");
        for (int e : pa.effective_party[i]) {
            if (e < 0) throw validation_error("tensor: bad effective party");
            nEff = std::max(nEff, e + 1);
        }
    }
    // slots per effective party, ordered by (box, slot)
    struct Slot { int box, party; };
    std::vector<std::vector<Slot>> slots(nEff);
    for (std::size_t i = 0; i < boxes.size(); ++i)
        for (int s = 0; s < boxes[i].scenario().parties(); ++s)
            slots[pa.effective_party[i][s]].push_back({static_cast<int>(i), s});
    std::vector<int> ins(nEff), outs(nEff);
    for (int e = 0; e < nEff; ++e) {
        if (slots[e].empty()) throw validation_error("tensor: effective party with no slots");
        std::size_t mi = 1, mo = 1;
        for (const Slot& s : slots[e]) {
            mi *= static_cast<std::size_t>(boxes[s.box].scenario().inputs(s.party));
            mo *= static_cast<std::size_t>(boxes[s.box].scenario().outputs(s.party));
        }
        if (mi > 1024 || mo > 1024) throw capacity_error("tensor: effective alphabet too large");
        ins[e] = static_cast<int>(mi);
        outs[e] = static_cast<int>(mo);
    }
    Scenario esc(ins, outs);
    std::vector<double> table(esc.table_size());
    // per-box input/outcome scratch
    std::vector<std::vector<int>> bx(boxes.size()), ba(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        bx[i].assign(boxes[i].scenario().parties(), 0);
        ba[i].assign(boxes[i].scenario().parties(), 0);
    }
    for (std::size_t ex = 0; ex < esc.joint_inputs(); ++ex) {
        auto exd = esc.unpack_inputs(ex);
        for (int e = 0; e < nEff; ++e) {
            std::size_t rem = static_cast<std::size_t>(exd[e]);
            for (std::size_t k = slots[e].size(); k-- > 0;) {
                const Slot& s = slots[e][k];
                const int arity = boxes[s.box].scenario().inputs(s.party);
                bx[s.box][s.party] = static_cast<int>(rem % arity);
                rem /= arity;
            }
        }
        std::vector<std::size_t> xi(boxes.size());
        for (std::size_t i = 0; i < boxes.size(); ++i) xi[i] = boxes[i].scenario().pack_inputs(bx[i]);
        for (std::size_t eo = 0; eo < esc.joint_outcomes(); ++eo) {
            auto eod = esc.unpack_outcomes(eo);
            for (int e = 0; e < nEff; ++e) {
                std::size_t rem = static_cast<std::size_t>(eod[e]);
                for (std::size_t k = slots[e].size(); k-- > 0;) {
                    const Slot& s = slots[e][k];
                    const int arity = boxes[s.box].scenario().outputs(s.party);
                    ba[s.box][s.party] = static_cast<int>(rem % arity);
                    rem /= arity;
                }
            }
            double v = 1.0;
            for (std::size_t i = 0; i < boxes.size(); ++i)
                v *= boxes[i].at(xi[i], boxes[i].scenario().pack_outcomes(ba[i]));
            table[esc.flat(ex, eo)] = v;
        }
    }
    return Box(std::move(esc), std::move(table));
}

} // namespace zoo
