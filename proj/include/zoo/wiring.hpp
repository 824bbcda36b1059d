#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "boxes.hpp"
#include "functional.hpp"

namespace zoo {

/// Node of a deterministic adaptive wiring tree.  Internal nodes measure one
/// yet-unmeasured slot with a fixed input and branch on its outcome; leaves
/// carry the effective output.  Slot indices refer to the party's local slot
/// list (ordered by source box, then source party).
struct CombNode {
    int box = -1;    // slot measured here (internal nodes)
    int input = -1;  // input fed to that slot
    int output = -1; // effective output (leaves)
    std::vector<CombNode> children;
    bool is_leaf() const { return children.empty(); }

    static CombNode leaf(int out) {
        CombNode n;
        n.output = out;
        return n;
    }
    static CombNode measure(int slot, int in, std::vector<CombNode> ch) {
        CombNode n;
        n.box = slot;
        n.input = in;
        n.children = std::move(ch);
        return n;
    }
};

/// One party's wiring strategy: a decision tree per effective input.
/// Incomplete trees (paths that skip slots) are interpreted as measuring the
/// skipped slots with input 0 and ignoring the results.
struct Comb {
    std::vector<int> box_inputs;  // input arity per slot
    std::vector<int> box_outputs; // outcome arity per slot
    int effective_outputs = 0;
    std::vector<CombNode> trees; // one per effective input

    int n_boxes() const { return static_cast<int>(box_inputs.size()); }
    int effective_inputs() const { return static_cast<int>(trees.size()); }

    /// Measure a single slot with the effective input and forward its outcome.
    static Comb identity(int inputs, int outputs) {
        Comb c;
        c.box_inputs = {inputs};
        c.box_outputs = {outputs};
        c.effective_outputs = outputs;
        for (int x = 0; x < inputs; ++x) {
            std::vector<CombNode> leaves;
            for (int a = 0; a < outputs; ++a) leaves.push_back(CombNode::leaf(a));
            c.trees.push_back(CombNode::measure(0, x, std::move(leaves)));
        }
        return c;
    }
};

namespace detail {

inline void validate_node(const CombNode& n, const Comb& c, std::vector<bool>& used) {
    if (n.is_leaf()) {
        if (n.output < 0 || n.output >= c.effective_outputs)
            throw validation_error("comb: leaf output out of range");
        return;
    }
    if (n.box < 0 || n.box >= c.n_boxes()) throw validation_error("comb: bad slot index");
    if (used[n.box]) throw validation_error("comb: slot re-measured along a path");
    if (n.input < 0 || n.input >= c.box_inputs[n.box]) throw validation_error("comb: bad slot input");
    if (static_cast<int>(n.children.size()) != c.box_outputs[n.box])
        throw validation_error("comb: child count must match slot outcomes");
    used[n.box] = true;
    for (const CombNode& ch : n.children) validate_node(ch, c, used);
    used[n.box] = false;
}

} // namespace detail

inline void validate(const Comb& c) {
    if (c.trees.empty()) throw validation_error("comb: no effective inputs");
    if (c.effective_outputs < 1) throw validation_error("comb: no effective outputs");
    std::vector<bool> used(c.n_boxes(), false);
    for (const CombNode& t : c.trees) detail::validate_node(t, c, used);
}

/// The classical channel induced by one effective input's tree: for each
/// joint slot-outcome vector, the slot inputs chosen along the way (skipped
/// slots get input 0) and the effective output.
struct CombChannel {
    std::vector<int> input_choice; // packed slot inputs, indexed by packed joint outcome
    std::vector<int> output;       // effective output, same indexing

    bool operator==(const CombChannel& o) const {
        return input_choice == o.input_choice && output == o.output;
    }
    bool operator<(const CombChannel& o) const {
        if (input_choice != o.input_choice) return input_choice < o.input_choice;
        return output < o.output;
    }
};

namespace detail {

inline std::size_t pack_digits(const std::vector<int>& d, const std::vector<int>& radix) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < d.size(); ++i)
        idx = idx * static_cast<std::size_t>(radix[i]) + static_cast<std::size_t>(d[i]);
    return idx;
}

inline std::vector<int> unpack_digits(std::size_t idx, const std::vector<int>& radix) {
    std::vector<int> d(radix.size());
    for (std::size_t i = radix.size(); i-- > 0;) {
        d[i] = static_cast<int>(idx % static_cast<std::size_t>(radix[i]));
        idx /= static_cast<std::size_t>(radix[i]);
    }
    return d;
}

} // namespace detail

/// Flatten one tree into its channel table by walking it once per joint
/// outcome vector.
inline CombChannel comb_channel(const Comb& c, int effective_input) {
    const std::vector<int>& outs = c.box_outputs;
    std::size_t total = 1;
    for (int d : outs) total *= static_cast<std::size_t>(d);
    CombChannel ch;
    ch.input_choice.resize(total);
    ch.output.resize(total);
    for (std::size_t oi = 0; oi < total; ++oi) {
        auto a = detail::unpack_digits(oi, outs);
        std::vector<int> in(c.n_boxes(), 0); // skipped slots default to input 0
        const CombNode* node = &c.trees[effective_input];
        while (!node->is_leaf()) {
            in[node->box] = node->input;
            node = &node->children[a[node->box]];
        }
        ch.input_choice[oi] = static_cast<int>(detail::pack_digits(in, c.box_inputs));
        ch.output[oi] = node->output;
    }
    return ch;
}

/// A collection of source boxes, their distribution among effective parties,
/// and one comb per effective party.
struct WiredBoxSpec {
    std::vector<Box> boxes;
    PartyAssignment assignment;
    std::vector<Comb> combs; // indexed by effective party
};

/// Contract the combs against the tensored sources: the effective behaviour
/// P(A..|X..) sums the product distribution over every joint source outcome,
/// with each party's slot inputs dictated by its channel table.
inline Box apply_wiring(const WiredBoxSpec& spec) {
    // group slots by effective party exactly as the combs see them
    Box grouped = tensor_and_assign(spec.boxes, spec.assignment);
    const Scenario& gsc = grouped.scenario();
    const int nEff = gsc.parties();
    if (static_cast<int>(spec.combs.size()) != nEff)
        throw validation_error("apply_wiring: need one comb per effective party");
    // slot arities per effective party, ordered by (box, slot)
    std::vector<std::vector<int>> slotIns(nEff), slotOuts(nEff);
    for (std::size_t i = 0; i < spec.boxes.size(); ++i)
        for (int s = 0; s < spec.boxes[i].scenario().parties(); ++s) {
            const int e = spec.assignment.effective_party[i][s];
            slotIns[e].push_back(spec.boxes[i].scenario().inputs(s));
            slotOuts[e].push_back(spec.boxes[i].scenario().outputs(s));
        }
    std::vector<std::vector<CombChannel>> channels(nEff);
    for (int e = 0; e < nEff; ++e) {
        const Comb& c = spec.combs[e];
        if (c.box_inputs != slotIns[e] || c.box_outputs != slotOuts[e])
            throw validation_error("apply_wiring: comb arities do not match assigned slots");
        validate(c);
        for (int X = 0; X < c.effective_inputs(); ++X) channels[e].push_back(comb_channel(c, X));
    }
    std::vector<int> effIns(nEff), effOuts(nEff);
    for (int e = 0; e < nEff; ++e) {
        effIns[e] = spec.combs[e].effective_inputs();
        effOuts[e] = spec.combs[e].effective_outputs;
    }
    Scenario esc(effIns, effOuts);
    std::vector<double> table(esc.table_size(), 0.0);
    std::vector<int> gin(nEff), gout(nEff), eout(nEff);
    for (std::size_t ex = 0; ex < esc.joint_inputs(); ++ex) {
        auto exd = esc.unpack_inputs(ex);
        for (std::size_t go = 0; go < gsc.joint_outcomes(); ++go) {
            auto god = gsc.unpack_outcomes(go);
            for (int e = 0; e < nEff; ++e) {
                const CombChannel& ch = channels[e][exd[e]];
                gin[e] = ch.input_choice[god[e]];
                eout[e] = ch.output[god[e]];
            }
            table[esc.flat(ex, esc.pack_outcomes(eout))] +=
                grouped.at(gsc.pack_inputs(gin), go);
        }
    }
    return Box(std::move(esc), std::move(table));
}

/// All complete deterministic wiring trees for one effective input,
/// deduplicated by channel; each channel keeps the first tree producing it
/// (enumeration order is deterministic).
struct ChannelSet {
    std::vector<CombChannel> channels; // sorted by channel table
    std::vector<CombNode> trees;       // representative per channel
};

namespace detail {

// enumerate complete trees over the given unused slots
inline void enumerate_trees(const std::vector<int>& ins, const std::vector<int>& outs,
                            int effective_outputs, std::vector<bool>& used, int remaining,
                            const std::function<void(const CombNode&)>& emit_leafless,
                            std::vector<CombNode>* scratch = nullptr) {
    (void)scratch;
    const int n = static_cast<int>(ins.size());
    if (remaining == 0) {
        for (int o = 0; o < effective_outputs; ++o) emit_leafless(CombNode::leaf(o));
        return;
    }
    for (int s = 0; s < n; ++s) {
        if (used[s]) continue;
        used[s] = true;
        for (int i = 0; i < ins[s]; ++i) {
            // recursively enumerate each child branch; combine via odometer
            std::vector<std::vector<CombNode>> branch(outs[s]);
            for (int b = 0; b < outs[s]; ++b)
                enumerate_trees(ins, outs, effective_outputs, used, remaining - 1,
                                [&branch, b](const CombNode& t) { branch[b].push_back(t); });
            std::vector<std::size_t> pick(outs[s], 0);
            while (true) {
                std::vector<CombNode> ch;
                for (int b = 0; b < outs[s]; ++b) ch.push_back(branch[b][pick[b]]);
                emit_leafless(CombNode::measure(s, i, std::move(ch)));
                int carry = outs[s] - 1;
                while (carry >= 0 && ++pick[carry] == branch[carry].size()) pick[carry--] = 0;
                if (carry < 0) break;
            }
        }
        used[s] = false;
    }
}

} // namespace detail

/// Channel-deduplicated complete trees for a single effective input.
inline ChannelSet enumerate_channels(const std::vector<int>& box_inputs,
                                     const std::vector<int>& box_outputs, int effective_outputs) {
    const int n = static_cast<int>(box_inputs.size());
    if (n > 3) throw capacity_error("enumerate: more than 3 boxes");
    // rough raw count guard
    double raw = 1.0;
    for (int s = 0; s < n; ++s) raw *= box_inputs[s] * std::pow((double)effective_outputs, box_outputs[s]);
    if (raw > 5e7) throw capacity_error("enumerate: raw tree count too large");
    Comb probe;
    probe.box_inputs = box_inputs;
    probe.box_outputs = box_outputs;
    probe.effective_outputs = effective_outputs;
    probe.trees.resize(1);
    std::map<CombChannel, CombNode> seen;
    std::vector<bool> used(n, false);
    detail::enumerate_trees(box_inputs, box_outputs, effective_outputs, used, n,
                            [&](const CombNode& t) {
                                probe.trees[0] = t;
                                CombChannel ch = comb_channel(probe, 0);
                                seen.emplace(std::move(ch), t);
                            });
    ChannelSet cs;
    for (auto& [ch, tree] : seen) {
        cs.channels.push_back(ch);
        cs.trees.push_back(tree);
    }
    return cs;
}

/// The canonical comb family over several effective inputs: the Cartesian
/// product of per-input channel sets, indexable without materialization.
struct CombSet {
    std::vector<int> box_inputs, box_outputs;
    int effective_outputs = 0;
    std::vector<ChannelSet> per_input; // one ChannelSet per effective input
    std::size_t count() const {
        std::size_t c = 1;
        for (const auto& s : per_input) c *= s.channels.size();
        return c;
    }
    Comb comb(std::size_t index) const {
        Comb c;
        c.box_inputs = box_inputs;
        c.box_outputs = box_outputs;
        c.effective_outputs = effective_outputs;
        c.trees.resize(per_input.size());
        for (std::size_t x = per_input.size(); x-- > 0;) {
            const std::size_t m = per_input[x].channels.size();
            c.trees[x] = per_input[x].trees[index % m];
            index /= m;
        }
        return c;
    }
};

inline CombSet enumerate_combs(int n_boxes, const std::vector<int>& box_inputs,
                               const std::vector<int>& box_outputs, int effective_inputs,
                               int effective_outputs) {
    if (n_boxes != static_cast<int>(box_inputs.size()) ||
        n_boxes != static_cast<int>(box_outputs.size()))
        throw validation_error("enumerate_combs: arity lists must have n_boxes entries");
    if (n_boxes > 3) throw capacity_error("enumerate_combs: more than 3 boxes");
    CombSet cs;
    cs.box_inputs = box_inputs;
    cs.box_outputs = box_outputs;
    cs.effective_outputs = effective_outputs;
    ChannelSet one = enumerate_channels(box_inputs, box_outputs, effective_outputs);
    cs.per_input.assign(effective_inputs, one);
    return cs;
}

/// Uniformly random complete comb (for property tests).
inline Comb random_comb(std::mt19937_64& rng, const std::vector<int>& box_inputs,
                        const std::vector<int>& box_outputs, int effective_inputs,
                        int effective_outputs) {
    const int n = static_cast<int>(box_inputs.size());
    Comb c;
    c.box_inputs = box_inputs;
    c.box_outputs = box_outputs;
    c.effective_outputs = effective_outputs;
    std::function<CombNode(std::vector<bool>&)> gen = [&](std::vector<bool>& used) -> CombNode {
        std::vector<int> free;
        for (int s = 0; s < n; ++s)
            if (!used[s]) free.push_back(s);
        if (free.empty()) {
            return CombNode::leaf(static_cast<int>(rng() % effective_outputs));
        }
        const int s = free[rng() % free.size()];
        used[s] = true;
        std::vector<CombNode> ch;
        for (int b = 0; b < box_outputs[s]; ++b) ch.push_back(gen(used));
        used[s] = false;
        return CombNode::measure(s, static_cast<int>(rng() % box_inputs[s]), std::move(ch));
    };
    for (int x = 0; x < effective_inputs; ++x) {
        std::vector<bool> used(n, false);
        c.trees.push_back(gen(used));
    }
    return c;
}

/// Result of the exhaustive two-copy wiring search.
struct DistillResult {
    double best_value = 0.0;
    Comb alice, bob;
};

/// Exact maximum of a 2222 functional over all deterministic wiring pairs of
/// two 2222 boxes.  Alice and Bob each hold one slot of both copies; the
/// value decomposes per effective input pair, so the search contracts
/// per-channel tensors once and scans the product space.
inline DistillResult distill_search(const Box& b1, const Box& b2, const BellFunctional& f) {
    Scenario s2222 = Scenario::uniform(2, 2, 2);
    if (b1.scenario() != s2222 || b2.scenario() != s2222 || f.scenario != s2222)
        throw validation_error("distill_search: 2222 boxes and functional required");
    ChannelSet cs = enumerate_channels({2, 2}, {2, 2}, 2);
    const std::size_t C = cs.channels.size();
    const double* t1 = b1.table().data(); // flat (x1*2+y1)*4 + a1*2+b1
    const double* t2 = b2.table().data();
    const double* fc = f.coeffs.data();
    // v[XY](s,t) = sum over joint outcomes of coeff * P1 * P2
    std::vector<std::vector<std::vector<double>>> v(4);
    for (auto& m : v) m.assign(C, std::vector<double>(C, 0.0));
    for (std::size_t s = 0; s < C; ++s) {
        const CombChannel& ca = cs.channels[s];
        for (std::size_t t = 0; t < C; ++t) {
            const CombChannel& cb = cs.channels[t];
            double acc[4] = {0, 0, 0, 0};
            for (int ai = 0; ai < 4; ++ai) { // packed (a1,a2)
                const int a1 = ai >> 1, a2 = ai & 1;
                const int x1 = ca.input_choice[ai] >> 1, x2 = ca.input_choice[ai] & 1;
                const int A = ca.output[ai];
                for (int bi = 0; bi < 4; ++bi) {
                    const int bb1 = bi >> 1, bb2 = bi & 1;
                    const int y1 = cb.input_choice[bi] >> 1, y2 = cb.input_choice[bi] & 1;
                    const int B = cb.output[bi];
                    const double p = t1[(x1 * 2 + y1) * 4 + a1 * 2 + bb1] *
                                     t2[(x2 * 2 + y2) * 4 + a2 * 2 + bb2];
                    const int AB = A * 2 + B;
                    for (int XY = 0; XY < 4; ++XY) acc[XY] += fc[XY * 4 + AB] * p;
                }
            }
            for (int XY = 0; XY < 4; ++XY) v[XY][s][t] = acc[XY];
        }
    }
    // best over Alice channel pairs with inner Bob maximization
    double best = -std::numeric_limits<double>::infinity();
    std::size_t bestA0 = 0, bestA1 = 0, bestB0 = 0, bestB1 = 0;
    for (std::size_t a0 = 0; a0 < C; ++a0)
        for (std::size_t a1 = 0; a1 < C; ++a1) {
            double m0 = -std::numeric_limits<double>::infinity(), m1 = m0;
            std::size_t arg0 = 0, arg1 = 0;
            for (std::size_t t = 0; t < C; ++t) {
                const double w0 = v[0][a0][t] + v[2][a1][t]; // Y=0 blocks: XY=00 and 10
                const double w1 = v[1][a0][t] + v[3][a1][t]; // Y=1 blocks: XY=01 and 11
                if (w0 > m0) { m0 = w0; arg0 = t; }
                if (w1 > m1) { m1 = w1; arg1 = t; }
            }
            if (m0 + m1 > best) {
                best = m0 + m1;
                bestA0 = a0; bestA1 = a1; bestB0 = arg0; bestB1 = arg1;
            }
        }
    DistillResult r;
    r.best_value = best;
    r.alice.box_inputs = r.bob.box_inputs = {2, 2};
    r.alice.box_outputs = r.bob.box_outputs = {2, 2};
    r.alice.effective_outputs = r.bob.effective_outputs = 2;
    r.alice.trees = {cs.trees[bestA0], cs.trees[bestA1]};
    r.bob.trees = {cs.trees[bestB0], cs.trees[bestB1]};
    return r;
}

/// Each party probes the block selected by its own input and reports that
/// outcome: diagonal blocks reproduce the factors, cross blocks are products
/// of the factors' marginals.
inline Box direct_sum_box(const Box& p1, const Box& p2) {
    const Scenario &s1 = p1.scenario(), &s2 = p2.scenario();
    if (s1.parties() != 2 || s2.parties() != 2)
        throw validation_error("direct_sum: bipartite boxes required");
    for (int p = 0; p < 2; ++p)
        if (s1.outputs(p) != s2.outputs(p)) throw validation_error("direct_sum: output arities must agree");
    const int mA1 = s1.inputs(0), mA2 = s2.inputs(0), mB1 = s1.inputs(1), mB2 = s2.inputs(1);
    const int dA = s1.outputs(0), dB = s1.outputs(1);
    Scenario sc({mA1 + mA2, mB1 + mB2}, {dA, dB});
    auto margA = [&](const Box& b, int a, int x) {
        double v = 0.0;
        for (int bb = 0; bb < b.scenario().outputs(1); ++bb) v += b.at({a, bb}, {x, 0});
        return v;
    };
    auto margB = [&](const Box& b, int bb, int y) {
        double v = 0.0;
        for (int a = 0; a < b.scenario().outputs(0); ++a) v += b.at({a, bb}, {0, y});
        return v;
    };
    std::vector<double> table(sc.table_size());
    for (int x = 0; x < mA1 + mA2; ++x)
        for (int y = 0; y < mB1 + mB2; ++y) {
            const bool x1 = x < mA1, y1 = y < mB1;
            for (int a = 0; a < dA; ++a)
                for (int b = 0; b < dB; ++b) {
                    double v;
                    if (x1 && y1) v = p1.at({a, b}, {x, y});
                    else if (!x1 && !y1) v = p2.at({a, b}, {x - mA1, y - mB1});
                    else if (x1 && !y1) v = margA(p1, a, x) * margB(p2, b, y - mB1);
                    else v = margA(p2, a, x - mA1) * margB(p1, b, y);
                    table[sc.flat(sc.pack_inputs({x, y}), sc.pack_outcomes({a, b}))] = v;
                }
        }
    return Box(std::move(sc), std::move(table));
}

/// The wiring realizing direct_sum_box through the general engine: each
/// party holds one slot of each box and probes the slot its input selects
/// (the other slot is left to the dummy input-0 completion).
inline Comb direct_sum_comb(int m1, int m2, int d) {
    Comb c;
    c.box_inputs = {m1, m2};
    c.box_outputs = {d, d};
    c.effective_outputs = d;
    for (int x = 0; x < m1 + m2; ++x) {
        std::vector<CombNode> leaves;
        for (int a = 0; a < d; ++a) leaves.push_back(CombNode::leaf(a));
        if (x < m1)
            c.trees.push_back(CombNode::measure(0, x, std::move(leaves)));
        else
            c.trees.push_back(CombNode::measure(1, x - m1, std::move(leaves)));
    }
    return c;
}

} // namespace zoo
