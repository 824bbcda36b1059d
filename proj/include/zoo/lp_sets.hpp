#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "boxes.hpp"
#include "functional.hpp"
#include "lp.hpp"

namespace zoo {
namespace detail {

/// All response functions mapping `inputs` values to `outputs` values,
/// enumerated with input 0 most significant (deterministic order).
inline std::vector<std::vector<int>> all_responses(int inputs, int outputs) {
    std::size_t count = 1;
    for (int i = 0; i < inputs; ++i) {
        count *= static_cast<std::size_t>(outputs);
        if (count > (std::size_t(1) << 40)) throw capacity_error("response table too large");
    }
    std::vector<std::vector<int>> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        std::vector<int> r(inputs);
        std::size_t rem = k;
        for (int i = inputs; i-- > 0;) {
            r[i] = static_cast<int>(rem % outputs);
            rem /= static_cast<std::size_t>(outputs);
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline std::size_t local_vertex_count(const Scenario& sc) {
    std::size_t count = 1;
    for (int p = 0; p < sc.parties(); ++p) {
        for (int x = 0; x < sc.inputs(p); ++x) {
            std::size_t w = count * static_cast<std::size_t>(sc.outputs(p));
            if (w / sc.outputs(p) != count) return std::size_t(-1);
            count = w;
        }
        if (count > (std::size_t(1) << 42)) return std::size_t(-1);
    }
    return count;
}

/// Sparse LP assembly with per-row deduplication.
struct LpBuilder {
    int cols = 0;
    std::vector<std::map<int, double>> rows;
    std::vector<double> rhs;
    std::set<std::string> seen;

    int add_cols(int k) {
        int base = cols;
        cols += k;
        return base;
    }
    void add_row(const std::map<int, double>& r, double b) {
        std::string key;
        key.reserve(r.size() * 12 + 12);
        char buf[32];
        for (const auto& [c, v] : r) {
            if (std::abs(v) < 1e-13) continue;
            std::snprintf(buf, sizeof buf, "%d:%.0f;", c, v * 1e9);
            key += buf;
        }
        std::snprintf(buf, sizeof buf, "=%.0f", b * 1e9);
        key += buf;
        if (!seen.insert(key).second) return;
        rows.push_back(r);
        rhs.push_back(b);
    }
    LpProblem build(const std::vector<double>& objective) const {
        LpProblem p = LpProblem::make(static_cast<int>(rows.size()), cols);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (const auto& [c, v] : rows[i]) p.eq(static_cast<int>(i), c) = v;
            p.rhs(static_cast<int>(i)) = rhs[i];
        }
        for (std::size_t j = 0; j < objective.size() && j < static_cast<std::size_t>(cols); ++j)
            p.objective(static_cast<int>(j)) = objective[j];
        return p;
    }
};

/// Emit, for every k-partite table over `sc`, the no-signalling equalities:
/// each party's input leaves the other parties' outcome marginal unchanged.
/// Rows are (flat index, coefficient) lists; rhs is zero.
template <class Emit>
inline void for_each_ns_row(const Scenario& sc, Emit&& emit) {
    const int n = sc.parties();
    for (int p = 0; p < n; ++p) {
        std::vector<int> other_out;
        for (int q = 0; q < n; ++q)
            if (q != p) other_out.push_back(sc.outputs(q));
        std::size_t combos = 1;
        for (int d : other_out) combos *= static_cast<std::size_t>(d);
        for (std::size_t J = 0; J < sc.joint_inputs(); ++J) {
            std::vector<int> x = sc.unpack_inputs(J);
            if (x[p] == 0) continue;
            std::vector<int> x0 = x;
            x0[p] = 0;
            const std::size_t J0 = sc.pack_inputs(x0);
            for (std::size_t oc = 0; oc < combos; ++oc) {
                std::vector<int> a(n, 0);
                std::size_t rem = oc;
                for (int q = n; q-- > 0;) {
                    if (q == p) continue;
                    a[q] = static_cast<int>(rem % sc.outputs(q));
                    rem /= static_cast<std::size_t>(sc.outputs(q));
                }
                std::vector<std::pair<std::size_t, double>> row;
                for (int ap = 0; ap < sc.outputs(p); ++ap) {
                    a[p] = ap;
                    const std::size_t o = sc.pack_outcomes(a);
                    row.emplace_back(sc.flat(J, o), 1.0);
                    row.emplace_back(sc.flat(J0, o), -1.0);
                }
                emit(row);
            }
        }
    }
}

/// Orbit structure of table entries under joint relabelling of interchangeable
/// slots: within each group, the (input, outcome) pairs may be permuted freely.
struct SymmetricOrbits {
    std::vector<int> entry_orbit; // flat entry -> orbit id
    int count = 0;
};

inline SymmetricOrbits make_orbits(const Scenario& ext, const std::vector<std::vector<int>>& groups) {
    for (const auto& g : groups)
        for (int s : g)
            if (ext.inputs(s) != ext.inputs(g[0]) || ext.outputs(s) != ext.outputs(g[0]))
                throw validation_error("orbits: interchangeable slots must share arities");
    SymmetricOrbits so;
    so.entry_orbit.assign(ext.table_size(), -1);
    std::map<std::size_t, int> ids;
    for (std::size_t J = 0; J < ext.joint_inputs(); ++J) {
        std::vector<int> x = ext.unpack_inputs(J);
        for (std::size_t O = 0; O < ext.joint_outcomes(); ++O) {
            std::vector<int> a = ext.unpack_outcomes(O);
            std::vector<int> cx = x, ca = a;
            for (const auto& g : groups) {
                std::vector<std::pair<int, int>> pairs;
                for (int s : g) pairs.emplace_back(x[s], a[s]);
                std::sort(pairs.begin(), pairs.end());
                for (std::size_t k = 0; k < g.size(); ++k) {
                    cx[g[k]] = pairs[k].first;
                    ca[g[k]] = pairs[k].second;
                }
            }
            const std::size_t canon = ext.flat(ext.pack_inputs(cx), ext.pack_outcomes(ca));
            auto it = ids.find(canon);
            if (it == ids.end()) it = ids.emplace(canon, static_cast<int>(ids.size())).first;
            so.entry_orbit[ext.flat(J, O)] = it->second;
        }
    }
    so.count = static_cast<int>(ids.size());
    return so;
}

/// Append the defining rows of a symmetrized no-signalling extension tensor
/// (normalization + no-signalling), expressed in its orbit variables.
inline void add_extension_rows(LpBuilder& lp, const Scenario& ext, const SymmetricOrbits& so,
                               int col_base) {
    auto project = [&](const std::vector<std::pair<std::size_t, double>>& row, double b) {
        std::map<int, double> r;
        for (const auto& [e, c] : row) r[col_base + so.entry_orbit[e]] += c;
        lp.add_row(r, b);
    };
    for (std::size_t J = 0; J < ext.joint_inputs(); ++J) {
        std::vector<std::pair<std::size_t, double>> row;
        for (std::size_t O = 0; O < ext.joint_outcomes(); ++O)
            row.emplace_back(ext.flat(J, O), 1.0);
        project(row, 1.0);
    }
    for_each_ns_row(ext, [&](const std::vector<std::pair<std::size_t, double>>& row) {
        project(row, 0.0);
    });
}

inline std::vector<double> clamped_slice(const std::vector<double>& v, std::size_t off,
                                         std::size_t len) {
    std::vector<double> out(v.begin() + static_cast<long>(off),
                            v.begin() + static_cast<long>(off + len));
    for (double& x : out) x = std::max(x, 0.0);
    return out;
}

} // namespace detail

inline double local_bell_max(const BellFunctional& f);

// ---------------------------------------------------------------------------
// local polytope

/// Convex decomposition of a box over deterministic vertices.  `responses[k]`
/// holds, per party, the response function of weight `weights[k]`.
struct LocalDecomposition {
    Scenario scenario;
    std::vector<std::vector<std::vector<int>>> responses;
    std::vector<double> weights;

    Box reconstruct() const {
        std::vector<double> t(scenario.table_size(), 0.0);
        for (std::size_t k = 0; k < weights.size(); ++k) {
            Box d = deterministic_box(scenario, responses[k]);
            for (std::size_t e = 0; e < t.size(); ++e) t[e] += weights[k] * d.table()[e];
        }
        return Box::renormalized(scenario, t);
    }
};

struct LocalMembership {
    bool feasible = false;
    LocalDecomposition decomposition; // when feasible
    BellFunctional separator;         // when infeasible: value on box > local max
    SolveReport report;
};

inline LocalMembership local_membership(const Box& b) {
    const Scenario& sc = b.scenario();
    const std::size_t nv = detail::local_vertex_count(sc);
    if (nv == std::size_t(-1) || nv > 1000000) throw capacity_error("local_membership: too many vertices");
    std::vector<std::vector<std::vector<int>>> party_resp;
    for (int p = 0; p < sc.parties(); ++p)
        party_resp.push_back(detail::all_responses(sc.inputs(p), sc.outputs(p)));
    const std::size_t T = sc.table_size();
    if (nv * T > 60000000) throw capacity_error("local_membership: vertex table too large");

    LpProblem lp = LpProblem::make(static_cast<int>(T) + 1, static_cast<int>(nv));
    std::vector<std::vector<std::vector<int>>> all_resp(nv);
    for (std::size_t k = 0; k < nv; ++k) {
        std::vector<std::vector<int>> resp;
        std::size_t rem = k;
        for (int p = sc.parties(); p-- > 0;) {
            const auto& rp = party_resp[p];
            resp.insert(resp.begin(), rp[rem % rp.size()]);
            rem /= rp.size();
        }
        Box d = deterministic_box(sc, resp);
        for (std::size_t e = 0; e < T; ++e) lp.eq(static_cast<int>(e), static_cast<int>(k)) = d.table()[e];
        lp.eq(static_cast<int>(T), static_cast<int>(k)) = 1.0;
        all_resp[k] = std::move(resp);
    }
    for (std::size_t e = 0; e < T; ++e) lp.rhs(static_cast<int>(e)) = b.table()[e];
    lp.rhs(static_cast<int>(T)) = 1.0;

    LocalMembership out;
    out.report = lp_solve(lp);
    if (out.report.status == SolveStatus::optimal) {
        out.feasible = true;
        out.decomposition.scenario = sc;
        for (std::size_t k = 0; k < nv; ++k) {
            double w = out.report.primal[k];
            if (w > 1e-10) {
                out.decomposition.responses.push_back(all_resp[k]);
                out.decomposition.weights.push_back(w);
            }
        }
        double s = 0.0;
        for (double w : out.decomposition.weights) s += w;
        for (double& w : out.decomposition.weights) w /= s;
    } else if (out.report.status == SolveStatus::infeasible) {
        std::vector<double> coeffs(out.report.certificate.begin(),
                                   out.report.certificate.begin() + static_cast<long>(T));
        out.separator = BellFunctional(sc, std::move(coeffs), "local-separator");
        out.separator.known_bounds["local"] = local_bell_max(out.separator);
    } else {
        throw solver_error("local_membership: solver failure");
    }
    return out;
}

/// Exact maximum of a functional over deterministic boxes, by enumeration.
inline double local_bell_max(const BellFunctional& f) {
    const Scenario& sc = f.scenario;
    const std::size_t nv = detail::local_vertex_count(sc);
    if (nv == std::size_t(-1) || nv > 1000000) throw capacity_error("local_bell_max: too many vertices");
    std::vector<std::vector<std::vector<int>>> party_resp;
    for (int p = 0; p < sc.parties(); ++p)
        party_resp.push_back(detail::all_responses(sc.inputs(p), sc.outputs(p)));
    double best = -std::numeric_limits<double>::infinity();
    std::vector<int> a(sc.parties());
    for (std::size_t k = 0; k < nv; ++k) {
        std::vector<const std::vector<int>*> resp(sc.parties());
        std::size_t rem = k;
        for (int p = sc.parties(); p-- > 0;) {
            const auto& rp = party_resp[p];
            resp[p] = &rp[rem % rp.size()];
            rem /= rp.size();
        }
        double v = 0.0;
        for (std::size_t J = 0; J < sc.joint_inputs(); ++J) {
            std::vector<int> x = sc.unpack_inputs(J);
            for (int p = 0; p < sc.parties(); ++p) a[p] = (*resp[p])[x[p]];
            v += f.coeffs[sc.flat(J, sc.pack_outcomes(a))];
        }
        best = std::max(best, v);
    }
    return best;
}

// ---------------------------------------------------------------------------
// no-signalling polytope

struct NsBellMax {
    double value = 0.0;
    Box argmax;
    SolveReport report;
};

inline NsBellMax ns_bell_max(const BellFunctional& f) {
    const Scenario& sc = f.scenario;
    detail::LpBuilder lp;
    const int pcols = lp.add_cols(static_cast<int>(sc.table_size()));
    for (std::size_t J = 0; J < sc.joint_inputs(); ++J) {
        std::map<int, double> r;
        for (std::size_t O = 0; O < sc.joint_outcomes(); ++O)
            r[pcols + static_cast<int>(sc.flat(J, O))] = 1.0;
        lp.add_row(r, 1.0);
    }
    detail::for_each_ns_row(sc, [&](const std::vector<std::pair<std::size_t, double>>& row) {
        std::map<int, double> r;
        for (const auto& [e, c] : row) r[pcols + static_cast<int>(e)] += c;
        lp.add_row(r, 0.0);
    });
    LpProblem p = lp.build(f.coeffs);
    NsBellMax out;
    out.report = lp_solve(p);
    if (out.report.status != SolveStatus::optimal) throw solver_error("ns_bell_max: solver failure");
    out.value = out.report.objective;
    out.argmax = Box::renormalized(sc, detail::clamped_slice(out.report.primal, 0, sc.table_size()));
    return out;
}

// ---------------------------------------------------------------------------
// Ghost World

/// Symmetric no-signalling extensions witnessing membership: one tensor with
/// `n_ghosts` copies of the first party, one with `n_ghosts` copies of the
/// second.  Slot order: (A, ghosts..., B) and (A, B, ghosts...).
struct GhostCertificate {
    int n_ghosts = 1;
    Box extension_a;
    Box extension_b;
};

namespace detail {

struct GwSystem {
    Scenario ext;
    std::vector<std::vector<int>> groups;
    SymmetricOrbits orbits;
    int col_base = 0;
};

inline GwSystem gw_system(const Scenario& sc, int n_ghosts, bool ghosts_on_a) {
    std::vector<int> ins, outs;
    std::vector<std::vector<int>> groups;
    if (ghosts_on_a) {
        std::vector<int> ga;
        for (int s = 0; s <= n_ghosts; ++s) {
            ins.push_back(sc.inputs(0));
            outs.push_back(sc.outputs(0));
            ga.push_back(s);
        }
        ins.push_back(sc.inputs(1));
        outs.push_back(sc.outputs(1));
        groups = {ga, {n_ghosts + 1}};
    } else {
        ins.push_back(sc.inputs(0));
        outs.push_back(sc.outputs(0));
        std::vector<int> gb;
        for (int s = 0; s <= n_ghosts; ++s) {
            ins.push_back(sc.inputs(1));
            outs.push_back(sc.outputs(1));
            gb.push_back(1 + s);
        }
        groups = {{0}, gb};
    }
    GwSystem sys;
    sys.ext = Scenario(ins, outs);
    if (sys.ext.table_size() > 5000000) throw capacity_error("ghost extension too large");
    sys.groups = groups;
    sys.orbits = make_orbits(sys.ext, groups);
    return sys;
}

/// Rows tying the extension's marginal (ghost inputs 0, ghost outcomes summed)
/// to the box table: one row per box entry.  The box is either a column block
/// (box_cols >= 0) or fixed data (rhs from `fixed`).
inline void add_gw_marginal_rows(LpBuilder& lp, const Scenario& sc, const GwSystem& sys,
                                 bool ghosts_on_a, int box_cols, const std::vector<double>* fixed) {
    const int n_ghosts = static_cast<int>(sys.ext.parties()) - 2;
    for (std::size_t J = 0; J < sc.joint_inputs(); ++J) {
        std::vector<int> xy = sc.unpack_inputs(J);
        std::vector<int> ex(sys.ext.parties(), 0);
        if (ghosts_on_a) {
            ex[0] = xy[0];
            ex[n_ghosts + 1] = xy[1];
        } else {
            ex[0] = xy[0];
            ex[1] = xy[1];
        }
        const std::size_t EJ = sys.ext.pack_inputs(ex);
        for (std::size_t O = 0; O < sc.joint_outcomes(); ++O) {
            std::vector<int> ab = sc.unpack_outcomes(O);
            std::map<int, double> r;
            std::size_t ghost_combos = 1;
            for (int g = 0; g < n_ghosts; ++g)
                ghost_combos *= static_cast<std::size_t>(ghosts_on_a ? sc.outputs(0) : sc.outputs(1));
            for (std::size_t gc = 0; gc < ghost_combos; ++gc) {
                std::vector<int> ea(sys.ext.parties(), 0);
                std::size_t rem = gc;
                if (ghosts_on_a) {
                    ea[0] = ab[0];
                    ea[n_ghosts + 1] = ab[1];
                    for (int g = n_ghosts; g >= 1; --g) {
                        ea[g] = static_cast<int>(rem % sc.outputs(0));
                        rem /= static_cast<std::size_t>(sc.outputs(0));
                    }
                } else {
                    ea[0] = ab[0];
                    ea[1] = ab[1];
                    for (int g = n_ghosts + 1; g >= 2; --g) {
                        ea[g] = static_cast<int>(rem % sc.outputs(1));
                        rem /= static_cast<std::size_t>(sc.outputs(1));
                    }
                }
                const std::size_t e = sys.ext.flat(EJ, sys.ext.pack_outcomes(ea));
                r[sys.col_base + sys.orbits.entry_orbit[e]] += 1.0;
            }
            const std::size_t be = sc.flat(J, O);
            if (box_cols >= 0) {
                r[box_cols + static_cast<int>(be)] -= 1.0;
                lp.add_row(r, 0.0);
            } else {
                lp.add_row(r, (*fixed)[be]);
            }
        }
    }
}

inline Box expand_orbit_solution(const GwSystem& sys, const std::vector<double>& primal) {
    std::vector<double> t(sys.ext.table_size());
    for (std::size_t e = 0; e < t.size(); ++e)
        t[e] = std::max(primal[sys.col_base + sys.orbits.entry_orbit[e]], 0.0);
    return Box::renormalized(sys.ext, std::move(t));
}

} // namespace detail

struct GwMembership {
    bool feasible = false;
    GhostCertificate certificate; // when feasible
    SolveReport report;
};

inline GwMembership gw_membership(const Box& b, int n_ghosts = 1) {
    const Scenario& sc = b.scenario();
    if (sc.parties() != 2) throw validation_error("gw_membership: bipartite box required");
    if (n_ghosts < 1) throw validation_error("gw_membership: need at least one ghost");
    detail::LpBuilder lp;
    detail::GwSystem sysA = detail::gw_system(sc, n_ghosts, true);
    detail::GwSystem sysB = detail::gw_system(sc, n_ghosts, false);
    sysA.col_base = lp.add_cols(sysA.orbits.count);
    sysB.col_base = lp.add_cols(sysB.orbits.count);
    detail::add_extension_rows(lp, sysA.ext, sysA.orbits, sysA.col_base);
    detail::add_extension_rows(lp, sysB.ext, sysB.orbits, sysB.col_base);
    const std::vector<double>& tb = b.table();
    detail::add_gw_marginal_rows(lp, sc, sysA, true, -1, &tb);
    detail::add_gw_marginal_rows(lp, sc, sysB, false, -1, &tb);
    LpProblem p = lp.build({});
    GwMembership out;
    out.report = lp_solve(p);
    if (out.report.status == SolveStatus::optimal) {
        out.feasible = true;
        out.certificate.n_ghosts = n_ghosts;
        out.certificate.extension_a = detail::expand_orbit_solution(sysA, out.report.primal);
        out.certificate.extension_b = detail::expand_orbit_solution(sysB, out.report.primal);
    } else if (out.report.status != SolveStatus::infeasible) {
        throw solver_error("gw_membership: solver failure");
    }
    return out;
}

struct GwBellMax {
    double value = 0.0;
    Box argmax;
    GhostCertificate certificate;
    SolveReport report;
};

inline GwBellMax gw_bell_max(const BellFunctional& f, int n_ghosts = 1) {
    const Scenario& sc = f.scenario;
    if (sc.parties() != 2) throw validation_error("gw_bell_max: bipartite functional required");
    if (n_ghosts < 1) throw validation_error("gw_bell_max: need at least one ghost");
    detail::LpBuilder lp;
    const int pcols = lp.add_cols(static_cast<int>(sc.table_size()));
    detail::GwSystem sysA = detail::gw_system(sc, n_ghosts, true);
    detail::GwSystem sysB = detail::gw_system(sc, n_ghosts, false);
    sysA.col_base = lp.add_cols(sysA.orbits.count);
    sysB.col_base = lp.add_cols(sysB.orbits.count);
    detail::add_extension_rows(lp, sysA.ext, sysA.orbits, sysA.col_base);
    detail::add_extension_rows(lp, sysB.ext, sysB.orbits, sysB.col_base);
    detail::add_gw_marginal_rows(lp, sc, sysA, true, pcols, nullptr);
    detail::add_gw_marginal_rows(lp, sc, sysB, false, pcols, nullptr);
    std::vector<double> obj(static_cast<std::size_t>(lp.cols), 0.0);
    for (std::size_t e = 0; e < sc.table_size(); ++e) obj[pcols + e] = f.coeffs[e];
    LpProblem p = lp.build(obj);
    GwBellMax out;
    out.report = lp_solve(p);
    if (out.report.status != SolveStatus::optimal) throw solver_error("gw_bell_max: solver failure");
    out.value = out.report.objective;
    out.argmax = Box::renormalized(
        sc, detail::clamped_slice(out.report.primal, static_cast<std::size_t>(pcols), sc.table_size()));
    out.certificate.n_ghosts = n_ghosts;
    out.certificate.extension_a = detail::expand_orbit_solution(sysA, out.report.primal);
    out.certificate.extension_b = detail::expand_orbit_solution(sysB, out.report.primal);
    return out;
}

// ---------------------------------------------------------------------------
// Twin World

struct TwMembership {
    bool feasible = false;
    Box extension; // 6-slot certificate, slots (A, A', B, B', C, C')
    SolveReport report;
};

inline TwMembership tw_membership(const Box& b) {
    const Scenario& sc = b.scenario();
    if (sc.parties() != 3) throw validation_error("tw_membership: tripartite box required");
    for (int p = 0; p < 3; ++p)
        if (sc.inputs(p) != 2 || sc.outputs(p) != 2)
            throw capacity_error("tw_membership: two inputs and outputs per party only");
    Scenario ext = Scenario::uniform(6, 2, 2);
    std::vector<std::vector<int>> groups = {{0, 1}, {2, 3}, {4, 5}};
    detail::SymmetricOrbits so = detail::make_orbits(ext, groups);
    detail::LpBuilder lp;
    const int base = lp.add_cols(so.count);
    detail::add_extension_rows(lp, ext, so, base);
    // marginal: twin inputs 0, twin outcomes summed
    for (std::size_t J = 0; J < sc.joint_inputs(); ++J) {
        std::vector<int> xyz = sc.unpack_inputs(J);
        std::vector<int> ex = {xyz[0], 0, xyz[1], 0, xyz[2], 0};
        const std::size_t EJ = ext.pack_inputs(ex);
        for (std::size_t O = 0; O < sc.joint_outcomes(); ++O) {
            std::vector<int> abc = sc.unpack_outcomes(O);
            std::map<int, double> r;
            for (int ta = 0; ta < 2; ++ta)
                for (int tb = 0; tb < 2; ++tb)
                    for (int tc = 0; tc < 2; ++tc) {
                        std::vector<int> ea = {abc[0], ta, abc[1], tb, abc[2], tc};
                        const std::size_t e = ext.flat(EJ, ext.pack_outcomes(ea));
                        r[base + so.entry_orbit[e]] += 1.0;
                    }
            lp.add_row(r, b.table()[sc.flat(J, O)]);
        }
    }
    LpProblem p = lp.build({});
    TwMembership out;
    out.report = lp_solve(p);
    if (out.report.status == SolveStatus::optimal) {
        out.feasible = true;
        std::vector<double> t(ext.table_size());
        for (std::size_t e = 0; e < t.size(); ++e)
            t[e] = std::max(out.report.primal[base + so.entry_orbit[e]], 0.0);
        out.extension = Box::renormalized(ext, std::move(t));
    } else if (out.report.status != SolveStatus::infeasible) {
        throw solver_error("tw_membership: solver failure");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Time-ordered bilocal set

/// One bipartition's expansion data.  Weights are indexed by
/// (lone response) * strategy_count + strategy, where a strategy for the
/// signalling pair is (sender response, receiver table over
/// (x_sender, x_receiver)); `w_fwd` lets `sender` signal to `receiver`,
/// `w_bwd` the reverse.  The two share their lone-response marginals.
struct ToblBranch {
    int lone = 0, sender = 1, receiver = 2;
    std::vector<double> w_fwd, w_bwd;
};

struct ToblCertificate {
    Scenario scenario;
    std::vector<ToblBranch> branches;
};

namespace detail {

struct ToblIndex {
    int lone, sender, receiver;
    std::vector<std::vector<int>> lone_resp;   // response of the lone party
    std::vector<std::vector<int>> send_resp;   // response of the sender
    std::vector<std::vector<int>> recv_resp;   // receiver table indexed x_send * ins_recv + x_recv
    std::size_t strategies() const { return send_resp.size() * recv_resp.size(); }
};

inline ToblIndex tobl_index(const Scenario& sc, int lone, int sender, int receiver) {
    ToblIndex ix;
    ix.lone = lone;
    ix.sender = sender;
    ix.receiver = receiver;
    ix.lone_resp = all_responses(sc.inputs(lone), sc.outputs(lone));
    ix.send_resp = all_responses(sc.inputs(sender), sc.outputs(sender));
    ix.recv_resp = all_responses(sc.inputs(sender) * sc.inputs(receiver), sc.outputs(receiver));
    if (ix.lone_resp.size() * ix.strategies() > 200000)
        throw capacity_error("tobl: vertex set too large");
    return ix;
}

/// Value of deterministic model (f, s) at table entry (x, a): 1 or 0.
inline bool tobl_hit(const ToblIndex& ix, const Scenario& sc, std::size_t fr, std::size_t st,
                     const std::vector<int>& x, const std::vector<int>& a) {
    const auto& send = ix.send_resp[st / ix.recv_resp.size()];
    const auto& recv = ix.recv_resp[st % ix.recv_resp.size()];
    if (ix.lone_resp[fr][x[ix.lone]] != a[ix.lone]) return false;
    if (send[x[ix.sender]] != a[ix.sender]) return false;
    const int pair_in = x[ix.sender] * sc.inputs(ix.receiver) + x[ix.receiver];
    return recv[pair_in] == a[ix.receiver];
}

} // namespace detail

/// Reconstruct the box encoded by one arm of a branch.
inline Box tobl_branch_box(const Scenario& sc, const ToblBranch& br, bool fwd) {
    detail::ToblIndex ix = fwd ? detail::tobl_index(sc, br.lone, br.sender, br.receiver)
                               : detail::tobl_index(sc, br.lone, br.receiver, br.sender);
    const std::vector<double>& w = fwd ? br.w_fwd : br.w_bwd;
    std::vector<double> t(sc.table_size(), 0.0);
    for (std::size_t J = 0; J < sc.joint_inputs(); ++J) {
        std::vector<int> x = sc.unpack_inputs(J);
        for (std::size_t O = 0; O < sc.joint_outcomes(); ++O) {
            std::vector<int> a = sc.unpack_outcomes(O);
            double v = 0.0;
            for (std::size_t fr = 0; fr < ix.lone_resp.size(); ++fr)
                for (std::size_t st = 0; st < ix.strategies(); ++st)
                    if (detail::tobl_hit(ix, sc, fr, st, x, a)) v += w[fr * ix.strategies() + st];
            t[sc.flat(J, O)] = v;
        }
    }
    return Box::renormalized(sc, std::move(t));
}

namespace detail {
/// Append one bipartition's rows: both arms reconstruct the box, arms share
/// lone-party marginals, weights are distributions.
inline void add_tobl_branch(LpBuilder& lp, const Scenario& sc, int lone, int sender, int receiver,
                            int box_cols, const std::vector<double>* fixed, int& fwd_base,
                            int& bwd_base) {
    ToblIndex fix = tobl_index(sc, lone, sender, receiver);
    ToblIndex bix = tobl_index(sc, lone, receiver, sender);
    const int nf = static_cast<int>(fix.lone_resp.size());
    const int sf = static_cast<int>(fix.strategies());
    const int sb = static_cast<int>(bix.strategies());
    fwd_base = lp.add_cols(nf * sf);
    bwd_base = lp.add_cols(nf * sb);
    auto recon = [&](const ToblIndex& ix, int base, int scount) {
        for (std::size_t J = 0; J < sc.joint_inputs(); ++J) {
            std::vector<int> x = sc.unpack_inputs(J);
            for (std::size_t O = 0; O < sc.joint_outcomes(); ++O) {
                std::vector<int> a = sc.unpack_outcomes(O);
                std::map<int, double> r;
                for (int fr = 0; fr < nf; ++fr)
                    for (int st = 0; st < scount; ++st)
                        if (tobl_hit(ix, sc, fr, st, x, a)) r[base + fr * scount + st] += 1.0;
                const std::size_t be = sc.flat(J, O);
                if (box_cols >= 0) {
                    r[box_cols + static_cast<int>(be)] -= 1.0;
                    lp.add_row(r, 0.0);
                } else {
                    lp.add_row(r, (*fixed)[be]);
                }
            }
        }
    };
    recon(fix, fwd_base, sf);
    recon(bix, bwd_base, sb);
    for (int fr = 0; fr < nf; ++fr) {
        std::map<int, double> r;
        for (int st = 0; st < sf; ++st) r[fwd_base + fr * sf + st] += 1.0;
        for (int st = 0; st < sb; ++st) r[bwd_base + fr * sb + st] -= 1.0;
        lp.add_row(r, 0.0);
    }
    std::map<int, double> norm;
    for (int k = 0; k < nf * sf; ++k) norm[fwd_base + k] = 1.0;
    lp.add_row(norm, 1.0);
}
} // namespace detail

struct ToblMembership {
    bool feasible = false;
    ToblCertificate certificate;
    SolveReport report;
};

inline ToblMembership tobl_membership(const Box& b) {
    const Scenario& sc = b.scenario();
    if (sc.parties() != 3) throw validation_error("tobl_membership: tripartite box required");
    detail::LpBuilder lp;
    const std::vector<double>& tb = b.table();
    struct Bases { int lone, s, r, fwd, bwd; };
    std::vector<Bases> bases;
    const int split[3][3] = {{0, 1, 2}, {1, 0, 2}, {2, 0, 1}};
    for (const auto& t : split) {
        Bases bs{t[0], t[1], t[2], 0, 0};
        detail::add_tobl_branch(lp, sc, t[0], t[1], t[2], -1, &tb, bs.fwd, bs.bwd);
        bases.push_back(bs);
    }
    LpProblem p = lp.build({});
    ToblMembership out;
    out.report = lp_solve(p);
    if (out.report.status == SolveStatus::optimal) {
        out.feasible = true;
        out.certificate.scenario = sc;
        for (const auto& bs : bases) {
            ToblBranch br;
            br.lone = bs.lone;
            br.sender = bs.s;
            br.receiver = bs.r;
            detail::ToblIndex fix = detail::tobl_index(sc, bs.lone, bs.s, bs.r);
            detail::ToblIndex bix = detail::tobl_index(sc, bs.lone, bs.r, bs.s);
            const std::size_t nfw = fix.lone_resp.size() * fix.strategies();
            const std::size_t nbw = bix.lone_resp.size() * bix.strategies();
            br.w_fwd.assign(out.report.primal.begin() + bs.fwd,
                            out.report.primal.begin() + bs.fwd + static_cast<long>(nfw));
            br.w_bwd.assign(out.report.primal.begin() + bs.bwd,
                            out.report.primal.begin() + bs.bwd + static_cast<long>(nbw));
            for (double& w : br.w_fwd) w = std::max(w, 0.0);
            for (double& w : br.w_bwd) w = std::max(w, 0.0);
            out.certificate.branches.push_back(std::move(br));
        }
    } else if (out.report.status != SolveStatus::infeasible) {
        throw solver_error("tobl_membership: solver failure");
    }
    return out;
}

struct ToblBellMax {
    double value = 0.0;
    Box argmax;
    SolveReport report;
};

inline ToblBellMax tobl_bell_max(const BellFunctional& f) {
    const Scenario& sc = f.scenario;
    if (sc.parties() != 3) throw validation_error("tobl_bell_max: tripartite functional required");
    detail::LpBuilder lp;
    const int pcols = lp.add_cols(static_cast<int>(sc.table_size()));
    const int split[3][3] = {{0, 1, 2}, {1, 0, 2}, {2, 0, 1}};
    for (const auto& t : split) {
        int fwd = 0, bwd = 0;
        detail::add_tobl_branch(lp, sc, t[0], t[1], t[2], pcols, nullptr, fwd, bwd);
    }
    std::vector<double> obj(static_cast<std::size_t>(lp.cols), 0.0);
    for (std::size_t e = 0; e < sc.table_size(); ++e) obj[pcols + e] = f.coeffs[e];
    LpProblem p = lp.build(obj);
    ToblBellMax out;
    out.report = lp_solve(p);
    if (out.report.status != SolveStatus::optimal) throw solver_error("tobl_bell_max: solver failure");
    out.value = out.report.objective;
    out.argmax = Box::renormalized(
        sc, detail::clamped_slice(out.report.primal, static_cast<std::size_t>(pcols), sc.table_size()));
    return out;
}

} // namespace zoo
