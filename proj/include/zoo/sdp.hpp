#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "report.hpp"
#include "scenario.hpp"

namespace zoo {

/// One affine coefficient of a block entry: with var >= 0, the matrix of that
/// variable gains `coeff` at (row, col) and, when row < col, at (col, row);
/// var == -1 contributes to the constant block instead.
struct SdpEntry {
    int block = 0, row = 0, col = 0;
    int var = -1;
    double coeff = 0.0;
};

/// Linear matrix inequality problem: maximize objective . y subject to every
/// block of F0 + sum_i y_i F_i being positive semidefinite, and optionally
/// eq . y = eq_rhs.  Entries are stored with row <= col and apply to both
/// mirror cells, so blocks are symmetric by construction.
struct SdpProblem {
    int num_vars = 0;
    std::vector<int> block_sizes;
    std::vector<SdpEntry> entries;
    std::vector<double> objective;
    Eigen::MatrixXd eq;   // 0 x num_vars when absent
    Eigen::VectorXd eq_rhs;
};

struct SdpOptions {
    int max_iter = 250;
    std::ostream* log = nullptr;
};

namespace detail {

struct SdpCell {
    int row, col;
    double coeff;
};

/// Per-variable, per-block mirrored cell lists plus dense constant blocks.
struct SdpData {
    std::vector<Eigen::MatrixXd> f0;
    std::vector<std::vector<std::vector<SdpCell>>> terms; // [var][block] -> cells
    std::vector<int> sizes;
    int nv = 0;
};

inline SdpData compile_sdp(const SdpProblem& p) {
    SdpData d;
    d.nv = p.num_vars;
    d.sizes = p.block_sizes;
    if (p.num_vars < 1) throw validation_error("sdp: need at least one variable");
    if (p.block_sizes.empty()) throw validation_error("sdp: need at least one block");
    for (int s : p.block_sizes)
        if (s < 1 || s > 200) throw capacity_error("sdp: block size out of range");
    if (static_cast<int>(p.objective.size()) != p.num_vars)
        throw validation_error("sdp: objective size mismatch");
    d.f0.resize(p.block_sizes.size());
    for (std::size_t b = 0; b < p.block_sizes.size(); ++b)
        d.f0[b] = Eigen::MatrixXd::Zero(p.block_sizes[b], p.block_sizes[b]);
    d.terms.assign(p.num_vars, std::vector<std::vector<SdpCell>>(p.block_sizes.size()));
    for (const SdpEntry& e : p.entries) {
        if (e.block < 0 || e.block >= static_cast<int>(p.block_sizes.size()))
            throw validation_error("sdp: entry block out of range");
        const int n = p.block_sizes[e.block];
        if (e.row < 0 || e.col < e.row || e.col >= n)
            throw validation_error("sdp: entry must satisfy 0 <= row <= col < size");
        if (e.var < -1 || e.var >= p.num_vars) throw validation_error("sdp: entry variable out of range");
        if (!std::isfinite(e.coeff)) throw validation_error("sdp: entry coefficient not finite");
        if (e.var == -1) {
            d.f0[e.block](e.row, e.col) += e.coeff;
            if (e.row != e.col) d.f0[e.block](e.col, e.row) += e.coeff;
        } else {
            d.terms[e.var][e.block].push_back({e.row, e.col, e.coeff});
            if (e.row != e.col) d.terms[e.var][e.block].push_back({e.col, e.row, e.coeff});
        }
    }
    return d;
}

inline double cell_dot(const std::vector<SdpCell>& cells, const Eigen::MatrixXd& m) {
    double s = 0.0;
    for (const SdpCell& c : cells) s += c.coeff * m(c.row, c.col);
    return s;
}

inline void add_cells(Eigen::MatrixXd& m, const std::vector<SdpCell>& cells, double w) {
    for (const SdpCell& c : cells) m(c.row, c.col) += w * c.coeff;
}

/// Symmetric square root and inverse square root via eigendecomposition.
struct EigPack {
    Eigen::MatrixXd half, invhalf, inv;
    double min_eig = 0.0;
};

inline EigPack eig_pack(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw solver_error("sdp: eigensolver failure");
    EigPack p;
    p.min_eig = es.eigenvalues()(0);
    Eigen::VectorXd lam = es.eigenvalues().cwiseMax(1e-300);
    Eigen::VectorXd sq = lam.cwiseSqrt();
    const Eigen::MatrixXd& u = es.eigenvectors();
    p.half = u * sq.asDiagonal() * u.transpose();
    p.invhalf = u * sq.cwiseInverse().asDiagonal() * u.transpose();
    p.inv = u * lam.cwiseInverse().asDiagonal() * u.transpose();
    return p;
}

/// Largest step alpha (capped slightly above 1) with m + alpha * dm psd.
inline double psd_step(const Eigen::MatrixXd& m, const Eigen::MatrixXd& dm) {
    Eigen::MatrixXd k;
    Eigen::LLT<Eigen::MatrixXd> ll(m);
    if (ll.info() == Eigen::Success) {
        Eigen::MatrixXd l = ll.matrixL();
        k = l.triangularView<Eigen::Lower>().solve(dm).transpose();
        k = l.triangularView<Eigen::Lower>().solve(k);
    } else {
        EigPack p = eig_pack(m);
        k = p.invhalf * dm * p.invhalf;
    }
    k = 0.5 * (k + k.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    const double lmin = es.eigenvalues()(0);
    if (lmin >= -1e-14) return 1.0 / 0.98;
    return std::min(1.0 / 0.98, -1.0 / lmin);
}

} // namespace detail

/// Infeasible-start primal-dual path following with Nesterov-Todd scaling and
/// a Mehrotra corrector.  Equalities enter the Newton system directly when
/// few, and are folded away by null-space substitution when they outnumber
/// half the variables.  Reports: primal = y, dual = dual blocks flattened
/// row-major in block order; gap and residuals on the original scale.
inline SolveReport sdp_solve(const SdpProblem& prob, const SdpOptions& opt = {}) {
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    SolveReport rep;

    // equality presolve: consistency, then either null-space reduction or
    // direct KKT treatment
    const int ne_in = static_cast<int>(prob.eq.rows());
    if (ne_in > 0 && static_cast<int>(prob.eq.cols()) != prob.num_vars)
        throw validation_error("sdp: equality matrix shape mismatch");
    SdpProblem work = prob;
    MatrixXd nullsp;     // num_vars x reduced, when null-space path taken
    VectorXd particular; // particular solution of the equalities
    bool reduced = false;
    if (ne_in > 0) {
        Eigen::FullPivLU<MatrixXd> lu(prob.eq);
        lu.setThreshold(1e-10);
        particular = lu.solve(prob.eq_rhs);
        if ((prob.eq * particular - prob.eq_rhs).cwiseAbs().maxCoeff() > 1e-8) {
            rep.status = SolveStatus::infeasible;
            rep.note = "inconsistent equalities";
            // combination of equality rows with zero lhs and nonzero rhs
            Eigen::FullPivLU<MatrixXd> lt(prob.eq.transpose());
            lt.setThreshold(1e-10);
            MatrixXd ker = lt.kernel();
            for (int k = 0; k < ker.cols(); ++k) {
                const double d = ker.col(k).dot(prob.eq_rhs);
                if (std::abs(d) > 1e-10) {
                    VectorXd mu = ker.col(k) / d;
                    rep.certificate.assign(mu.data(), mu.data() + mu.size());
                    break;
                }
            }
            return rep;
        }
    }
    if (ne_in > prob.num_vars / 2) {
        Eigen::FullPivLU<MatrixXd> lu(prob.eq);
        lu.setThreshold(1e-10);
        nullsp = lu.kernel();
        if (nullsp.cols() == 0) {
            // fully determined: equality system pins y
            nullsp = MatrixXd::Zero(prob.num_vars, 0);
        }
        reduced = true;
        SdpProblem r;
        r.num_vars = static_cast<int>(nullsp.cols());
        r.block_sizes = prob.block_sizes;
        r.objective.assign(static_cast<std::size_t>(r.num_vars), 0.0);
        for (int k = 0; k < r.num_vars; ++k)
            for (int i = 0; i < prob.num_vars; ++i)
                r.objective[k] += prob.objective[i] * nullsp(i, k);
        // constant part: F0 + sum_i particular_i F_i; variable part: columns
        // of the null-space basis combine the original coefficient matrices
        std::map<std::tuple<int, int, int, int>, double> acc;
        for (const SdpEntry& e : prob.entries) {
            if (e.var == -1) {
                acc[{e.block, e.row, e.col, -1}] += e.coeff;
            } else {
                acc[{e.block, e.row, e.col, -1}] += e.coeff * particular(e.var);
                for (int k = 0; k < r.num_vars; ++k) {
                    const double w = e.coeff * nullsp(e.var, k);
                    if (w != 0.0) acc[{e.block, e.row, e.col, k}] += w;
                }
            }
        }
        for (const auto& [key, v] : acc) {
            if (std::abs(v) < 1e-14) continue;
            auto [b, rr, cc, var] = key;
            r.entries.push_back({b, rr, cc, var, v});
        }
        if (r.num_vars == 0) {
            // nothing left to optimize: verify the pinned point is feasible
            detail::SdpData d0 = detail::compile_sdp(SdpProblem{
                1, r.block_sizes, r.entries, {0.0}, MatrixXd(), VectorXd()});
            double lmin = 0.0;
            for (const auto& f : d0.f0)
                lmin = std::min(lmin, detail::eig_pack(f).min_eig);
            rep.status = lmin >= -1e-8 ? SolveStatus::optimal : SolveStatus::infeasible;
            double obj = 0.0;
            for (int i = 0; i < prob.num_vars; ++i) obj += prob.objective[i] * particular(i);
            rep.objective = obj;
            rep.primal.assign(particular.data(), particular.data() + prob.num_vars);
            rep.primal_residual = std::max(0.0, -lmin);
            return rep;
        }
        work = std::move(r);
    }

    detail::SdpData data = detail::compile_sdp(work);
    const int nv = data.nv;
    const int nb = static_cast<int>(data.sizes.size());
    const int ne = reduced ? 0 : ne_in;
    int ntot = 0;
    for (int s : data.sizes) ntot += s;

    // objective normalization for scale robustness
    double bscale = 0.0;
    for (double c : work.objective) bscale = std::max(bscale, std::abs(c));
    if (bscale == 0.0) bscale = 1.0;
    VectorXd bhat(nv);
    for (int i = 0; i < nv; ++i) bhat(i) = work.objective[i] / bscale;
    VectorXd fhat = ne > 0 ? VectorXd(work.eq_rhs) : VectorXd();

    // data magnitude for the initial point
    double dscale = 1.0;
    for (const auto& f : data.f0) dscale = std::max(dscale, f.cwiseAbs().maxCoeff());
    for (int i = 0; i < nv; ++i)
        for (int b = 0; b < nb; ++b)
            for (const auto& c : data.terms[i][b]) dscale = std::max(dscale, std::abs(c.coeff));

    std::vector<MatrixXd> S(nb), X(nb);
    for (int b = 0; b < nb; ++b) {
        S[b] = dscale * std::sqrt(double(data.sizes[b])) * MatrixXd::Identity(data.sizes[b], data.sizes[b]);
        X[b] = std::sqrt(double(data.sizes[b])) * MatrixXd::Identity(data.sizes[b], data.sizes[b]);
    }
    VectorXd y = VectorXd::Zero(nv);
    VectorXd lam = VectorXd::Zero(ne);

    auto assemble_slack = [&](const VectorXd& yv, std::vector<MatrixXd>& out) {
        for (int b = 0; b < nb; ++b) {
            out[b] = data.f0[b];
            for (int i = 0; i < nv; ++i)
                if (yv(i) != 0.0) detail::add_cells(out[b], data.terms[i][b], yv(i));
        }
    };

    std::vector<MatrixXd> slack(nb), Rd(nb), W(nb), Sinv(nb), G(nb), Rc(nb);
    std::vector<MatrixXd> dS(nb), dX(nb), dSc(nb), dXc(nb);
    MatrixXd M(nv, nv), kkt;
    Eigen::LLT<MatrixXd> llt;
    Eigen::PartialPivLU<MatrixXd> klu;

    // duality gap in original units is roughly mu * ntot * bscale; aim well
    // under the reported-gap contract with a floor near machine precision
    const double mu_target = std::max(5e-14, 1e-8 / (double(ntot) * std::max(1.0, bscale)));
    bool converged = false;
    double mu_prev = std::numeric_limits<double>::infinity();
    double best_merit = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> bestS, bestX;
    VectorXd besty, bestlam;
    int stalled = 0;
    int it = 0;
    for (; it < opt.max_iter; ++it) {
        assemble_slack(y, slack);
        double mu = 0.0;
        for (int b = 0; b < nb; ++b) {
            Rd[b] = slack[b] - S[b];
            mu += (S[b].array() * X[b].array()).sum();
        }
        mu /= ntot;
        VectorXd rp(nv);
        for (int i = 0; i < nv; ++i) {
            double t = 0.0;
            for (int b = 0; b < nb; ++b) t += detail::cell_dot(data.terms[i][b], X[b]);
            rp(i) = -bhat(i) - t;
        }
        if (ne > 0) rp += work.eq.transpose() * lam;
        VectorXd re = ne > 0 ? VectorXd(fhat - work.eq * y) : VectorXd();

        double res = rp.cwiseAbs().maxCoeff();
        for (int b = 0; b < nb; ++b) res = std::max(res, Rd[b].cwiseAbs().maxCoeff());
        if (ne > 0 && re.size()) res = std::max(res, re.cwiseAbs().maxCoeff());
        if (opt.log)
            *opt.log << "sdp: iter " << it << " mu " << mu << " res " << res << "\n";
        if (!std::isfinite(mu) || !std::isfinite(res)) break;
        if (mu + res < best_merit) {
            best_merit = mu + res;
            besty = y;
            bestlam = lam;
            bestS = S;
            bestX = X;
        }
        if (mu <= mu_target && res <= 1e-10 * (1.0 + dscale)) {
            converged = true;
            break;
        }
        stalled = mu > 0.9 * mu_prev ? stalled + 1 : 0;
        if (stalled >= 12) break;
        mu_prev = mu;

        // Nesterov-Todd scaling per block, W S W = X, via Cholesky factors
        // and an SVD; this keeps far more digits than an eigenvalue sandwich
        for (int b = 0; b < nb; ++b) {
            const int n = data.sizes[b];
            Eigen::LLT<MatrixXd> ls(S[b]);
            Eigen::LLT<MatrixXd> lx(X[b]);
            if (ls.info() == Eigen::Success && lx.info() == Eigen::Success) {
                MatrixXd lsm = ls.matrixL();
                MatrixXd lxm = lx.matrixL();
                Eigen::BDCSVD<MatrixXd> svd(lsm.transpose() * lxm,
                                            Eigen::ComputeThinU | Eigen::ComputeThinV);
                MatrixXd t = lxm * svd.matrixV();
                W[b] = t * svd.singularValues().cwiseMax(1e-150).cwiseInverse().asDiagonal() *
                       t.transpose();
                W[b] = 0.5 * (W[b] + W[b].transpose());
                Sinv[b] = ls.solve(MatrixXd::Identity(n, n));
                Sinv[b] = 0.5 * (Sinv[b] + Sinv[b].transpose());
            } else {
                detail::EigPack ps = detail::eig_pack(S[b]);
                Sinv[b] = ps.inv;
                MatrixXd t = ps.half * X[b] * ps.half;
                t = 0.5 * (t + t.transpose());
                detail::EigPack pt = detail::eig_pack(t);
                W[b] = ps.invhalf * pt.half * ps.invhalf;
                W[b] = 0.5 * (W[b] + W[b].transpose());
            }
        }

        // Schur matrix M_ij = tr(F_i W F_j W), shared by both solves
        for (int j = 0; j < nv; ++j) {
            std::vector<MatrixXd> Bj(nb);
            for (int b = 0; b < nb; ++b) {
                Bj[b] = MatrixXd::Zero(data.sizes[b], data.sizes[b]);
                for (const auto& c : data.terms[j][b])
                    Bj[b] += c.coeff * W[b].col(c.row) * W[b].row(c.col);
            }
            for (int i = 0; i <= j; ++i) {
                double s = 0.0;
                for (int b = 0; b < nb; ++b) s += detail::cell_dot(data.terms[i][b], Bj[b]);
                M(i, j) = s;
                M(j, i) = s;
            }
        }
        // scaled factorization with iterative refinement: both matter once
        // the scaling matrices become ill-conditioned near the optimum
        VectorXd msc = M.diagonal().cwiseAbs().cwiseMax(1e-128).cwiseSqrt().cwiseInverse();
        bool use_llt = ne == 0;
        if (use_llt) {
            MatrixXd ms = msc.asDiagonal() * M * msc.asDiagonal();
            llt.compute(ms + 1e-14 * MatrixXd::Identity(nv, nv));
            if (llt.info() != Eigen::Success) use_llt = false;
        }
        if (!use_llt) {
            const int dim = nv + ne;
            kkt = MatrixXd::Zero(dim, dim);
            kkt.topLeftCorner(nv, nv) = M;
            if (ne > 0) {
                kkt.topRightCorner(nv, ne) = work.eq.transpose();
                kkt.bottomLeftCorner(ne, nv) = work.eq;
            }
            klu.compute(kkt);
        }
        auto solve_dir = [&](const std::vector<MatrixXd>& rc, VectorXd& dy, VectorXd& dlam,
                             std::vector<MatrixXd>& ds, std::vector<MatrixXd>& dx) {
            VectorXd h(nv);
            for (int b = 0; b < nb; ++b) G[b] = rc[b] - W[b] * Rd[b] * W[b];
            for (int i = 0; i < nv; ++i) {
                double s = 0.0;
                for (int b = 0; b < nb; ++b) s += detail::cell_dot(data.terms[i][b], G[b]);
                h(i) = s - rp(i);
            }
            // iterative refinement with extended-precision residuals: the
            // scaled system gets singular to double precision near the end
            auto xresid = [](const MatrixXd& a, const VectorXd& rhs, const VectorXd& u) {
                VectorXd r(rhs.size());
                for (int i = 0; i < rhs.size(); ++i) {
                    long double s = static_cast<long double>(rhs(i));
                    for (int j = 0; j < u.size(); ++j)
                        s -= static_cast<long double>(a(i, j)) * static_cast<long double>(u(j));
                    r(i) = static_cast<double>(s);
                }
                return r;
            };
            if (ne == 0 && use_llt) {
                dy = msc.asDiagonal() * llt.solve((msc.asDiagonal() * h).eval());
                for (int r = 0; r < 4; ++r) {
                    VectorXd corr = msc.asDiagonal() * llt.solve((msc.asDiagonal() * xresid(M, h, dy)).eval());
                    dy += corr;
                    if (corr.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + dy.cwiseAbs().maxCoeff())) break;
                }
                dlam.resize(0);
            } else {
                VectorXd rhs(nv + ne);
                rhs.head(nv) = h;
                if (ne > 0) rhs.tail(ne) = re;
                VectorXd sol = klu.solve(rhs);
                for (int r = 0; r < 4; ++r) {
                    VectorXd corr = klu.solve(xresid(kkt, rhs, sol));
                    sol += corr;
                    if (corr.cwiseAbs().maxCoeff() <= 1e-15 * (1.0 + sol.cwiseAbs().maxCoeff())) break;
                }
                dy = sol.head(nv);
                dlam = sol.tail(ne);
            }
            for (int b = 0; b < nb; ++b) {
                ds[b] = Rd[b];
                for (int i = 0; i < nv; ++i)
                    if (dy(i) != 0.0) detail::add_cells(ds[b], data.terms[i][b], dy(i));
                dx[b] = rc[b] - W[b] * ds[b] * W[b];
                dx[b] = 0.5 * (dx[b] + dx[b].transpose());
            }
        };

        // predictor
        for (int b = 0; b < nb; ++b) Rc[b] = -X[b];
        VectorXd dy_a, dlam_a;
        solve_dir(Rc, dy_a, dlam_a, dS, dX);
        double ap = 1.0 / 0.98, ad = 1.0 / 0.98;
        for (int b = 0; b < nb; ++b) {
            ap = std::min(ap, detail::psd_step(X[b], dX[b]));
            ad = std::min(ad, detail::psd_step(S[b], dS[b]));
        }
        ap = std::min(1.0, 0.98 * ap);
        ad = std::min(1.0, 0.98 * ad);
        double mu_aff = 0.0;
        for (int b = 0; b < nb; ++b)
            mu_aff += ((S[b] + ad * dS[b]).array() * (X[b] + ap * dX[b]).array()).sum();
        mu_aff = std::max(mu_aff / ntot, 0.0);
        double sigma = std::pow(mu_aff / mu, 3.0);
        sigma = std::min(1.0, std::max(1e-8, sigma));
        // short predictor steps mean the iterate has drifted off center;
        // lean on centering so the next predictor can take a long step again
        const double astep = std::min(ap, ad);
        if (astep < 0.2) sigma = std::max(sigma, 1.0 - astep);

        // corrector; the second-order term divides by S and turns into noise
        // once the iterate is nearly complementary, so drop it there
        const bool second_order = mu > 1e-5 * dscale;
        for (int b = 0; b < nb; ++b) {
            Rc[b] = sigma * mu * Sinv[b] - X[b];
            if (second_order) {
                MatrixXd cross = dX[b] * dS[b] * Sinv[b];
                Rc[b] -= 0.5 * (cross + cross.transpose());
            }
        }
        VectorXd dy, dlam;
        solve_dir(Rc, dy, dlam, dSc, dXc);
        // step closer to the boundary as the path is tracked more tightly
        const double gamma = mu < 1e-4 * dscale ? 0.99 : 0.98;
        ap = 1.0 / gamma;
        ad = 1.0 / gamma;
        for (int b = 0; b < nb; ++b) {
            ap = std::min(ap, detail::psd_step(X[b], dXc[b]));
            ad = std::min(ad, detail::psd_step(S[b], dSc[b]));
        }
        ap = std::min(1.0, gamma * ap);
        ad = std::min(1.0, gamma * ad);

        // wide-neighborhood safeguard: degenerate instances let the iterate
        // drift so far off center that every later step hits the boundary
        // almost immediately; backtracking until the smallest eigenvalue of
        // the (symmetrized) product stays above a fixed fraction of the new
        // barrier parameter keeps the next Newton step usable
        {
            const double beta = 1e-3;
            for (int trial = 0; trial < 30; ++trial) {
                double mu_new = 0.0, lmin_rel = std::numeric_limits<double>::infinity();
                for (int b = 0; b < nb; ++b) {
                    MatrixXd xn = X[b] + ap * dXc[b];
                    MatrixXd sn = S[b] + ad * dSc[b];
                    mu_new += (xn.array() * sn.array()).sum();
                }
                mu_new = std::max(mu_new / ntot, 1e-300);
                for (int b = 0; b < nb && lmin_rel >= beta; ++b) {
                    MatrixXd xn = X[b] + ap * dXc[b];
                    MatrixXd sn = S[b] + ad * dSc[b];
                    if (data.sizes[b] == 1) {
                        lmin_rel = std::min(lmin_rel, xn(0, 0) * sn(0, 0) / mu_new);
                        continue;
                    }
                    Eigen::LLT<MatrixXd> lx(xn);
                    if (lx.info() != Eigen::Success) { lmin_rel = -1.0; break; }
                    MatrixXd l = lx.matrixL();
                    Eigen::SelfAdjointEigenSolver<MatrixXd> ev(l.transpose() * sn * l);
                    lmin_rel = std::min(lmin_rel, ev.eigenvalues()(0) / mu_new);
                }
                if (lmin_rel >= beta) break;
                ap *= 0.8;
                ad *= 0.8;
            }
        }

        // commit only finite updates; otherwise keep the last sound iterate
        bool finite = dy.allFinite() && (ne == 0 || dlam.allFinite());
        for (int b = 0; b < nb && finite; ++b)
            finite = dSc[b].allFinite() && dXc[b].allFinite();
        if (!finite) break;
        if (opt.log)
            *opt.log << "sdp:   sigma " << sigma << " ap " << ap << " ad " << ad << "\n";
        y += ad * dy;
        if (ne > 0) lam += ad * dlam;
        for (int b = 0; b < nb; ++b) {
            S[b] += ad * dSc[b];
            X[b] += ap * dXc[b];
            S[b] = 0.5 * (S[b] + S[b].transpose());
            X[b] = 0.5 * (X[b] + X[b].transpose());
            // roundoff can push a boundary eigenvalue just outside the cone;
            // shift back so the scaling stays well defined
            for (MatrixXd* m : {&S[b], &X[b]}) {
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(*m);
                const double floor = 1e-14 * std::max(1.0, m->trace() / data.sizes[b]);
                if (es.eigenvalues()(0) < floor)
                    *m += (floor - es.eigenvalues()(0)) *
                          MatrixXd::Identity(data.sizes[b], data.sizes[b]);
            }
        }
    }

    // report the best-merit iterate: a noisy final step must not mask an
    // earlier, more accurate point
    if (besty.size() && !converged) {
        y = besty;
        lam = bestlam;
        S = bestS;
        X = bestX;
    }
    // dual polish: project the affine dual residual out along the span of the
    // coefficient matrices, then shift any block back into the cone; adopt
    // only when this measurably reduces the residual
    {
        auto dual_resid = [&](const std::vector<MatrixXd>& xs) {
            double worst = 0.0;
            for (int i = 0; i < nv; ++i) {
                double t = 0.0;
                for (int b = 0; b < nb; ++b) t += detail::cell_dot(data.terms[i][b], xs[b]);
                double g = bhat(i) + t;
                if (ne > 0) g -= work.eq.col(i).dot(lam);
                worst = std::max(worst, std::abs(g));
            }
            return worst;
        };
        MatrixXd gram(nv, nv);
        for (int j = 0; j < nv; ++j) {
            std::vector<MatrixXd> aj(nb);
            for (int b = 0; b < nb; ++b) {
                aj[b] = MatrixXd::Zero(data.sizes[b], data.sizes[b]);
                detail::add_cells(aj[b], data.terms[j][b], 1.0);
            }
            for (int i = 0; i <= j; ++i) {
                double s = 0.0;
                for (int b = 0; b < nb; ++b) s += detail::cell_dot(data.terms[i][b], aj[b]);
                gram(i, j) = s;
                gram(j, i) = s;
            }
        }
        VectorXd r(nv);
        for (int i = 0; i < nv; ++i) {
            double t = 0.0;
            for (int b = 0; b < nb; ++b) t += detail::cell_dot(data.terms[i][b], X[b]);
            r(i) = bhat(i) + t;
            if (ne > 0) r(i) -= work.eq.col(i).dot(lam);
        }
        Eigen::LLT<MatrixXd> gl(gram + 1e-12 * (gram.trace() / nv) * MatrixXd::Identity(nv, nv));
        if (gl.info() == Eigen::Success) {
            VectorXd xi = gl.solve(r);
            xi += gl.solve((r - gram * xi).eval());
            std::vector<MatrixXd> xp = X;
            for (int b = 0; b < nb; ++b)
                for (int i = 0; i < nv; ++i)
                    if (xi(i) != 0.0) detail::add_cells(xp[b], data.terms[i][b], -xi(i));
            for (int b = 0; b < nb; ++b) {
                Eigen::SelfAdjointEigenSolver<MatrixXd> es(xp[b]);
                if (es.eigenvalues()(0) < 0.0)
                    xp[b] -= es.eigenvalues()(0) *
                             MatrixXd::Identity(data.sizes[b], data.sizes[b]);
            }
            if (dual_resid(xp) < dual_resid(X)) X = xp;
        }
    }
    // map back to original coordinates and report on the original scale
    VectorXd y_full;
    if (reduced) {
        y_full = particular;
        for (int k = 0; k < nv; ++k) y_full += y(k) * nullsp.col(k);
    } else {
        y_full = y;
    }
    rep.iterations = it;
    rep.primal.assign(y_full.data(), y_full.data() + prob.num_vars);
    rep.dual.clear();
    for (int b = 0; b < nb; ++b)
        for (int r = 0; r < data.sizes[b]; ++r)
            for (int c = 0; c < data.sizes[b]; ++c) rep.dual.push_back(X[b](r, c) * bscale);
    double pobj = 0.0;
    for (int i = 0; i < prob.num_vars; ++i) pobj += prob.objective[i] * y_full(i);
    rep.objective = pobj;
    // primal feasibility: slack blocks of the original problem
    detail::SdpData odata = detail::compile_sdp(prob);
    double lmin = 0.0;
    {
        std::vector<MatrixXd> os(nb);
        for (int b = 0; b < nb; ++b) {
            os[b] = odata.f0[b];
            for (int i = 0; i < odata.nv; ++i)
                if (y_full(i) != 0.0) detail::add_cells(os[b], odata.terms[i][b], y_full(i));
            lmin = std::min(lmin, detail::eig_pack(os[b]).min_eig);
        }
    }
    rep.primal_residual = std::max(0.0, -lmin);
    if (ne_in > 0) {
        Eigen::VectorXd ev = prob.eq * y_full - prob.eq_rhs;
        if (ev.size()) rep.primal_residual = std::max(rep.primal_residual, ev.cwiseAbs().maxCoeff());
    }
    // dual feasibility, multipliers, and objective against the original data;
    // on the reduced path the row multipliers only exist implicitly, so they
    // are recovered by least squares from the dual gradient
    double dres = 0.0, dobj = 0.0;
    {
        std::vector<MatrixXd> xrep(nb);
        for (int b = 0; b < nb; ++b) xrep[b] = X[b] * bscale;
        VectorXd g(prob.num_vars);
        for (int i = 0; i < prob.num_vars; ++i) {
            double t = 0.0;
            for (int b = 0; b < nb; ++b) t += detail::cell_dot(odata.terms[i][b], xrep[b]);
            g(i) = prob.objective[i] + t;
        }
        VectorXd lam_o;
        if (ne_in > 0) {
            lam_o = MatrixXd(prob.eq.transpose()).colPivHouseholderQr().solve(g);
            g -= prob.eq.transpose() * lam_o;
            rep.reduced_costs.assign(lam_o.data(), lam_o.data() + lam_o.size());
        }
        dres = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
        for (int b = 0; b < nb; ++b) dobj += (odata.f0[b].array() * xrep[b].array()).sum();
        if (ne_in > 0) dobj += lam_o.dot(prob.eq_rhs);
        rep.dual_residual = dres;
        rep.gap = std::abs(pobj - dobj);
    }
    // classify on the certified end-state quantities, not the path history
    const double gap_tol = tol::kSdpGap * std::max({1.0, std::abs(pobj), std::abs(dobj)});
    const double pres_tol = 1e-8 * std::max(1.0, dscale);
    const double dres_tol = 1e-8 * std::max(1.0, bscale);
    if (rep.gap <= gap_tol && rep.primal_residual <= pres_tol && rep.dual_residual <= dres_tol) {
        rep.status = SolveStatus::optimal;
        if (opt.log)
            *opt.log << "sdp: optimal " << rep.objective << " after " << rep.iterations
                     << " iterations, gap " << rep.gap << "\n";
    } else {
        rep.status = SolveStatus::max_iter;
        rep.note = converged ? "converged point failed certification"
                             : "no convergence within iteration limit";
    }
    return rep;
}

/// Plain text dump: header, block sizes, affine entries as
/// (block,row,col,var,coeff) with var -1 for the constant part, equality
/// rows, and the objective.
inline void sdp_dump(const SdpProblem& p, std::ostream& os) {
    os << "sdp-zoo 1\n";
    os << "vars " << p.num_vars << "\n";
    os << "blocks " << p.block_sizes.size();
    for (int s : p.block_sizes) os << " " << s;
    os << "\n";
    os << "entries " << p.entries.size() << "\n";
    char buf[96];
    for (const SdpEntry& e : p.entries) {
        std::snprintf(buf, sizeof buf, "%d %d %d %d %.17g\n", e.block, e.row, e.col, e.var, e.coeff);
        os << buf;
    }
    os << "equalities " << p.eq.rows() << "\n";
    for (int r = 0; r < p.eq.rows(); ++r) {
        int nnz = 0;
        for (int c = 0; c < p.eq.cols(); ++c)
            if (p.eq(r, c) != 0.0) ++nnz;
        os << nnz;
        for (int c = 0; c < p.eq.cols(); ++c)
            if (p.eq(r, c) != 0.0) {
                std::snprintf(buf, sizeof buf, " %d %.17g", c, p.eq(r, c));
                os << buf;
            }
        std::snprintf(buf, sizeof buf, " %.17g\n", p.eq_rhs(r));
        os << buf;
    }
    int onz = 0;
    for (double c : p.objective)
        if (c != 0.0) ++onz;
    os << "objective " << onz << "\n";
    for (std::size_t i = 0; i < p.objective.size(); ++i)
        if (p.objective[i] != 0.0) {
            std::snprintf(buf, sizeof buf, "%zu %.17g\n", i, p.objective[i]);
            os << buf;
        }
    os << "end\n";
}

inline SdpProblem sdp_restore(std::istream& is) {
    auto fail = [](const std::string& what) -> SdpProblem {
        throw validation_error("sdp restore: " + what);
    };
    std::string word;
    int version = 0;
    if (!(is >> word >> version) || word != "sdp-zoo" || version != 1) return fail("bad header");
    SdpProblem p;
    if (!(is >> word >> p.num_vars) || word != "vars") return fail("bad vars line");
    std::size_t nblocks = 0;
    if (!(is >> word >> nblocks) || word != "blocks") return fail("bad blocks line");
    p.block_sizes.resize(nblocks);
    for (std::size_t b = 0; b < nblocks; ++b)
        if (!(is >> p.block_sizes[b])) return fail("bad block size");
    std::size_t nent = 0;
    if (!(is >> word >> nent) || word != "entries") return fail("bad entries line");
    p.entries.resize(nent);
    for (std::size_t k = 0; k < nent; ++k) {
        SdpEntry& e = p.entries[k];
        if (!(is >> e.block >> e.row >> e.col >> e.var >> e.coeff)) return fail("bad entry");
    }
    long neq = 0;
    if (!(is >> word >> neq) || word != "equalities") return fail("bad equalities line");
    p.eq = Eigen::MatrixXd::Zero(neq, p.num_vars);
    p.eq_rhs = Eigen::VectorXd::Zero(neq);
    for (long r = 0; r < neq; ++r) {
        int nnz = 0;
        if (!(is >> nnz)) return fail("bad equality row");
        for (int k = 0; k < nnz; ++k) {
            int c;
            double v;
            if (!(is >> c >> v) || c < 0 || c >= p.num_vars) return fail("bad equality term");
            p.eq(r, c) = v;
        }
        if (!(is >> p.eq_rhs(r))) return fail("bad equality rhs");
    }
    std::size_t onz = 0;
    if (!(is >> word >> onz) || word != "objective") return fail("bad objective line");
    p.objective.assign(static_cast<std::size_t>(p.num_vars), 0.0);
    for (std::size_t k = 0; k < onz; ++k) {
        std::size_t i;
        double v;
        if (!(is >> i >> v) || i >= p.objective.size()) return fail("bad objective term");
        p.objective[i] = v;
    }
    if (!(is >> word) || word != "end") return fail("missing end marker");
    return p;
}

} // namespace zoo
