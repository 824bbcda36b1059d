#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "report.hpp"
#include "scenario.hpp"

namespace zoo {

/// Linear program in equality standard form with bounded variables:
///   maximize objective . x   subject to   eq x = rhs,  0 <= x <= upper.
/// `upper` may be empty (all variables unbounded above) or hold +infinity
/// entries for individual free-above variables.
struct LpProblem {
    Eigen::MatrixXd eq;        // m x n
    Eigen::VectorXd rhs;       // m
    Eigen::VectorXd objective; // n
    std::vector<double> upper; // empty or n entries

    int rows() const { return static_cast<int>(eq.rows()); }
    int cols() const { return static_cast<int>(eq.cols()); }

    static LpProblem make(int m, int n) {
        LpProblem p;
        p.eq = Eigen::MatrixXd::Zero(m, n);
        p.rhs = Eigen::VectorXd::Zero(m);
        p.objective = Eigen::VectorXd::Zero(n);
        return p;
    }
};

struct LpOptions {
    int max_iter = 0;           // 0: automatic cap from problem size
    std::ostream* log = nullptr;
};

namespace detail {

inline constexpr double kLpInf = std::numeric_limits<double>::infinity();

enum class VarState : unsigned char { basic, at_lower, at_upper };

/// Bounded-variable primal simplex working set: structural columns first,
/// then one artificial column per row.  The basis inverse is kept dense and
/// refactorized periodically.
struct SimplexCore {
    const Eigen::MatrixXd& A; // m x n, row-scaled
    const Eigen::VectorXd& b; // m, row-scaled, nonnegative
    int m, n;
    Eigen::VectorXd cost;     // n + m entries, current phase
    std::vector<double> ub;   // n + m entries
    std::vector<VarState> state;
    std::vector<int> basis;   // m entries, variable index per row
    Eigen::MatrixXd Binv;
    Eigen::VectorXd xB;       // basic variable values
    int iterations = 0;
    int degenerate_run = 0;
    bool bland = false;
    int freeze_from = std::numeric_limits<int>::max(); // leaving vars >= this get pinned to 0
    std::ostream* log = nullptr;
    // expanding-tolerance ratio test state
    static constexpr double kExpandDelta0 = 1e-10;
    static constexpr double kExpandTau = 2e-12;
    static constexpr double kExpandDeltaMax = 5e-9;
    double expand_delta = kExpandDelta0;

    SimplexCore(const Eigen::MatrixXd& A_, const Eigen::VectorXd& b_)
        : A(A_), b(b_), m(static_cast<int>(A_.rows())), n(static_cast<int>(A_.cols())) {
        cost = Eigen::VectorXd::Zero(n + m);
        ub.assign(n + m, kLpInf);
        state.assign(n + m, VarState::at_lower);
        basis.resize(m);
        for (int i = 0; i < m; ++i) {
            basis[i] = n + i;
            state[n + i] = VarState::basic;
        }
        Binv = Eigen::MatrixXd::Identity(m, m);
        xB = b;
    }

    Eigen::VectorXd column(int j) const {
        if (j < n) return A.col(j);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
        e(j - n) = 1.0;
        return e;
    }

    double value(int j) const {
        if (state[j] == VarState::at_lower) return 0.0;
        if (state[j] == VarState::at_upper) return ub[j];
        for (int i = 0; i < m; ++i)
            if (basis[i] == j) return xB(i);
        return 0.0;
    }

    void refactorize() {
        Eigen::MatrixXd B(m, m);
        for (int i = 0; i < m; ++i) B.col(i) = column(basis[i]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
        Binv = lu.inverse();
        if (m > 0 && !Binv.allFinite()) throw solver_error("lp: singular basis");
        recompute_basics();
    }

    void recompute_basics() {
        Eigen::VectorXd r = b;
        for (int j = 0; j < n + m; ++j)
            if (state[j] == VarState::at_upper) r -= ub[j] * column(j);
        xB = Binv * r;
    }

    Eigen::VectorXd duals() const {
        Eigen::VectorXd cB(m);
        for (int i = 0; i < m; ++i) cB(i) = cost(basis[i]);
        return Binv.transpose() * cB;
    }

    /// Maximize cost . x from the current basis.  Returns optimal/unbounded/
    /// max_iter; infeasibility is decided by the caller from phase-1 value.
    /// With `bounded` set (phase 1, whose objective cannot exceed zero), an
    /// apparent unbounded ray is treated as reduced-cost noise: the column is
    /// excluded until the next basis change instead.
    SolveStatus iterate(int max_iter, int allowed_max, bool bounded = false) {
        const double rc_tol = 1e-9;
        const double piv_tol = 1e-9;
        std::vector<char> skip(static_cast<std::size_t>(n + m), 0);
        int verified = -1; // column re-picked right after a fresh refactorize
        expand_delta = kExpandDelta0;
        while (true) {
            if (expand_delta > kExpandDeltaMax) {
                expand_delta = kExpandDelta0;
                refactorize(); // clear accumulated bound excursions
            }
            if (iterations >= max_iter) return SolveStatus::max_iter;
            Eigen::VectorXd y = duals();
            Eigen::VectorXd z = A.transpose() * y;
            int enter = -1;
            double best = rc_tol;
            for (int j = 0; j < allowed_max; ++j) {
                if (state[j] == VarState::basic) continue;
                if (ub[j] <= 0.0) continue; // fixed at zero
                if (skip[j]) continue;
                double rc = cost(j) - (j < n ? z(j) : y(j - n));
                double score = (state[j] == VarState::at_lower) ? rc : -rc;
                if (score <= rc_tol) continue;
                if (bland) { enter = j; break; }
                if (score > best) { best = score; enter = j; }
            }
            if (enter < 0) return SolveStatus::optimal;

            bool from_lower = state[enter] == VarState::at_lower;
            Eigen::VectorXd d = Binv * column(enter);
            if (!from_lower) d = -d; // entering decreases from its upper bound
            // expanding-tolerance ratio test: each blocking bound is relaxed
            // by a tolerance that grows a hair every iteration, the blocker
            // with the largest pivot element among those whose true ratio
            // does not exceed the relaxed minimum is chosen (stability), and
            // the step taken is never smaller than tau/|pivot|, so the same
            // point is never revisited and degenerate vertices cannot trap
            // the iteration.  Excursions beyond a bound stay below the
            // feasibility tolerance and are cleared at each refactorization.
            expand_delta += kExpandTau;
            auto plain_ratio = [&](int i, bool& to_upper) {
                double di = d(i);
                if (di > piv_tol) { to_upper = false; return std::max(xB(i), 0.0) / di; }
                if (di < -piv_tol && ub[basis[i]] < kLpInf) {
                    to_upper = true;
                    return std::max(ub[basis[i]] - xB(i), 0.0) / (-di);
                }
                return kLpInf;
            };
            double theta = kLpInf; // minimum of the relaxed ratios
            for (int i = 0; i < m; ++i) {
                double di = d(i);
                if (di > piv_tol) theta = std::min(theta, (xB(i) + expand_delta) / di);
                else if (di < -piv_tol && ub[basis[i]] < kLpInf)
                    theta = std::min(theta, (ub[basis[i]] - xB(i) + expand_delta) / (-di));
            }
            int leave_row = -1;
            bool leave_to_upper = false;
            double best_piv = 0.0;
            for (int i = 0; i < m; ++i) {
                bool tu;
                double pr = plain_ratio(i, tu);
                if (pr >= kLpInf || pr > theta) continue;
                if (std::abs(d(i)) > best_piv) {
                    best_piv = std::abs(d(i));
                    leave_row = i;
                    leave_to_upper = tu;
                }
            }
            double step = 0.0;
            if (leave_row >= 0) {
                bool tu;
                step = std::max(plain_ratio(leave_row, tu),
                                std::min(kExpandTau / best_piv, theta));
                if (ub[enter] < step) leave_row = -1; // entering bound blocks first
            }
            if (leave_row < 0 && ub[enter] < kLpInf) step = ub[enter];
            if (leave_row < 0 && !(ub[enter] < kLpInf)) {
                // no blocking row: either a genuine ray, or noise-level
                // reduced cost paired with sub-pivot-tolerance direction
                // entries from drifted factors.  Re-verify on fresh factors;
                // only a reconfirmed ray counts.
                if (verified != enter) {
                    refactorize();
                    verified = enter;
                    continue;
                }
                if (!bounded) return SolveStatus::unbounded;
                skip[enter] = 1;
                verified = -1;
                continue;
            }

            ++iterations;
            verified = -1;
            degenerate_run = (step < 1e-10) ? degenerate_run + 1 : 0;
            if (degenerate_run > 4096 && !bland) {
                bland = true;
                if (log) *log << "lp: switching to Bland pricing at iteration " << iterations << "\n";
            }
            if (log && iterations % 256 == 0)
                *log << "lp: iteration " << iterations << " objective " << objective_value() << "\n";

            double delta = from_lower ? step : -step;
            if (leave_row < 0) {
                // bound flip: entering traverses to its opposite bound
                xB -= delta * (Binv * column(enter));
                state[enter] = from_lower ? VarState::at_upper : VarState::at_lower;
                continue;
            }
            int leave = basis[leave_row];
            std::fill(skip.begin(), skip.end(), 0); // reduced costs change
            // update basic values, then pivot the basis inverse
            Eigen::VectorXd dcol = Binv * column(enter);
            xB -= delta * dcol;
            double enter_val = from_lower ? step : ub[enter] - step;
            state[leave] = leave_to_upper ? VarState::at_upper : VarState::at_lower;
            if (leave >= freeze_from) { ub[leave] = 0.0; state[leave] = VarState::at_lower; }
            state[enter] = VarState::basic;
            basis[leave_row] = enter;
            double piv = dcol(leave_row);
            Binv.row(leave_row) /= piv;
            for (int i = 0; i < m; ++i) {
                if (i == leave_row) continue;
                double f = dcol(i);
                if (f != 0.0) Binv.row(i) -= f * Binv.row(leave_row);
            }
            xB(leave_row) = enter_val;
            if (iterations % 64 == 0 || std::abs(piv) < 1e-6) refactorize();
        }
    }

    double objective_value() const {
        double v = 0.0;
        for (int i = 0; i < m; ++i) v += cost(basis[i]) * xB(i);
        for (int j = 0; j < n + m; ++j)
            if (state[j] == VarState::at_upper) v += cost(j) * ub[j];
        return v;
    }
};

} // namespace detail

/// Two-phase dense revised simplex.  Presolve removes linearly dependent
/// rows; an inconsistent dependency yields an immediate Farkas certificate in
/// the original row coordinates.  Certificates from an infeasible phase 1 are
/// likewise mapped back to original rows.
inline SolveReport lp_solve(const LpProblem& p, const LpOptions& opt = {}) {
    using detail::kLpInf;
    const int m = p.rows(), n = p.cols();
    if (p.rhs.size() != m || p.objective.size() != n)
        throw validation_error("lp_solve: inconsistent dimensions");
    if (!p.upper.empty() && static_cast<int>(p.upper.size()) != n)
        throw validation_error("lp_solve: bad upper bound count");
    if (!p.eq.allFinite() || !p.rhs.allFinite() || !p.objective.allFinite())
        throw validation_error("lp_solve: non-finite data");
    std::vector<double> upper = p.upper.empty() ? std::vector<double>(n, kLpInf) : p.upper;
    for (double u : upper)
        if (u < 0.0 || std::isnan(u)) throw validation_error("lp_solve: negative upper bound");

    SolveReport rep;
    // row scaling (and sign flips so scaled rhs is nonnegative)
    Eigen::VectorXd rscale = Eigen::VectorXd::Ones(m);
    Eigen::MatrixXd As(m, n);
    Eigen::VectorXd bs(m);
    std::vector<int> zero_rows;
    for (int i = 0; i < m; ++i) {
        double mx = m > 0 && n > 0 ? p.eq.row(i).cwiseAbs().maxCoeff() : 0.0;
        if (mx <= 1e-14) {
            if (std::abs(p.rhs(i)) > tol::kLpFeas) {
                rep.status = SolveStatus::infeasible;
                rep.certificate.assign(m, 0.0);
                rep.certificate[i] = p.rhs(i) > 0 ? 1.0 : -1.0;
                rep.note = "zero row with nonzero rhs";
                return rep;
            }
            zero_rows.push_back(i);
            mx = 1.0;
        }
        double s = (p.rhs(i) < 0 ? -1.0 : 1.0) / mx;
        rscale(i) = s;
        As.row(i) = s * p.eq.row(i);
        bs(i) = s * p.rhs(i);
    }
    double cscale = std::max(1.0, n > 0 ? p.objective.cwiseAbs().maxCoeff() : 1.0);
    Eigen::VectorXd cs = p.objective / cscale;

    // rank presolve: keep a maximal independent row set
    std::vector<int> keep;
    if (m > 0 && n > 0) {
        std::vector<char> drop(m, 0);
        for (int i : zero_rows) drop[i] = 1;
        Eigen::MatrixXd At(n, m);
        for (int i = 0; i < m; ++i) At.col(i) = As.row(i).transpose();
        Eigen::FullPivLU<Eigen::MatrixXd> lu(At);
        lu.setThreshold(1e-10);
        int rank = static_cast<int>(lu.rank());
        const auto& perm = lu.permutationQ().indices();
        std::vector<char> in_keep(m, 0);
        for (int k = 0; k < rank; ++k)
            if (!drop[perm(k)]) in_keep[perm(k)] = 1;
        for (int i = 0; i < m; ++i)
            if (in_keep[i]) keep.push_back(i);
        // consistency of dropped rows: a_d = A_K^T lambda must extend to rhs
        if (static_cast<int>(keep.size()) < m) {
            Eigen::MatrixXd AK(keep.size(), n);
            Eigen::VectorXd bK(keep.size());
            for (std::size_t k = 0; k < keep.size(); ++k) {
                AK.row(k) = As.row(keep[k]);
                bK(k) = bs(keep[k]);
            }
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(AK.transpose());
            for (int i = 0; i < m; ++i) {
                if (in_keep[i] || drop[i]) continue;
                Eigen::VectorXd lam = qr.solve(As.row(i).transpose());
                double res = (AK.transpose() * lam - As.row(i).transpose()).cwiseAbs().maxCoeff();
                if (res > 1e-7) continue; // numerically independent after all: keep it
                if (std::abs(bs(i) - lam.dot(bK)) > tol::kLpFeas) {
                    rep.status = SolveStatus::infeasible;
                    rep.certificate.assign(m, 0.0);
                    rep.certificate[i] = rscale(i);
                    for (std::size_t k = 0; k < keep.size(); ++k)
                        rep.certificate[keep[k]] = -lam(k) * rscale(keep[k]);
                    if (bs(i) - lam.dot(bK) < 0)
                        for (double& v : rep.certificate) v = -v;
                    rep.note = "inconsistent dependent row";
                    return rep;
                }
            }
        }
    }
    const int mr = static_cast<int>(keep.size());
    Eigen::MatrixXd Ar(mr, n);
    Eigen::VectorXd br(mr);
    for (int k = 0; k < mr; ++k) {
        Ar.row(k) = As.row(keep[k]);
        br(k) = bs(keep[k]);
    }

    detail::SimplexCore core(Ar, br);
    core.log = opt.log;
    core.freeze_from = n; // artificials never re-enter once driven out
    for (int j = 0; j < n; ++j) core.ub[j] = upper[j];
    int cap = opt.max_iter > 0 ? opt.max_iter : 200 * (mr + n) + 20000;

    // phase 1: maximize -(sum of artificials), bounded above by zero
    for (int i = 0; i < mr; ++i) core.cost(n + i) = -1.0;
    SolveStatus st = core.iterate(cap, n + mr, /*bounded=*/true);
    rep.iterations = core.iterations;
    if (st == SolveStatus::max_iter) {
        rep.status = st;
        rep.note = "iteration cap in phase 1";
        return rep;
    }
    if (st == SolveStatus::unbounded) throw solver_error("lp_solve: phase-1 breakdown");
    double infeas = -core.objective_value();
    if (infeas > tol::kLpFeas * std::max(1.0, bs.size() ? bs.cwiseAbs().maxCoeff() : 1.0)) {
        rep.status = SolveStatus::infeasible;
        Eigen::VectorXd y = core.duals(); // for the phase-1 costs
        rep.certificate.assign(m, 0.0);
        for (int k = 0; k < mr; ++k) rep.certificate[keep[k]] = -y(k) * rscale(keep[k]);
        rep.note = "phase-1 optimum positive";
        return rep;
    }
    // drive remaining artificials out of the basis at value zero
    for (int i = 0; i < mr; ++i) {
        if (core.basis[i] < n) continue;
        int pivot_col = -1;
        for (int j = 0; j < n; ++j) {
            if (core.state[j] == detail::VarState::basic) continue;
            double d = core.Binv.row(i).dot(core.column(j));
            if (std::abs(d) > 1e-7) { pivot_col = j; break; }
        }
        if (pivot_col < 0) { core.ub[core.basis[i]] = 0.0; continue; }
        // zero-step pivot: the artificial leaves at value 0
        int art = core.basis[i];
        Eigen::VectorXd dcol = core.Binv * core.column(pivot_col);
        double piv = dcol(i);
        core.state[art] = detail::VarState::at_lower;
        core.state[pivot_col] = detail::VarState::basic;
        core.basis[i] = pivot_col;
        core.Binv.row(i) /= piv;
        for (int r2 = 0; r2 < mr; ++r2) {
            if (r2 == i) continue;
            double f = dcol(r2);
            if (f != 0.0) core.Binv.row(r2) -= f * core.Binv.row(i);
        }
        core.recompute_basics();
    }
    for (int i = 0; i < mr; ++i) core.ub[n + i] = 0.0; // artificials stay at zero
    core.refactorize();

    // phase 2: the real objective
    core.cost.setZero();
    core.cost.head(n) = cs;
    core.bland = false;
    core.degenerate_run = 0;
    st = core.iterate(cap, n);
    rep.iterations = core.iterations;
    if (st == SolveStatus::max_iter) {
        rep.status = st;
        rep.note = "iteration cap in phase 2";
        return rep;
    }
    if (st == SolveStatus::unbounded) {
        rep.status = st;
        return rep;
    }
    core.refactorize();

    // assemble solution in original coordinates
    rep.status = SolveStatus::optimal;
    rep.primal.assign(n, 0.0);
    for (int j = 0; j < n; ++j) rep.primal[j] = core.value(j);
    Eigen::VectorXd yr = core.duals();
    rep.dual.assign(m, 0.0);
    for (int k = 0; k < mr; ++k) rep.dual[keep[k]] = yr(k) * rscale(keep[k]) * cscale;
    rep.reduced_costs.assign(n, 0.0);
    Eigen::Map<Eigen::VectorXd> x(rep.primal.data(), n);
    Eigen::Map<Eigen::VectorXd> y(rep.dual.data(), m);
    Eigen::VectorXd rc = p.objective - p.eq.transpose() * y;
    for (int j = 0; j < n; ++j) rep.reduced_costs[j] = rc(j);
    rep.objective = p.objective.dot(x);

    double prim_res = m > 0 ? (p.eq * x - p.rhs).cwiseAbs().maxCoeff() : 0.0;
    for (int j = 0; j < n; ++j) {
        prim_res = std::max(prim_res, -x(j));
        if (upper[j] < kLpInf) prim_res = std::max(prim_res, x(j) - upper[j]);
    }
    double dual_res = 0.0, dual_obj = y.dot(p.rhs);
    for (int j = 0; j < n; ++j) {
        bool at_up = upper[j] < kLpInf && x(j) > upper[j] - 1e-7;
        bool at_lo = x(j) < 1e-7;
        if (upper[j] < kLpInf) dual_obj += upper[j] * std::max(rc(j), 0.0);
        if (at_up && at_lo) continue;           // fixed variable: any sign
        if (at_lo) dual_res = std::max(dual_res, rc(j));            // want rc <= 0
        else if (at_up) dual_res = std::max(dual_res, -rc(j));      // want rc >= 0
        else dual_res = std::max(dual_res, std::abs(rc(j)));
    }
    rep.primal_residual = prim_res;
    rep.dual_residual = std::max(0.0, dual_res);
    rep.gap = std::abs(rep.objective - dual_obj);
    if (!std::isfinite(rep.objective) || !std::isfinite(prim_res) || !std::isfinite(dual_res))
        throw solver_error("lp_solve: numerical breakdown");
    if (opt.log)
        *opt.log << "lp: optimal " << rep.objective << " after " << rep.iterations
                 << " iterations, gap " << rep.gap << "\n";
    return rep;
}

} // namespace zoo
