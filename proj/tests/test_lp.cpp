#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "zoo/boxes.hpp"
#include "zoo/functional.hpp"
#include "zoo/lp.hpp"

using namespace zoo;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

// exact optimum by vertex enumeration: basic sets of size m, nonbasics at a bound
double brute_force_max(const LpProblem& p) {
    int m = p.rows(), n = p.cols();
    double best = -kInf;
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<int> comb;
    std::function<void(int, int)> rec = [&](int start, int need) {
        if (need == 0) {
            std::vector<int> nonbasic;
            for (int j : idx)
                if (std::find(comb.begin(), comb.end(), j) == comb.end()) nonbasic.push_back(j);
            int nn = static_cast<int>(nonbasic.size());
            for (int mask = 0; mask < (1 << nn); ++mask) {
                Eigen::VectorXd xN(nn);
                for (int t = 0; t < nn; ++t)
                    xN(t) = (mask >> t & 1) ? p.upper[nonbasic[t]] : 0.0;
                if (!xN.allFinite()) continue;
                Eigen::VectorXd r = p.rhs;
                for (int t = 0; t < nn; ++t) r -= xN(t) * p.eq.col(nonbasic[t]);
                Eigen::MatrixXd B(m, comb.size());
                for (std::size_t t = 0; t < comb.size(); ++t) B.col(t) = p.eq.col(comb[t]);
                Eigen::VectorXd xB = B.fullPivLu().solve(r);
                if ((B * xB - r).cwiseAbs().maxCoeff() > 1e-9) continue;
                bool ok = true;
                for (std::size_t t = 0; t < comb.size(); ++t) {
                    double v = xB(t);
                    if (v < -1e-9 || v > p.upper[comb[t]] + 1e-9) ok = false;
                }
                if (!ok) continue;
                double val = 0.0;
                for (std::size_t t = 0; t < comb.size(); ++t) val += p.objective(comb[t]) * xB(t);
                for (int t = 0; t < nn; ++t) val += p.objective(nonbasic[t]) * xN(t);
                best = std::max(best, val);
            }
            return;
        }
        if (start >= n) return;
        comb.push_back(start);
        rec(start + 1, need - 1);
        comb.pop_back();
        rec(start + 1, need);
    };
    rec(0, std::min(m, n));
    return best;
}
} // namespace

TEST_CASE("lp trivial bound maximization") {
    // max x with x <= 1 as a pure bound
    LpProblem p = LpProblem::make(0, 1);
    p.objective(0) = 1.0;
    p.upper = {1.0};
    SolveReport r = lp_solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    REQUIRE(r.objective == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(r.primal[0] == Catch::Approx(1.0).margin(1e-9));

    // the same with an explicit slack row x + s = 1
    LpProblem q = LpProblem::make(1, 2);
    q.eq << 1.0, 1.0;
    q.rhs << 1.0;
    q.objective << 1.0, 0.0;
    SolveReport r2 = lp_solve(q);
    REQUIRE(r2.status == SolveStatus::optimal);
    REQUIRE(r2.objective == Catch::Approx(1.0).margin(1e-9));
    REQUIRE(r2.gap <= 1e-7);
    REQUIRE(r2.primal_residual <= 1e-8);
    REQUIRE(r2.dual_residual <= 1e-8);
}

TEST_CASE("lp unbounded and infeasible statuses") {
    LpProblem p = LpProblem::make(0, 1);
    p.objective(0) = 2.0;
    REQUIRE(lp_solve(p).status == SolveStatus::unbounded);

    LpProblem q = LpProblem::make(1, 2);
    q.eq << 1.0, 1.0;
    q.rhs << -1.0;
    SolveReport r = lp_solve(q);
    REQUIRE(r.status == SolveStatus::infeasible);
    // Farkas vector: y.b > 0 and A^T y <= 0
    REQUIRE(r.certificate.size() == 1);
    double yb = r.certificate[0] * q.rhs(0);
    REQUIRE(yb > 1e-10);
    REQUIRE(r.certificate[0] * q.eq(0, 0) <= 1e-10);
    REQUIRE(r.certificate[0] * q.eq(0, 1) <= 1e-10);
}

TEST_CASE("lp redundant and inconsistent rows") {
    LpProblem p = LpProblem::make(3, 2);
    p.eq << 1, 1, 2, 2, 1, 0;
    p.rhs << 1, 2, 0.25;
    p.objective << 0.0, 1.0;
    SolveReport r = lp_solve(p); // row 2 = 2x row 1: consistent, dropped
    REQUIRE(r.status == SolveStatus::optimal);
    REQUIRE(r.objective == Catch::Approx(0.75).margin(1e-9));
    REQUIRE(r.dual.size() == 3);

    p.rhs << 1, 3, 0.25; // now rows 1 and 2 conflict
    SolveReport bad = lp_solve(p);
    REQUIRE(bad.status == SolveStatus::infeasible);
    Eigen::Map<Eigen::VectorXd> y(bad.certificate.data(), 3);
    REQUIRE((p.eq.transpose() * y).cwiseAbs().maxCoeff() <= 1e-7);
    REQUIRE(y.dot(p.rhs) > 1e-9);
}

TEST_CASE("lp random instances against vertex enumeration") {
    std::mt19937_64 rng(20260823);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
        int m = 1 + static_cast<int>(rng() % 3);
        int n = m + 1 + static_cast<int>(rng() % 3);
        LpProblem p = LpProblem::make(m, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) p.eq(i, j) = unif(rng);
        p.upper.assign(n, 0.0);
        Eigen::VectorXd x0(n);
        for (int j = 0; j < n; ++j) {
            p.upper[j] = 0.5 + std::abs(unif(rng));
            x0(j) = p.upper[j] * std::abs(unif(rng));
        }
        p.rhs = p.eq * x0; // feasible by construction
        for (int j = 0; j < n; ++j) p.objective(j) = unif(rng);
        SolveReport r = lp_solve(p);
        REQUIRE(r.status == SolveStatus::optimal);
        double exact = brute_force_max(p);
        REQUIRE(r.objective == Catch::Approx(exact).margin(1e-6));
        REQUIRE(r.gap <= 1e-7);
        REQUIRE(r.primal_residual <= 1e-8);
        REQUIRE(r.dual_residual <= 1e-8);
    }
}

TEST_CASE("lp scale robustness") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    LpProblem p = LpProblem::make(2, 5);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 5; ++j) p.eq(i, j) = unif(rng);
    Eigen::VectorXd x0(5);
    p.upper.assign(5, 1.0);
    for (int j = 0; j < 5; ++j) x0(j) = 0.5 * std::abs(unif(rng));
    p.rhs = p.eq * x0;
    for (int j = 0; j < 5; ++j) p.objective(j) = unif(rng);
    double base = lp_solve(p).objective;
    p.objective *= 1e3;
    double scaled = lp_solve(p).objective;
    REQUIRE(scaled == Catch::Approx(1e3 * base).epsilon(1e-6));
}

TEST_CASE("lp degenerate cycling example terminates") {
    // classic cycling-prone tableau; optimum 1/20 in maximization form
    LpProblem p = LpProblem::make(2, 6);
    p.eq << 0.25, -60.0, -1.0 / 25.0, 9.0, 1.0, 0.0,
            0.5,  -90.0, -1.0 / 50.0, 3.0, 0.0, 1.0;
    p.rhs << 0.0, 0.0;
    p.objective << 0.75, -150.0, 1.0 / 50.0, -6.0, 0.0, 0.0;
    p.upper = {kInf, kInf, 1.0, kInf, kInf, kInf};
    SolveReport r = lp_solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    REQUIRE(r.objective == Catch::Approx(0.05).margin(1e-9));
}

TEST_CASE("lp no-signalling chsh maximum") {
    // variables P(ab|xy), flat index (2x+y)*4 + (2a+b)
    BellFunctional chsh = chsh_functional();
    LpProblem p = LpProblem::make(12, 16);
    int row = 0;
    for (int xy = 0; xy < 4; ++xy, ++row) {
        for (int o = 0; o < 4; ++o) p.eq(row, xy * 4 + o) = 1.0;
        p.rhs(row) = 1.0;
    }
    for (int x = 0; x < 2; ++x)
        for (int a = 0; a < 2; ++a, ++row)
            for (int b = 0; b < 2; ++b) {
                p.eq(row, (2 * x + 1) * 4 + 2 * a + b) += 1.0;
                p.eq(row, (2 * x + 0) * 4 + 2 * a + b) -= 1.0;
            }
    for (int y = 0; y < 2; ++y)
        for (int b = 0; b < 2; ++b, ++row)
            for (int a = 0; a < 2; ++a) {
                p.eq(row, (2 * 1 + y) * 4 + 2 * a + b) += 1.0;
                p.eq(row, (2 * 0 + y) * 4 + 2 * a + b) -= 1.0;
            }
    for (int k = 0; k < 16; ++k) p.objective(k) = chsh.coeffs[k];
    SolveReport r = lp_solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    REQUIRE(r.objective == Catch::Approx(4.0).margin(1e-8));
}

TEST_CASE("lp local membership of pr yields separating functional") {
    Scenario sc = Scenario::uniform(2, 2, 2);
    Box pr = pr_box();
    std::vector<Box> dets;
    for (int f0 = 0; f0 < 2; ++f0)
        for (int f1 = 0; f1 < 2; ++f1)
            for (int g0 = 0; g0 < 2; ++g0)
                for (int g1 = 0; g1 < 2; ++g1)
                    dets.push_back(deterministic_box(sc, {{f0, f1}, {g0, g1}}));
    LpProblem p = LpProblem::make(17, 16);
    for (int k = 0; k < 16; ++k) {
        for (int e = 0; e < 16; ++e) p.eq(e, k) = dets[k].table()[e];
        p.eq(16, k) = 1.0;
    }
    for (int e = 0; e < 16; ++e) p.rhs(e) = pr.table()[e];
    p.rhs(16) = 1.0;
    SolveReport r = lp_solve(p);
    REQUIRE(r.status == SolveStatus::infeasible);
    REQUIRE(r.certificate.size() == 17);
    // induced Bell functional separates PR from every deterministic box
    double on_pr = r.certificate[16];
    for (int e = 0; e < 16; ++e) on_pr += r.certificate[e] * pr.table()[e];
    REQUIRE(on_pr > 1e-9);
    for (int k = 0; k < 16; ++k) {
        double on_det = r.certificate[16];
        for (int e = 0; e < 16; ++e) on_det += r.certificate[e] * dets[k].table()[e];
        REQUIRE(on_det <= 1e-9);
    }
}

TEST_CASE("lp iteration cap reports max-iter") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    LpProblem p = LpProblem::make(4, 12);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 12; ++j) p.eq(i, j) = unif(rng);
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(12, 0.3);
    p.rhs = p.eq * x0;
    for (int j = 0; j < 12; ++j) p.objective(j) = unif(rng);
    p.upper.assign(12, 1.0);
    LpOptions opt;
    opt.max_iter = 1;
    REQUIRE(lp_solve(p, opt).status == SolveStatus::max_iter);
}

TEST_CASE("lp deterministic reports") {
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    LpProblem p = LpProblem::make(3, 8);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 8; ++j) p.eq(i, j) = unif(rng);
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(8, 0.25);
    p.rhs = p.eq * x0;
    for (int j = 0; j < 8; ++j) p.objective(j) = unif(rng);
    p.upper.assign(8, 2.0);
    SolveReport a = lp_solve(p), b = lp_solve(p);
    REQUIRE(a.objective == b.objective);
    REQUIRE(a.iterations == b.iterations);
    REQUIRE(a.primal == b.primal);
    REQUIRE(a.dual == b.dual);
}

TEST_CASE("lp edge shapes") {
    LpProblem p = LpProblem::make(0, 0);
    SolveReport r = lp_solve(p);
    REQUIRE(r.status == SolveStatus::optimal);
    REQUIRE(r.objective == 0.0);

    LpProblem q = LpProblem::make(1, 0);
    q.rhs << 0.5;
    REQUIRE(lp_solve(q).status == SolveStatus::infeasible);
    q.rhs << 0.0;
    REQUIRE(lp_solve(q).status == SolveStatus::optimal);

    // fixed variable via zero upper bound
    LpProblem f = LpProblem::make(1, 2);
    f.eq << 1.0, 1.0;
    f.rhs << 0.5;
    f.objective << 3.0, 1.0;
    f.upper = {0.0, 1.0};
    SolveReport rf = lp_solve(f);
    REQUIRE(rf.status == SolveStatus::optimal);
    REQUIRE(rf.objective == Catch::Approx(0.5).margin(1e-9));
}
