#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "box.hpp"
#include "moments.hpp"
#include "scenario.hpp"

namespace zoo {

namespace detail {

inline Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd r(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return r;
}

/// Random projective measurement: eigenvectors of a random Hermitian matrix
/// distributed round-robin over the outcomes.
inline std::vector<Eigen::MatrixXcd> random_projective(int dim, int outcomes,
                                                       std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::MatrixXcd h(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) h(i, j) = std::complex<double>(g(rng), g(rng));
    h = (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    std::vector<Eigen::MatrixXcd> proj(static_cast<std::size_t>(outcomes),
                                       Eigen::MatrixXcd::Zero(dim, dim));
    for (int j = 0; j < dim; ++j) {
        Eigen::VectorXcd u = es.eigenvectors().col(j);
        proj[static_cast<std::size_t>(j % outcomes)] += u * u.adjoint();
    }
    return proj;
}

} // namespace detail

/// Projective tensor-product strategy: a pure state on the product of the
/// party spaces and one projector per (party, input, outcome).
struct QuantumStrategy {
    Scenario scenario;
    std::vector<int> dims;
    Eigen::VectorXcd state;
    std::vector<std::vector<std::vector<Eigen::MatrixXcd>>> proj; // [party][input][outcome]
};

inline QuantumStrategy random_quantum_strategy(const Scenario& sc, int local_dim,
                                               std::mt19937_64& rng) {
    if (local_dim < 2 || local_dim > 4)
        throw validation_error("oracle: local dimension must be between 2 and 4");
    QuantumStrategy qs;
    qs.scenario = sc;
    qs.dims.assign(static_cast<std::size_t>(sc.parties()), local_dim);
    long total = 1;
    for (int d : qs.dims) total *= d;
    std::normal_distribution<double> g;
    qs.state.resize(total);
    for (long i = 0; i < total; ++i) qs.state(i) = std::complex<double>(g(rng), g(rng));
    qs.state.normalize();
    qs.proj.resize(static_cast<std::size_t>(sc.parties()));
    for (int p = 0; p < sc.parties(); ++p) {
        qs.proj[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(sc.inputs(p)));
        for (int x = 0; x < sc.inputs(p); ++x)
            qs.proj[static_cast<std::size_t>(p)][static_cast<std::size_t>(x)] =
                detail::random_projective(local_dim, sc.outputs(p), rng);
    }
    return qs;
}

/// Two-qubit strategy at the known quantum maximum of the two-input
/// correlator functional: Z/X on one side, rotated by 45 degrees on the
/// other, on a maximally entangled state.
inline QuantumStrategy tsirelson_strategy() {
    QuantumStrategy qs;
    qs.scenario = Scenario::uniform(2, 2, 2);
    qs.dims = {2, 2};
    qs.state.resize(4);
    qs.state << 1.0 / std::sqrt(2.0), 0.0, 0.0, 1.0 / std::sqrt(2.0);
    Eigen::MatrixXcd z(2, 2), x(2, 2), id = Eigen::MatrixXcd::Identity(2, 2);
    z << 1, 0, 0, -1;
    x << 0, 1, 1, 0;
    const double s = 1.0 / std::sqrt(2.0);
    std::vector<Eigen::MatrixXcd> obs_a = {z, x};
    std::vector<Eigen::MatrixXcd> obs_b = {s * (z + x), s * (z - x)};
    qs.proj.resize(2);
    for (int p = 0; p < 2; ++p)
        for (int in = 0; in < 2; ++in) {
            const Eigen::MatrixXcd& o = (p == 0 ? obs_a : obs_b)[static_cast<std::size_t>(in)];
            qs.proj[static_cast<std::size_t>(p)].push_back(
                {0.5 * (id + o), 0.5 * (id - o)}); // outcome 0 is the +1 branch
        }
    return qs;
}

/// True moment of a party-sorted word: expectation of the tensor product of
/// each party's operator chain.  The imaginary part is discarded; the
/// real-symmetric relaxation only constrains real parts.
inline double moment_value(const QuantumStrategy& qs, const std::vector<OpSymbol>& word) {
    Eigen::MatrixXcd full(1, 1);
    full(0, 0) = 1.0;
    for (int p = 0; p < qs.scenario.parties(); ++p) {
        const int d = qs.dims[static_cast<std::size_t>(p)];
        Eigen::MatrixXcd op = Eigen::MatrixXcd::Identity(d, d);
        for (const OpSymbol& s : word)
            if (s.party == p)
                op = (op * qs.proj[static_cast<std::size_t>(p)][static_cast<std::size_t>(s.input)]
                                  [static_cast<std::size_t>(s.outcome)])
                         .eval();
        full = detail::kron(full, op);
    }
    const std::complex<double> v = qs.state.adjoint() * full * qs.state;
    return v.real();
}

inline Box strategy_box(const QuantumStrategy& qs) {
    const Scenario& sc = qs.scenario;
    std::vector<double> table(sc.table_size());
    for (std::size_t xi = 0; xi < sc.joint_inputs(); ++xi) {
        auto x = sc.unpack_inputs(xi);
        for (std::size_t oi = 0; oi < sc.joint_outcomes(); ++oi) {
            auto a = sc.unpack_outcomes(oi);
            std::vector<OpSymbol> w;
            for (int p = 0; p < sc.parties(); ++p) w.push_back({p, x[p], a[p]});
            table[sc.flat(xi, oi)] = std::max(0.0, moment_value(qs, w));
        }
    }
    return Box(sc, std::move(table));
}

/// Single-algebra strategy: every measurement acts on one space and the
/// state is the normalized trace.
struct TracialStrategy {
    Scenario scenario;
    int dim = 2;
    std::vector<std::vector<std::vector<Eigen::MatrixXcd>>> proj; // [party][input][outcome]
};

inline TracialStrategy random_tracial_strategy(const Scenario& sc, int dim,
                                               std::mt19937_64& rng) {
    if (dim < 2 || dim > 4) throw validation_error("oracle: dimension must be between 2 and 4");
    TracialStrategy ts;
    ts.scenario = sc;
    ts.dim = dim;
    ts.proj.resize(static_cast<std::size_t>(sc.parties()));
    for (int p = 0; p < sc.parties(); ++p) {
        ts.proj[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(sc.inputs(p)));
        for (int x = 0; x < sc.inputs(p); ++x)
            ts.proj[static_cast<std::size_t>(p)][static_cast<std::size_t>(x)] =
                detail::random_projective(dim, sc.outputs(p), rng);
    }
    return ts;
}

inline double tracial_moment_value(const TracialStrategy& ts, const std::vector<OpSymbol>& word) {
    Eigen::MatrixXcd op = Eigen::MatrixXcd::Identity(ts.dim, ts.dim);
    for (const OpSymbol& s : word)
        op = (op * ts.proj[static_cast<std::size_t>(s.party)][static_cast<std::size_t>(s.input)]
                          [static_cast<std::size_t>(s.outcome)])
                 .eval();
    return op.trace().real() / static_cast<double>(ts.dim);
}

inline Box tracial_box(const TracialStrategy& ts) {
    const Scenario& sc = ts.scenario;
    std::vector<double> table(sc.table_size());
    for (std::size_t xi = 0; xi < sc.joint_inputs(); ++xi) {
        auto x = sc.unpack_inputs(xi);
        for (std::size_t oi = 0; oi < sc.joint_outcomes(); ++oi) {
            auto a = sc.unpack_outcomes(oi);
            std::vector<OpSymbol> w;
            for (int p = 0; p < sc.parties(); ++p) w.push_back({p, x[p], a[p]});
            table[sc.flat(xi, oi)] = std::max(0.0, tracial_moment_value(ts, w));
        }
    }
    return Box(sc, std::move(table));
}

/// Evaluate each moment variable at its representative word.
inline std::vector<double> moment_vector(
    const MomentProblem& mp, const std::function<double(const std::vector<OpSymbol>&)>& value) {
    std::vector<double> v;
    v.reserve(mp.rep.size());
    for (const auto& w : mp.rep) v.push_back(value(w));
    return v;
}

struct OracleCheck {
    bool feasible = false;
    double min_eigenvalue = 0.0;  // most negative block eigenvalue, 0 if none
    double equality_violation = 0.0;
};

/// Plug a concrete moment vector into every compiled block and equality.
inline OracleCheck check_moment_vector(const MomentProblem& mp, const std::vector<double>& v,
                                       double psd_tol = 1e-9, double eq_tol = 1e-10) {
    if (v.size() != mp.rep.size())
        throw validation_error("oracle: moment vector length mismatch");
    if (mp.prob.num_vars != static_cast<int>(mp.rep.size()))
        throw validation_error("oracle: problem carries extra non-moment variables");
    OracleCheck oc;
    const std::size_t nb = mp.prob.block_sizes.size();
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(nb);
    for (int s : mp.prob.block_sizes) blocks.push_back(Eigen::MatrixXd::Zero(s, s));
    for (const SdpEntry& e : mp.prob.entries) {
        const double val = e.var < 0 ? e.coeff : e.coeff * v[static_cast<std::size_t>(e.var)];
        blocks[static_cast<std::size_t>(e.block)](e.row, e.col) += val;
        if (e.row != e.col) blocks[static_cast<std::size_t>(e.block)](e.col, e.row) += val;
    }
    double lmin = 0.0;
    for (const auto& b : blocks) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b, Eigen::EigenvaluesOnly);
        lmin = std::min(lmin, es.eigenvalues()(0));
    }
    oc.min_eigenvalue = lmin;
    if (mp.prob.eq.rows() > 0) {
        Eigen::Map<const Eigen::VectorXd> vm(v.data(), static_cast<Eigen::Index>(v.size()));
        oc.equality_violation =
            (mp.prob.eq * vm - mp.prob.eq_rhs).cwiseAbs().maxCoeff();
    }
    oc.feasible = lmin >= -psd_tol && oc.equality_violation <= eq_tol;
    return oc;
}

/// Feasibility of the true moments of a strategy in a compiled problem.
inline OracleCheck quantum_oracle_feasibility(const MomentProblem& mp, const QuantumStrategy& qs,
                                              double psd_tol = 1e-9, double eq_tol = 1e-10) {
    if (mp.mode != AlgebraMode::commuting)
        throw validation_error("oracle: tensor strategies feed the commuting relaxation");
    auto v = moment_vector(mp, [&](const std::vector<OpSymbol>& w) { return moment_value(qs, w); });
    return check_moment_vector(mp, v, psd_tol, eq_tol);
}

inline OracleCheck quantum_oracle_feasibility(const MomentProblem& mp, const TracialStrategy& ts,
                                              double psd_tol = 1e-9, double eq_tol = 1e-10) {
    if (mp.mode != AlgebraMode::tracial)
        throw validation_error("oracle: trace strategies feed the tracial relaxation");
    auto v = moment_vector(
        mp, [&](const std::vector<OpSymbol>& w) { return tracial_moment_value(ts, w); });
    return check_moment_vector(mp, v, psd_tol, eq_tol);
}

} // namespace zoo
