#pragma once

#include <string>
#include <vector>

namespace zoo {

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::max_iter: return "max-iter";
    }
    return "?";
}

/// Common result record for the LP and SDP solvers.  `primal`/`dual` hold the
/// solution vectors when status == optimal; `certificate` holds a Farkas row
/// vector (LP) or a dual improving ray (SDP) when status == infeasible.
/// `reduced_costs` carries the simplex reduced costs (LP) or the multipliers
/// of the equality rows (SDP with equalities).
struct SolveReport {
    SolveStatus status = SolveStatus::max_iter;
    double objective = 0.0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    double gap = 0.0;
    int iterations = 0;
    std::vector<double> primal;
    std::vector<double> dual;
    std::vector<double> reduced_costs;
    std::vector<double> certificate;
    std::string note;
};

} // namespace zoo
