#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "pbcbf/errors.hpp"

namespace pbcbf {

/// One inequality a^T du >= b.
struct LinearRow {
    Eigen::VectorXd a;
    double b = 0.0;
};

/// min 1/2 du^T H du  s.t.  rows,  lower <= du <= upper.
struct QpProblem {
    Eigen::MatrixXd H;
    std::vector<LinearRow> rows;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
};

struct QpSolution {
    Eigen::VectorXd du;
    double objective = 0.0;
    std::vector<std::size_t> active;  // indices into rows, then 2i / 2i+1 for box faces
};

inline constexpr double kQpFeasibilityTol = 1e-9;

namespace detail {

inline std::vector<LinearRow> all_constraints(const QpProblem& p) {
    std::vector<LinearRow> all = p.rows;
    const Eigen::Index m = p.H.rows();
    if (p.lower.size() == m && p.upper.size() == m) {
        for (Eigen::Index i = 0; i < m; ++i) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
            e[i] = 1.0;
            all.push_back({e, p.lower[i]});
            all.push_back({-e, -p.upper[i]});
        }
    }
    return all;
}

inline bool row_holds(const LinearRow& row, const Eigen::VectorXd& du) {
    return row.a.dot(du) >= row.b - kQpFeasibilityTol * (1.0 + std::abs(row.b));
}

}  // namespace detail

/// Exact small dense QP by active-set enumeration.
///
/// Every subset of at most m constraints is taken as the active set, the
/// equality-constrained KKT system is solved, and the lowest-objective point
/// that is primal feasible with nonnegative multipliers is returned. Intended
/// for m <= 3 and a handful of rows. Throws Infeasible when no candidate
/// survives.
inline QpSolution solve_small_qp(const QpProblem& problem) {
    const Eigen::Index m = problem.H.rows();
    if (problem.H.cols() != m) throw Error("solve_small_qp: H must be square");
    for (Eigen::Index i = 0; i < problem.lower.size(); ++i) {
        if (problem.lower[i] > problem.upper[i]) throw Infeasible("solve_small_qp: empty box");
    }
    const std::vector<LinearRow> cons = detail::all_constraints(problem);
    const std::size_t k = cons.size();

    QpSolution best;
    double best_obj = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> subset;

    auto try_subset = [&]() {
        const auto s = static_cast<Eigen::Index>(subset.size());
        Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + s, m + s);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + s);
        kkt.topLeftCorner(m, m) = problem.H;
        for (Eigen::Index j = 0; j < s; ++j) {
            const LinearRow& row = cons[subset[j]];
            kkt.block(0, m + j, m, 1) = -row.a;
            kkt.block(m + j, 0, 1, m) = row.a.transpose();
            rhs[m + j] = row.b;
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
        if (!lu.isInvertible()) return;
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Eigen::VectorXd du = sol.head(m);
        if (!du.allFinite()) return;
        for (Eigen::Index j = 0; j < s; ++j) {
            if (sol[m + j] < -1e-10) return;
        }
        for (const LinearRow& row : cons) {
            if (!detail::row_holds(row, du)) return;
        }
        const double obj = 0.5 * du.dot(problem.H * du);
        if (obj < best_obj) {
            best_obj = obj;
            best.du = du;
            best.objective = obj;
            best.active = subset;
        }
    };

    // Depth-first over subsets of size <= m.
    auto recurse = [&](auto&& self, std::size_t start) -> void {
        try_subset();
        if (static_cast<Eigen::Index>(subset.size()) == m) return;
        for (std::size_t i = start; i < k; ++i) {
            subset.push_back(i);
            self(self, i + 1);
            subset.pop_back();
        }
    };
    recurse(recurse, 0);

    if (best.du.size() == 0) throw Infeasible("solve_small_qp: no feasible point");
    return best;
}

}  // namespace pbcbf
