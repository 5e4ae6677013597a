#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbcbf/barrier.hpp"
#include "pbcbf/errors.hpp"
#include "pbcbf/policy.hpp"
#include "pbcbf/predictor.hpp"
#include "pbcbf/qp.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf {

enum class FilterMode { None, Base, PredictionBased };

inline const char* to_string(FilterMode mode) {
    switch (mode) {
        case FilterMode::None: return "none";
        case FilterMode::Base: return "base";
        default: return "pb";
    }
}

struct FilterConfig {
    Eigen::MatrixXd H;  // empty means identity
    ClassKappa kappa = ClassKappa::linear(1.0);
    double dt_prediction = kDefaultPredictionDt;
    double t_max_prediction = kDefaultPredictionHorizon;
    FilterMode mode = FilterMode::PredictionBased;

    /// Checks H (symmetric, positive definite) for an m-input system.
    void validate(Eigen::Index m) const {
        if (H.size() == 0) return;
        if (H.rows() != m || H.cols() != m) throw Error("FilterConfig: H has wrong shape");
        if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
            throw Error("FilterConfig: H is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H);
        if (!(eig.eigenvalues().minCoeff() > 0.0)) {
            throw Error("FilterConfig: H is not positive definite");
        }
        if (!(dt_prediction > 0.0) || !(t_max_prediction > 0.0)) {
            throw Error("FilterConfig: prediction step and horizon must be positive");
        }
    }

    Eigen::MatrixXd weight(Eigen::Index m) const {
        return H.size() == 0 ? Eigen::MatrixXd::Identity(m, m) : H;
    }
};

enum class QpStatus { Solved = 0, Infeasible = 1, Bypassed = 2 };

struct BarrierReport {
    double h = 0.0;
    double delta_h = 0.0;
    double T = 0.0;
    double rate_u0 = 0.0;  // h_dot(x, u0) under the barrier's own policy (PB mode)
    bool active = false;
};

struct FilterDiagnostics {
    std::vector<BarrierReport> barriers;
    std::optional<std::size_t> active;
    QpStatus status = QpStatus::Bypassed;
    bool filter_on = false;
    bool projected = false;      // norm-ball projection changed u*
    bool row_violated = false;   // a barrier row does not hold at u*
    InputVector u0;              // stopping policy of the active barrier (PB mode)
    std::vector<LinearRow> rows;  // barrier rows in du = u* - u
};

struct FilterOutput {
    InputVector u;
    FilterDiagnostics diagnostics;
};

/// Row of the prediction-based condition for the approaching barrier:
///   c^T G du >= -c^T G (u - u0) - alpha(h + delta_h).
inline LinearRow prediction_row(const StateVector& c, const Dynamics& d, const InputVector& u,
                                const InputVector& u0, double h, double delta_h,
                                const ClassKappa& kappa) {
    const Eigen::VectorXd a = d.G.transpose() * c;
    return {a, -a.dot(u - u0) - kappa(h + delta_h)};
}

/// Row of the plain condition h_dot(x, u + du) + alpha(h) >= 0:
///   c^T G du >= -c^T (f + G u) - alpha(h).
inline LinearRow base_row(const StateVector& c, const Dynamics& d, const InputVector& u, double h,
                          const ClassKappa& kappa) {
    const Eigen::VectorXd a = d.G.transpose() * c;
    return {a, -c.dot(d.f + d.G * u) - kappa(h)};
}

namespace detail {

// Point of {a^T w >= beta} intersected with {||w|| <= r} closest to v, for
// ||v|| <= r. Returns nullopt when the halfspace misses the ball.
inline std::optional<InputVector> closest_in_ball_halfspace(const InputVector& v, double r,
                                                            const Eigen::VectorXd& a, double beta) {
    if (a.dot(v) >= beta) return v;
    const double a2 = a.squaredNorm();
    if (a2 <= 0.0) return std::nullopt;
    const InputVector on_plane = v + ((beta - a.dot(v)) / a2) * a;
    if (on_plane.norm() <= r) return on_plane;
    // The optimum lies on the sphere-plane intersection, a sphere of radius
    // rho about the foot of the origin on the plane.
    const InputVector center = (beta / a2) * a;
    double rho2 = r * r - center.squaredNorm();
    if (rho2 < -kQpFeasibilityTol * r * r) return std::nullopt;
    rho2 = std::max(rho2, 0.0);
    const InputVector offset = on_plane - center;
    const double offset_norm = offset.norm();
    if (offset_norm <= 1e-15) {
        // v - center is parallel to a: any point of the circle is optimal.
        InputVector e = InputVector::Zero(v.size());
        Eigen::Index k = 0;
        a.cwiseAbs().minCoeff(&k);
        e[k] = 1.0;
        e -= (e.dot(a) / a2) * a;
        return InputVector(center + std::sqrt(rho2) * e.normalized());
    }
    return InputVector(center + std::sqrt(rho2) * offset / offset_norm);
}

inline bool is_identity(const Eigen::MatrixXd& H) {
    return H.size() == 0 || H.isIdentity(0.0);
}

}  // namespace detail

/// One step of the safety filter.
///
/// The nominal input is first clamped into the admissible set. In
/// prediction-based mode the approaching barrier (if any) receives the
/// prediction row built from its stopping margin and policy; every other
/// barrier, and every barrier in base mode, receives the plain row. Box limits
/// enter as du <= u_max - u and -du <= u - u_min. With a norm ball, identity
/// weight and a single row the minimizer is the exact projection onto the
/// row intersected with the ball; otherwise the bounding box is used and the
/// result is scaled back onto the ball (flagged as `projected`).
///
/// An infeasible QP throws in prediction-based mode. In base mode it is
/// recorded: the input limits are dropped, the minimizer is saturated back
/// into them and the violation is flagged.
inline FilterOutput filter_step(const AffineSystem& system,
                                const std::vector<GuardedBarrier>& barriers,
                                const FilterConfig& config, const StateVector& x,
                                const InputVector& u_nominal) {
    if (!u_nominal.allFinite()) throw NumericalError("filter_step: non-finite nominal input");
    FilterOutput out;
    const InputVector u = system.bounds.clamp(u_nominal);
    out.u = u;
    FilterDiagnostics& diag = out.diagnostics;
    diag.barriers.resize(barriers.size());

    const Dynamics d = system.eval(x);
    for (std::size_t i = 0; i < barriers.size(); ++i) {
        diag.barriers[i].h = barriers[i].barrier.value(x);
    }
    if (config.mode == FilterMode::None) return out;

    const bool predictive = config.mode == FilterMode::PredictionBased;
    if (predictive) {
        std::vector<double> rates;
        diag.active = select_active(barriers, system, x, u, &rates);
        for (std::size_t i = 0; i < barriers.size(); ++i) diag.barriers[i].rate_u0 = rates[i];
    }

    for (std::size_t i = 0; i < barriers.size(); ++i) {
        const GuardedBarrier& entry = barriers[i];
        BarrierReport& report = diag.barriers[i];
        const StateVector c = entry.barrier.gradient(x);
        if (predictive && diag.active && *diag.active == i) {
            const PredictionResult pred =
                compute_delta_h(system, entry.barrier, entry.policy, x, config.dt_prediction,
                                config.t_max_prediction, u);
            report.delta_h = pred.delta_h;
            report.T = pred.T;
            report.active = true;
            diag.u0 = evaluate_policy(entry.policy, system, entry.barrier, x, u);
            diag.rows.push_back(
                prediction_row(c, d, u, diag.u0, report.h, report.delta_h, config.kappa));
        } else {
            diag.rows.push_back(base_row(c, d, u, report.h, config.kappa));
        }
    }

    const Eigen::Index m = system.m;
    InputVector u_star;
    if (system.bounds.is_norm_ball() && diag.rows.size() == 1 && detail::is_identity(config.H)) {
        // Exact Euclidean projection onto the row intersected with the ball.
        const double r = system.bounds.as_norm_ball().radius;
        const LinearRow& row = diag.rows.front();
        const std::optional<InputVector> best =
            detail::closest_in_ball_halfspace(u, r, row.a, row.b + row.a.dot(u));
        if (best) {
            u_star = *best;
            diag.status = QpStatus::Solved;
        } else if (predictive) {
            throw Infeasible("filter_step: prediction-based row misses the input ball");
        } else {
            diag.status = QpStatus::Infeasible;
            // Saturate along the row normal, the direction that helps most.
            u_star = row.a.norm() > 0.0 ? InputVector(r * row.a.normalized()) : u;
        }
    } else {
        const Box box = system.bounds.bounding_box(m);
        QpProblem problem{config.weight(m), diag.rows, box.lower - u, box.upper - u};
        InputVector du;
        try {
            du = solve_small_qp(problem).du;
            diag.status = QpStatus::Solved;
        } catch (const Infeasible& e) {
            if (predictive) {
                throw Infeasible(std::string("filter_step: prediction-based QP infeasible (") +
                                 e.what() + ")");
            }
            diag.status = QpStatus::Infeasible;
            QpProblem relaxed{problem.H, problem.rows, {}, {}};
            try {
                du = solve_small_qp(relaxed).du;
            } catch (const Infeasible&) {
                du = InputVector::Zero(m);
            }
            du = du.cwiseMax(problem.lower).cwiseMin(problem.upper);
        }
        u_star = u + du;
        if (system.bounds.is_norm_ball() && u_star.norm() > system.bounds.as_norm_ball().radius) {
            diag.projected = true;
            u_star *= system.bounds.as_norm_ball().radius / u_star.norm();
        }
    }
    u_star = system.bounds.clamp(u_star);
    for (const LinearRow& row : diag.rows) {
        if (!detail::row_holds(row, u_star - u)) diag.row_violated = true;
    }
    diag.filter_on = (u_star - u).norm() > 1e-9;
    out.u = u_star;
    return out;
}

}  // namespace pbcbf
