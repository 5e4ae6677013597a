#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pbcbf/barrier.hpp"
#include "pbcbf/errors.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf {

/// Which linear-form gradient drives the bang-bang law: c^T B or c^T A B.
enum class GradientSource { CB, CAB };

/// Linearization frozen at a reference state (c, A, B all taken there).
struct LinearReference {
    StateVector c;
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
};

/// Per-channel extreme input chosen by the sign of a linear gradient.
struct BangBang {
    GradientSource source = GradientSource::CAB;
    /// Frozen linearization; when empty c, A, B are re-evaluated at every state.
    std::optional<LinearReference> reference;
    /// Value for channels whose gradient is zero. NaN entries mean "the nominal
    /// input at filter time"; an empty vector means the box midpoint.
    InputVector neutral;
    /// Gradients with |g_i| <= zero_tolerance * max_j |g_j| count as zero.
    double zero_tolerance = 0.0;
};

/// Maximizes the h_ddot quadratic form over the input box at every state.
struct QpMaximal {};

/// u0 = u_max B^T c / ||B^T c|| for norm-ball input sets.
struct NormBallGradient {};

struct CustomPolicy {
    std::function<InputVector(const StateVector&)> law;
};

/// Stopping policy used inside the stopping-margin prediction.
struct PredictionPolicy {
    std::variant<BangBang, QpMaximal, NormBallGradient, CustomPolicy> kind;

    std::string label() const {
        switch (kind.index()) {
            case 0: return "bang_bang";
            case 1: return "qp_maximal";
            case 2: return "normball_gradient";
            default: return "custom";
        }
    }
};

/// Bang-bang law: u_i = upper_i if g_i > 0, lower_i if g_i < 0, neutral_i otherwise.
inline InputVector bang_bang_u0(const StateVector& c, const Eigen::MatrixXd& A,
                                const Eigen::MatrixXd& B, const Box& box, GradientSource source,
                                const InputVector& neutral = InputVector(),
                                double zero_tolerance = 0.0) {
    const Eigen::RowVectorXd g = source == GradientSource::CAB
                                     ? Eigen::RowVectorXd(c.transpose() * A * B)
                                     : Eigen::RowVectorXd(c.transpose() * B);
    const double threshold = zero_tolerance * g.cwiseAbs().maxCoeff();
    InputVector u(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        if (g[i] > threshold) {
            u[i] = box.upper[i];
        } else if (g[i] < -threshold) {
            u[i] = box.lower[i];
        } else {
            u[i] = neutral.size() == g.size() ? neutral[i] : 0.5 * (box.lower[i] + box.upper[i]);
        }
    }
    return u;
}

struct NormBallInput {
    InputVector u;
    bool degenerate = false;  // ||B^T c|| vanished; u is zero
};

inline NormBallInput normball_u0(const StateVector& c, const Eigen::MatrixXd& B, double u_max) {
    const InputVector direction = B.transpose() * c;
    const double norm = direction.norm();
    if (norm <= 1e-12) return {InputVector::Zero(B.cols()), true};
    return {InputVector(u_max * direction / norm), false};
}

/// argmax of u^T Q u + q^T u over a box, m <= 3.
///
/// Every maximizer lies on some face of the box where the free coordinates are
/// stationary, so all 3^m assignments (lower / upper / free) are enumerated.
/// Ties go to the lexicographically larger input.
inline InputVector qp_maximal_u0(const HddotQuadraticForm& form, const Box& box) {
    const Eigen::Index m = box.lower.size();
    if (m > 3) throw UnsupportedDimension("qp_maximal_u0: at most 3 inputs supported");
    int combos = 1;
    for (Eigen::Index i = 0; i < m; ++i) combos *= 3;

    InputVector best;
    double best_value = -std::numeric_limits<double>::infinity();
    const double scale = 1.0 + form.Q.cwiseAbs().sum() + form.q.cwiseAbs().sum();
    for (int code = 0; code < combos; ++code) {
        InputVector u(m);
        std::vector<Eigen::Index> free;
        int rest = code;
        for (Eigen::Index i = 0; i < m; ++i, rest /= 3) {
            switch (rest % 3) {
                case 0: u[i] = box.upper[i]; break;
                case 1: u[i] = box.lower[i]; break;
                default: free.push_back(i); u[i] = 0.0;
            }
        }
        if (!free.empty()) {
            // Stationarity of the restricted quadratic: 2 Q_FF u_F = -(q_F + 2 Q_F,fixed u_fixed).
            const auto k = static_cast<Eigen::Index>(free.size());
            Eigen::MatrixXd Qff(k, k);
            Eigen::VectorXd rhs(k);
            for (Eigen::Index a = 0; a < k; ++a) {
                double coupling = 0.0;
                for (Eigen::Index j = 0; j < m; ++j) {
                    if (std::find(free.begin(), free.end(), j) == free.end()) {
                        coupling += form.Q(free[a], j) * u[j];
                    }
                }
                rhs[a] = -(form.q[free[a]] + 2.0 * coupling);
                for (Eigen::Index b = 0; b < k; ++b) Qff(a, b) = 2.0 * form.Q(free[a], free[b]);
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(Qff);
            if (!lu.isInvertible()) continue;
            const Eigen::VectorXd uf = lu.solve(rhs);
            bool inside = true;
            for (Eigen::Index a = 0; a < k; ++a) {
                const Eigen::Index i = free[a];
                if (uf[a] < box.lower[i] || uf[a] > box.upper[i]) inside = false;
                u[i] = uf[a];
            }
            if (!inside) continue;
        }
        const double value = form(u);
        const double tol = 1e-14 * scale;
        const bool better = value > best_value + tol;
        const bool tie = best.size() == m && value >= best_value - tol &&
                         std::lexicographical_compare(best.data(), best.data() + m, u.data(),
                                                      u.data() + m);
        if (best.size() == 0 || better || tie) {
            best = u;
            best_value = std::max(value, best_value);
        }
    }
    return best;
}

/// Evaluates u0(x). `u_nominal` fills neutral channels marked NaN.
inline InputVector evaluate_policy(const PredictionPolicy& policy, const AffineSystem& system,
                                   const Barrier& barrier, const StateVector& x,
                                   const InputVector& u_nominal = InputVector()) {
    return std::visit(
        [&](const auto& p) -> InputVector {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, BangBang>) {
                if (!system.bounds.is_box()) throw Error("bang-bang policy needs box bounds");
                InputVector neutral = p.neutral;
                for (Eigen::Index i = 0; i < neutral.size(); ++i) {
                    if (std::isnan(neutral[i])) {
                        const Box& b = system.bounds.as_box();
                        neutral[i] = u_nominal.size() == system.m ? u_nominal[i]
                                                                  : 0.5 * (b.lower[i] + b.upper[i]);
                    }
                }
                if (p.reference) {
                    return bang_bang_u0(p.reference->c, p.reference->A, p.reference->B,
                                        system.bounds.as_box(), p.source, neutral,
                                        p.zero_tolerance);
                }
                const LinearModel lin = linearize(system, x, InputVector::Zero(system.m));
                return bang_bang_u0(barrier.gradient(x), lin.A, lin.B, system.bounds.as_box(),
                                    p.source, neutral, p.zero_tolerance);
            } else if constexpr (std::is_same_v<P, QpMaximal>) {
                if (!system.bounds.is_box()) throw Error("qp-maximal policy needs box bounds");
                return qp_maximal_u0(h_ddot_form(barrier, system, x), system.bounds.as_box());
            } else if constexpr (std::is_same_v<P, NormBallGradient>) {
                if (!system.bounds.is_norm_ball()) {
                    throw Error("norm-ball policy needs norm-ball bounds");
                }
                return normball_u0(barrier.gradient(x), system.input_map(x),
                                   system.bounds.as_norm_ball().radius)
                    .u;
            } else {
                return p.law(x);
            }
        },
        policy.kind);
}

/// Freezes c, A, B at (x_ref, u_ref) for a bang-bang policy.
inline LinearReference make_linear_reference(const AffineSystem& system, const Barrier& barrier,
                                             const StateVector& x_ref, const InputVector& u_ref) {
    const LinearModel lin = linearize(system, x_ref, u_ref);
    return LinearReference{barrier.gradient(x_ref), lin.A, lin.B};
}

}  // namespace pbcbf
