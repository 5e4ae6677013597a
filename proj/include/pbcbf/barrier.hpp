#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbcbf/aircraft.hpp"
#include "pbcbf/errors.hpp"
#include "pbcbf/numdiff.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf {

/// Scalar safety function h with gradient c = dh/dx. The safe set is h > 0.
struct Barrier {
    std::string name;
    std::function<double(const StateVector&)> h;
    /// Analytic gradient; central differences of h when empty.
    std::function<StateVector(const StateVector&)> c;
    /// Analytic dc/dx; central differences of c when empty.
    std::function<Eigen::MatrixXd(const StateVector&)> c_jacobian;
    /// Raw safety quantity reported in metrics (e.g. r - R); h when empty.
    std::function<double(const StateVector&)> margin;

    double value(const StateVector& x) const { return h(x); }

    StateVector gradient(const StateVector& x) const {
        return c ? c(x) : gradient_fd(h, x);
    }

    Eigen::MatrixXd gradient_jacobian(const StateVector& x) const {
        if (c_jacobian) return c_jacobian(x);
        return jacobian_fd([this](const StateVector& y) { return gradient(y); }, x);
    }

    double safety_margin(const StateVector& x) const { return margin ? margin(x) : h(x); }
};

/// Extended class-K-infinity gain. Only the linear kind alpha(z) = gamma z exists today.
struct ClassKappa {
    enum class Kind { Linear };
    Kind kind = Kind::Linear;
    double gamma = 1.0;

    static ClassKappa linear(double gamma) {
        if (!(gamma > 0.0)) throw Error("ClassKappa: gamma must be positive");
        return ClassKappa{Kind::Linear, gamma};
    }

    double operator()(double z) const { return gamma * z; }
};

/// h_dot(x, u) = c(x)^T (f(x) + G(x) u).
inline double h_dot(const Barrier& barrier, const AffineSystem& system, const StateVector& x,
                    const InputVector& u) {
    return barrier.gradient(x).dot(system.dynamics(x, u));
}

/// h_ddot(x, u) = u^T Q u + q^T u + r0 at a fixed state.
struct HddotQuadraticForm {
    Eigen::MatrixXd Q;
    Eigen::VectorXd q;
    double r0 = 0.0;

    double operator()(const InputVector& u) const { return u.dot(Q * u) + q.dot(u) + r0; }
};

/// Second time derivative of h along x' = f + G u, as a quadratic in u.
///
/// With J_c = dc/dx, J_f = df/dx and W the n x m matrix whose k-th row is
/// c^T dG/dx_k:
///   Q  = sym(G^T J_c^T G + G^T W)
///   q  = G^T (J_c + J_c^T) f + G^T J_f^T c + W^T f
///   r0 = f^T J_c^T f + c^T J_f f
inline HddotQuadraticForm h_ddot_form(const Barrier& barrier, const AffineSystem& system,
                                      const StateVector& x) {
    const Dynamics d = system.eval(x);
    const StateVector c = barrier.gradient(x);
    const Eigen::MatrixXd Jc = barrier.gradient_jacobian(x);

    const Eigen::Index n = system.n;
    const Eigen::Index m = system.m;
    Eigen::MatrixXd Jf(n, n);
    Eigen::MatrixXd W(n, m);
    StateVector xp = x;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double step = fd_step(x[k]);
        xp[k] = x[k] + step;
        const Dynamics plus = system.eval(xp);
        xp[k] = x[k] - step;
        const Dynamics minus = system.eval(xp);
        xp[k] = x[k];
        Jf.col(k) = (plus.f - minus.f) / (2.0 * step);
        W.row(k) = c.transpose() * ((plus.G - minus.G) / (2.0 * step));
    }
    if (!Jf.allFinite() || !W.allFinite() || !Jc.allFinite()) {
        throw NumericalError("h_ddot_form: non-finite difference quotient");
    }

    HddotQuadraticForm form;
    const Eigen::MatrixXd raw = d.G.transpose() * Jc.transpose() * d.G + d.G.transpose() * W;
    form.Q = 0.5 * (raw + raw.transpose());
    form.q = d.G.transpose() * (Jc + Jc.transpose()) * d.f + d.G.transpose() * Jf.transpose() * c +
             W.transpose() * d.f;
    form.r0 = d.f.dot(Jc.transpose() * d.f) + c.dot(Jf * d.f);
    return form;
}

/// True iff the unit gradients of b1 and b2 are antiparallel (within 1e-9) at
/// every sample.
inline bool check_opposed_pair(const Barrier& b1, const Barrier& b2,
                               const std::vector<StateVector>& samples) {
    if (samples.empty()) throw Error("check_opposed_pair: no samples");
    for (const StateVector& x : samples) {
        const StateVector c1 = b1.gradient(x);
        const StateVector c2 = b2.gradient(x);
        const double n1 = c1.norm();
        const double n2 = c2.norm();
        if (n1 < 1e-12 || n2 < 1e-12) {
            throw ZeroGradient("check_opposed_pair: vanishing gradient of " +
                               (n1 < 1e-12 ? b1.name : b2.name));
        }
        if ((c1 / n1 + c2 / n2).norm() > 1e-9) return false;
    }
    return true;
}

// Built-in barriers ---------------------------------------------------------

/// Keep the polar double integrator outside the disc of radius R:
/// h = r - R - r_dot^2 / (2 mu).
inline Barrier radial_keepout_barrier(double R, double mu) {
    if (!(mu > 0.0)) throw Error("radial_keepout_barrier: mu must be positive");
    Barrier b;
    b.name = "radial_keepout";
    b.h = [R, mu](const StateVector& x) { return x[0] - R - x[2] * x[2] / (2.0 * mu); };
    b.c = [mu](const StateVector& x) {
        StateVector c = StateVector::Zero(4);
        c[0] = 1.0;
        c[2] = -x[2] / mu;
        return c;
    };
    b.c_jacobian = [mu](const StateVector&) {
        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(4, 4);
        J(2, 2) = -1.0 / mu;
        return J;
    };
    b.margin = [R](const StateVector& x) { return x[0] - R; };
    return b;
}

/// Constant-gap barrier for the cruise-control model: h = z - z0.
inline Barrier gap_barrier(double z0) {
    Barrier b;
    b.name = "gap";
    b.h = [z0](const StateVector& x) { return x[1] - z0; };
    b.c = [](const StateVector&) { return StateVector(Eigen::Vector2d(0.0, 1.0)); };
    b.c_jacobian = [](const StateVector&) { return Eigen::MatrixXd(Eigen::MatrixXd::Zero(2, 2)); };
    return b;
}

/// Upper angle-of-attack limit: h = alpha_max - alpha.
inline Barrier aoa_upper_barrier(double alpha_max) {
    Barrier b;
    b.name = "aoa_upper";
    b.h = [alpha_max](const StateVector& x) { return alpha_max - angle_of_attack(x); };
    b.c = [](const StateVector& x) {
        StateVector c = StateVector::Zero(4);
        c.head<2>() = -alpha_gradient(x);
        return c;
    };
    return b;
}

/// Lower angle-of-attack limit: h = alpha - alpha_min.
inline Barrier aoa_lower_barrier(double alpha_min) {
    Barrier b;
    b.name = "aoa_lower";
    b.h = [alpha_min](const StateVector& x) { return angle_of_attack(x) - alpha_min; };
    b.c = [](const StateVector& x) {
        StateVector c = StateVector::Zero(4);
        c.head<2>() = alpha_gradient(x);
        return c;
    };
    return b;
}

}  // namespace pbcbf
