#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pbcbf/errors.hpp"
#include "pbcbf/numdiff.hpp"
#include "pbcbf/ode.hpp"

namespace pbcbf {

/// Componentwise limits u_min <= u <= u_max.
struct Box {
    InputVector lower;
    InputVector upper;
};

/// ||u||_2 <= radius.
struct NormBall {
    double radius = 1.0;
};

class InputBounds {
public:
    InputBounds() = default;

    static InputBounds box(InputVector lower, InputVector upper) {
        if (lower.size() != upper.size()) throw Error("InputBounds: size mismatch");
        for (Eigen::Index i = 0; i < lower.size(); ++i) {
            if (!(lower[i] <= upper[i])) throw Error("InputBounds: lower > upper");
        }
        InputBounds b;
        b.kind_ = Box{std::move(lower), std::move(upper)};
        return b;
    }

    static InputBounds norm_ball(double radius) {
        if (!(radius > 0.0)) throw Error("InputBounds: radius must be positive");
        InputBounds b;
        b.kind_ = NormBall{radius};
        return b;
    }

    bool is_box() const { return std::holds_alternative<Box>(kind_); }
    bool is_norm_ball() const { return std::holds_alternative<NormBall>(kind_); }
    const Box& as_box() const { return std::get<Box>(kind_); }
    const NormBall& as_norm_ball() const { return std::get<NormBall>(kind_); }

    /// Smallest box containing the admissible set.
    Box bounding_box(Eigen::Index m) const {
        if (is_box()) return as_box();
        const double r = as_norm_ball().radius;
        return Box{InputVector::Constant(m, -r), InputVector::Constant(m, r)};
    }

    bool contains(const InputVector& u, double tol = 1e-12) const {
        if (is_box()) {
            const Box& b = as_box();
            return ((u - b.lower).array() >= -tol).all() && ((b.upper - u).array() >= -tol).all();
        }
        return u.norm() <= as_norm_ball().radius + tol;
    }

    /// Nearest admissible input: componentwise clamp, or radial scaling onto the ball.
    InputVector clamp(const InputVector& u) const {
        if (is_box()) {
            const Box& b = as_box();
            return u.cwiseMax(b.lower).cwiseMin(b.upper);
        }
        const double r = as_norm_ball().radius;
        const double norm = u.norm();
        return norm > r ? InputVector(u * (r / norm)) : u;
    }

private:
    std::variant<Box, NormBall> kind_ = NormBall{1.0};
};

/// Drift and input map evaluated at one state.
struct Dynamics {
    StateVector f;
    Eigen::MatrixXd G;
};

/// Control-affine model x' = f(x) + G(x) u with admissible inputs.
struct AffineSystem {
    std::string name;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    std::function<Dynamics(const StateVector&)> evaluate;
    InputBounds bounds;
    std::vector<std::string> state_names;
    std::vector<std::string> state_units;
    std::vector<std::string> input_names;
    std::vector<std::string> input_units;
    /// Optional analytic df/dx; finite differences are used when empty.
    std::function<Eigen::MatrixXd(const StateVector&)> drift_jacobian;

    Dynamics eval(const StateVector& x) const {
        Dynamics d = evaluate(x);
        if (d.f.size() != n || d.G.rows() != n || d.G.cols() != m) {
            throw Error(name + ": dynamics returned wrong shape");
        }
        if (!d.f.allFinite() || !d.G.allFinite()) {
            throw NumericalError(name + ": non-finite dynamics");
        }
        return d;
    }

    StateVector drift(const StateVector& x) const { return eval(x).f; }
    Eigen::MatrixXd input_map(const StateVector& x) const { return eval(x).G; }

    StateVector dynamics(const StateVector& x, const InputVector& u) const {
        Dynamics d = eval(x);
        return d.f + d.G * u;
    }

    /// Whether state `i` is an angle (unit "rad").
    bool is_angle_state(std::size_t i) const {
        return i < state_units.size() && state_units[i] == "rad";
    }
    bool is_angle_input(std::size_t i) const {
        return i < input_units.size() && input_units[i] == "rad";
    }
};

/// Planar double integrator in polar coordinates, state [r, theta, r', theta'],
/// input [u_r, u_theta] (radial and tangential acceleration), ||u|| <= u_max.
inline AffineSystem double_integrator_polar(double u_max = 1.0, double r_floor = 1e-6) {
    AffineSystem sys;
    sys.name = "double_integrator";
    sys.n = 4;
    sys.m = 2;
    sys.bounds = InputBounds::norm_ball(u_max);
    sys.state_names = {"r", "theta", "r_dot", "theta_dot"};
    sys.state_units = {"m", "rad", "m/s", "rad/s"};
    sys.input_names = {"u_r", "u_theta"};
    sys.input_units = {"m/s^2", "m/s^2"};
    sys.evaluate = [r_floor](const StateVector& x) {
        const double r = x[0];
        if (!(r > r_floor)) {
            throw DomainError("double_integrator: r = " + std::to_string(r) +
                              " at or below r_floor");
        }
        const double vr = x[2];
        const double w = x[3];
        Dynamics d{StateVector(4), Eigen::MatrixXd::Zero(4, 2)};
        d.f << vr, w, r * w * w, -2.0 * vr * w / r;
        d.G(2, 0) = 1.0;
        d.G(3, 1) = 1.0 / r;
        return d;
    };
    return sys;
}

/// Rolling resistance as a polynomial in speed: F_r(v) = sum_k coeffs[k] v^k.
inline std::function<double(double)> polynomial_resistance(std::vector<double> coeffs) {
    return [coeffs = std::move(coeffs)](double v) {
        double acc = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * v + *it;
        return acc;
    };
}

/// Single-lane adaptive cruise control, state [v, z], input wheel force F_w.
/// The force bound is |F_w| <= m a_max.
inline AffineSystem acc_system(double mass, double v_front, double a_max,
                               std::function<double(double)> resistance = {}) {
    if (!(mass > 0.0)) throw Error("acc_system: mass must be positive");
    if (!(a_max > 0.0)) throw Error("acc_system: a_max must be positive");
    if (!resistance) resistance = [](double) { return 0.0; };
    AffineSystem sys;
    sys.name = "acc";
    sys.n = 2;
    sys.m = 1;
    sys.bounds = InputBounds::box(InputVector::Constant(1, -mass * a_max),
                                  InputVector::Constant(1, mass * a_max));
    sys.state_names = {"v", "z"};
    sys.state_units = {"m/s", "m"};
    sys.input_names = {"F_w"};
    sys.input_units = {"N"};
    sys.evaluate = [mass, v_front, resistance](const StateVector& x) {
        Dynamics d{StateVector(2), Eigen::MatrixXd::Zero(2, 1)};
        d.f << -resistance(x[0]) / mass, v_front - x[0];
        d.G(0, 0) = 1.0 / mass;
        return d;
    };
    return sys;
}

/// Linear model about (x0, u0).
struct LinearModel {
    Eigen::MatrixXd A;
    Eigen::MatrixXd B;
};

/// A = d(f + G u0)/dx at x0 by central differences (or the analytic drift
/// Jacobian when the system provides one and u0 = 0); B = G(x0).
inline LinearModel linearize(const AffineSystem& system, const StateVector& x0,
                             const InputVector& u0) {
    const InputVector u = u0.size() == 0 ? InputVector::Zero(system.m) : u0;
    LinearModel lin;
    if (system.drift_jacobian && u.isZero(0.0)) {
        lin.A = system.drift_jacobian(x0);
    } else {
        lin.A = jacobian_fd([&](const StateVector& x) { return system.dynamics(x, u); }, x0);
    }
    if (!lin.A.allFinite()) throw NumericalError("linearize: non-finite Jacobian");
    lin.B = system.input_map(x0);
    return lin;
}

}  // namespace pbcbf
