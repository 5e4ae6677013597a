#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "pbcbf/errors.hpp"
#include "pbcbf/numdiff.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf {

/// Rigid-body longitudinal aircraft data.
///
/// Force coefficient blocks use the [lift; drag] row order. The body-axis
/// aerodynamic force is -q S T_BS [C_D; C_L], i.e. the blocks are reordered
/// into stability axes (x along the velocity, z down) before rotation.
/// Rate coefficients multiply Q and alpha_dot directly (rad/s), so any
/// c/(2V) scaling must already be folded into them.
struct AircraftParams {
    double mass = 0.0;              // kg
    double Iy = 0.0;                // kg m^2
    double S = 0.0;                 // m^2
    double chord = 0.0;             // m
    Eigen::Vector2d c_F0 = Eigen::Vector2d::Zero();                   // [C_L0, C_D0]
    Eigen::Matrix<double, 2, 3> C_Fi = Eigen::Matrix<double, 2, 3>::Zero();  // d[C_L,C_D]/d[alpha,M,Q]
    Eigen::Vector2d c_F_alphadot = Eigen::Vector2d::Zero();
    Eigen::Vector2d c_F_delta_E = Eigen::Vector2d::Zero();
    double C_m0 = 0.0;
    Eigen::Vector3d c_mi = Eigen::Vector3d::Zero();  // [C_m_alpha, C_m_M, C_m_q]
    double C_m_delta_E = 0.0;
    double C_m_alphadot = 0.0;
    double X_delta_th = 0.0;  // m/s^2 per percent throttle
    double rho = 1.225;
    double speed_of_sound = 340.3;
    double g = 9.80665;
    double delta_E_min = -20.0 * M_PI / 180.0;  // rad
    double delta_E_max = 10.0 * M_PI / 180.0;   // rad
    double delta_th_min = 0.0;                  // percent
    double delta_th_max = 100.0;                // percent
    double U_floor = 1.0;                       // m/s

    void validate() const {
        if (!(mass > 0.0 && Iy > 0.0 && S > 0.0 && chord > 0.0 && rho > 0.0 &&
              speed_of_sound > 0.0)) {
            throw Error("AircraftParams: m, Iy, S, c, rho and a must be positive");
        }
        if (!(delta_E_min < delta_E_max) || !(delta_th_min < delta_th_max)) {
            throw Error("AircraftParams: empty input range");
        }
    }
};

inline double angle_of_attack(const StateVector& x) { return std::atan2(x[1], x[0]); }

/// d(alpha)/d[U, W].
inline Eigen::Vector2d alpha_gradient(const StateVector& x) {
    const double v2 = x[0] * x[0] + x[1] * x[1];
    return Eigen::Vector2d(-x[1] / v2, x[0] / v2);
}

namespace detail {

// [L; D] -> [D; L]
inline Eigen::Vector2d to_stability(const Eigen::Vector2d& lift_drag) {
    return Eigen::Vector2d(lift_drag[1], lift_drag[0]);
}

inline double condition_number_2x2(const Eigen::Matrix2d& a) {
    const double s = a.squaredNorm();
    const double det = a.determinant();
    const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * det * det));
    const double smax2 = 0.5 * (s + disc);
    const double smin2 = 0.5 * (s - disc);
    if (smin2 <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(smax2 / smin2);
}

}  // namespace detail

/// Longitudinal rigid-body model, state [U, W, Q, theta], input [delta_E, delta_th].
///
/// The alpha_dot dependence of the aerodynamic force and moment is moved to
/// the left-hand side and the resulting block-triangular system is solved for
/// f and G.
inline AffineSystem aircraft_longitudinal(const AircraftParams& p) {
    p.validate();
    AffineSystem sys;
    sys.name = "aircraft";
    sys.n = 4;
    sys.m = 2;
    sys.bounds = InputBounds::box(Eigen::Vector2d(p.delta_E_min, p.delta_th_min),
                                  Eigen::Vector2d(p.delta_E_max, p.delta_th_max));
    sys.state_names = {"U", "W", "Q", "theta"};
    sys.state_units = {"m/s", "m/s", "rad/s", "rad"};
    sys.input_names = {"delta_E", "delta_th"};
    sys.input_units = {"rad", "percent"};
    sys.evaluate = [p](const StateVector& x) {
        const double U = x[0];
        const double W = x[1];
        const double Q = x[2];
        const double theta = x[3];
        if (!(U > p.U_floor)) {
            throw DomainError("aircraft: U = " + std::to_string(U) + " at or below U_floor");
        }
        const double v2 = U * U + W * W;
        const double V = std::sqrt(v2);
        const double alpha = std::atan2(W, U);
        const double qbar = 0.5 * p.rho * v2;
        const Eigen::Vector3d zeta(alpha, V / p.speed_of_sound, Q);
        const double ca = std::cos(alpha);
        const double sa = std::sin(alpha);
        Eigen::Matrix2d T_bs;
        T_bs << ca, -sa, sa, ca;
        const Eigen::Vector2d c_prime(-W / v2, U / v2);
        const double kf = qbar * p.S / p.mass;
        const double km = qbar * p.S * p.chord / p.Iy;

        const Eigen::Vector2d f_T =
            p.g * Eigen::Vector2d(-std::sin(theta), std::cos(theta)) -
            Eigen::Vector2d(Q * W, -Q * U) -
            kf * T_bs * detail::to_stability(p.c_F0 + p.C_Fi * zeta);
        Eigen::Matrix2d G_T;
        G_T.col(0) = -kf * T_bs * detail::to_stability(p.c_F_delta_E);
        G_T.col(1) = Eigen::Vector2d(p.X_delta_th, 0.0);
        const Eigen::Matrix2d A_T = Eigen::Matrix2d::Identity() +
                                    kf * T_bs * detail::to_stability(p.c_F_alphadot) *
                                        c_prime.transpose();
        const double f_R = km * (p.C_m0 + p.c_mi.dot(zeta));
        const Eigen::RowVector2d g_R(km * p.C_m_delta_E, 0.0);
        const Eigen::RowVector2d a_R = -km * p.C_m_alphadot * c_prime.transpose();

        if (detail::condition_number_2x2(A_T) > 1e12) {
            throw SingularMassMatrix("aircraft: alpha_dot coupling matrix is singular");
        }
        const Eigen::Matrix2d A_T_inv = A_T.inverse();
        const Eigen::Vector2d vdot_f = A_T_inv * f_T;
        const Eigen::Matrix2d vdot_G = A_T_inv * G_T;

        Dynamics d{StateVector(4), Eigen::MatrixXd::Zero(4, 2)};
        d.f << vdot_f[0], vdot_f[1], f_R - a_R * vdot_f, Q;
        d.G.topRows(2) = vdot_G;
        d.G.row(2) = g_R - a_R * vdot_G;
        return d;
    };
    return sys;
}

struct TrimPoint {
    StateVector x;
    InputVector u;
    double residual = 0.0;
    int iterations = 0;
};

/// Steady straight flight at airspeed V0 on flight-path angle gamma_path.
///
/// Newton iteration over (alpha, delta_E, delta_th) with theta = gamma + alpha,
/// Q = 0 and ||[U, W]|| = V0, driving f(x) + G(x) u to zero.
inline TrimPoint trim_solve(const AircraftParams& params, double V0, double gamma_path,
                            int max_iterations = 100) {
    if (!(V0 > 0.0)) throw Error("trim_solve: V0 must be positive");
    const AffineSystem sys = aircraft_longitudinal(params);

    auto state_of = [&](const Eigen::Vector3d& z) {
        const double alpha = z[0];
        StateVector x(4);
        x << V0 * std::cos(alpha), V0 * std::sin(alpha), 0.0, gamma_path + alpha;
        return x;
    };
    auto input_of = [](const Eigen::Vector3d& z) { return InputVector(Eigen::Vector2d(z[1], z[2])); };
    auto residual = [&](const Eigen::Vector3d& z) -> Eigen::Vector3d {
        const StateVector xdot = sys.dynamics(state_of(z), input_of(z));
        return xdot.head<3>();
    };

    Eigen::Vector3d z(5.0 * M_PI / 180.0, 0.5 * (params.delta_E_min + params.delta_E_max),
                      0.5 * (params.delta_th_min + params.delta_th_max));
    double norm = std::numeric_limits<double>::infinity();
    int it = 0;
    try {
        Eigen::Vector3d r = residual(z);
        norm = r.norm();
        for (; it < max_iterations && !(norm < 1e-9); ++it) {
            const Eigen::Matrix3d J = jacobian_fd(residual, Eigen::VectorXd(z));
            const Eigen::Vector3d step = J.fullPivLu().solve(-r);
            if (!step.allFinite()) break;
            double lambda = 1.0;
            bool accepted = false;
            for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
                const Eigen::Vector3d trial = z + lambda * step;
                if (std::abs(trial[0]) >= 0.5 * M_PI) continue;
                Eigen::Vector3d rt;
                try {
                    rt = residual(trial);
                } catch (const DomainError&) {
                    continue;
                }
                if (rt.norm() < norm || ls == 29) {
                    z = trial;
                    r = rt;
                    norm = rt.norm();
                    accepted = true;
                    break;
                }
            }
            if (!accepted) break;
        }
    } catch (const Error& e) {
        throw TrimNotConverged(std::string("trim_solve: ") + e.what(), norm);
    }
    if (!(norm < 1e-9)) {
        throw TrimNotConverged("trim_solve: residual " + std::to_string(norm) + " after " +
                                   std::to_string(it) + " iterations",
                               norm);
    }
    TrimPoint trim{state_of(z), input_of(z), norm, it};
    if (!sys.bounds.contains(trim.u, 1e-12)) {
        throw TrimNotConverged("trim_solve: trim input outside the admissible range", norm);
    }
    return trim;
}

}  // namespace pbcbf
