#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <utility>

#include <Eigen/Dense>

#include "pbcbf/errors.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf::harness {

/// Nominal feedback law. `command` is pure; `advance` moves any internal
/// state (integrators, filters) forward by one simulation step once the
/// applied input is known.
class Controller {
public:
    virtual ~Controller() = default;
    virtual InputVector command(double t, const StateVector& x) const = 0;
    virtual void advance(double /*t*/, const StateVector& /*x*/, const InputVector& /*applied*/,
                         double /*dt*/) {}
};

// Double integrator tracking ----------------------------------------------------

struct TrackingGains {
    double kp = 1.0;
    double kd = 2.0;
    double u_max = 1.0;
    double keepout_radius = 1.0;  // R of the unsafe disc
    double push = 1.0;            // outward radial input added when r < R
};

struct CartesianReference {
    Eigen::Vector2d position;
    Eigen::Vector2d velocity;
    Eigen::Vector2d acceleration;
};

/// p_r(t) = [sin(t pi / 5), t pi / 10] and its first two derivatives.
inline CartesianReference di_reference(double t) {
    const double w = M_PI / 5.0;
    return {Eigen::Vector2d(std::sin(w * t), t * M_PI / 10.0),
            Eigen::Vector2d(w * std::cos(w * t), M_PI / 10.0),
            Eigen::Vector2d(-w * w * std::sin(w * t), 0.0)};
}

/// Cartesian position and velocity of a polar state [r, theta, r_dot, theta_dot].
inline std::pair<Eigen::Vector2d, Eigen::Vector2d> polar_to_cartesian(const StateVector& x) {
    const Eigen::Vector2d er(std::cos(x[1]), std::sin(x[1]));
    const Eigen::Vector2d et(-std::sin(x[1]), std::cos(x[1]));
    return {x[0] * er, x[2] * er + x[0] * x[3] * et};
}

inline StateVector cartesian_to_polar(const Eigen::Vector2d& p, const Eigen::Vector2d& v) {
    const double r = p.norm();
    if (!(r > 0.0)) throw DomainError("cartesian_to_polar: position at the origin");
    const double theta = std::atan2(p.y(), p.x());
    const Eigen::Vector2d er = p / r;
    const Eigen::Vector2d et(-er.y(), er.x());
    StateVector x(4);
    x << r, theta, v.dot(er), v.dot(et) / r;
    return x;
}

/// PD tracking of p_r(t) with acceleration feed-forward, computed in Cartesian
/// coordinates and resolved into radial / tangential input channels. Inside
/// the unsafe disc an outward radial push is added. The result is clamped to
/// the input ball.
inline InputVector tracking_controller_di(const StateVector& x, double t,
                                          const TrackingGains& gains) {
    const CartesianReference ref = di_reference(t);
    const auto [p, v] = polar_to_cartesian(x);
    const Eigen::Vector2d a = ref.acceleration + gains.kp * (ref.position - p) +
                              gains.kd * (ref.velocity - v);
    const Eigen::Vector2d er(std::cos(x[1]), std::sin(x[1]));
    const Eigen::Vector2d et(-std::sin(x[1]), std::cos(x[1]));
    InputVector u(2);
    u << a.dot(er), a.dot(et);
    if (x[0] < gains.keepout_radius) u[0] += gains.push;
    const double norm = u.norm();
    if (norm > gains.u_max) {
        if (x[0] < gains.keepout_radius) {
            // Keep the outward push intact and shrink the tangential part.
            u[0] = std::min(u[0], gains.u_max);
            const double room = std::sqrt(std::max(0.0, gains.u_max * gains.u_max - u[0] * u[0]));
            u[1] = std::clamp(u[1], -room, room);
        } else {
            u *= gains.u_max / norm;
        }
    }
    return u;
}

class TrackingController final : public Controller {
public:
    explicit TrackingController(TrackingGains gains) : gains_(gains) {
        if (!(gains.kp > 0.0 && gains.kd > 0.0)) throw Error("tracking: gains must be positive");
    }
    InputVector command(double t, const StateVector& x) const override {
        return tracking_controller_di(x, t, gains_);
    }

private:
    TrackingGains gains_;
};

// Aircraft SAS + auto-throttle -------------------------------------------------

struct SasGains {
    double k_P_alpha = 0.0;
    double k_D_theta = 0.0;
    double k_P_theta = 0.0;
    double k_I_theta = 0.0;
    double k_P_u = 0.0;
    double k_I_u = 0.0;
    double k_D_u = 0.0;
    double derivative_pole = 50.0;  // rad/s, first-order filter on the U derivative
};

/// Elevator: k_Pa (W - W0)/U0 + k_Dth Q + k_Pth (theta - theta0) + k_Ith int(theta - theta0).
/// Throttle: PID on U - U0 with a filtered derivative. Both added to the trim input.
class PidSasAutothrottle final : public Controller {
public:
    PidSasAutothrottle(StateVector x_trim, InputVector u_trim, SasGains gains, Box limits)
        : x0_(std::move(x_trim)), u0_(std::move(u_trim)), gains_(gains), limits_(std::move(limits)) {
        if (!(gains.derivative_pole > 0.0)) throw Error("pid_sas: derivative pole must be positive");
    }

    InputVector command(double /*t*/, const StateVector& x) const override {
        const double e_u = x[0] - x0_[0];
        InputVector u = u0_;
        u[0] += gains_.k_P_alpha * (x[1] - x0_[1]) / x0_[0] + gains_.k_D_theta * x[2] +
                gains_.k_P_theta * (x[3] - x0_[3]) + gains_.k_I_theta * int_theta_;
        u[1] += gains_.k_P_u * e_u + gains_.k_I_u * int_u_ +
                gains_.k_D_u * gains_.derivative_pole * (e_u - lag_u_);
        return u;
    }

    /// Integrators hold while the corresponding channel sits on a limit and
    /// the error would drive it further out.
    void advance(double t, const StateVector& x, const InputVector& /*applied*/,
                 double dt) override {
        const InputVector u = command(t, x);
        const double e_theta = x[3] - x0_[3];
        const double e_u = x[0] - x0_[0];
        if (!winds_up(0, u[0], gains_.k_I_theta * e_theta)) int_theta_ += e_theta * dt;
        if (!winds_up(1, u[1], gains_.k_I_u * e_u)) int_u_ += e_u * dt;
        // Exact discretization of lag' = pole (e - lag) over one step.
        lag_u_ = e_u + (lag_u_ - e_u) * std::exp(-gains_.derivative_pole * dt);
    }

    double theta_integral() const { return int_theta_; }
    double speed_integral() const { return int_u_; }

private:
    bool winds_up(int channel, double u, double push) const {
        return (u >= limits_.upper[channel] && push > 0.0) ||
               (u <= limits_.lower[channel] && push < 0.0);
    }

    StateVector x0_;
    InputVector u0_;
    SasGains gains_;
    Box limits_;
    double int_theta_ = 0.0;
    double int_u_ = 0.0;
    double lag_u_ = 0.0;
};

// Cruise control -----------------------------------------------------------------

/// F_w = m k (v_des - v) for the cruise-control model, clamped to the force limit.
class CruiseController final : public Controller {
public:
    CruiseController(double mass, double v_desired, double gain, double force_limit)
        : mass_(mass), v_des_(v_desired), gain_(gain), limit_(force_limit) {}

    InputVector command(double /*t*/, const StateVector& x) const override {
        return InputVector::Constant(1, std::clamp(mass_ * gain_ * (v_des_ - x[0]), -limit_, limit_));
    }

private:
    double mass_;
    double v_des_;
    double gain_;
    double limit_;
};

// Disturbance ----------------------------------------------------------------------

/// Two rectangular pulses on one input channel. Pulses are closed intervals
/// and summed where they touch.
struct DoubletSpec {
    Eigen::Index channel = 0;
    double amplitude1 = 10.0 * M_PI / 180.0;
    double amplitude2 = -20.0 * M_PI / 180.0;
    double width = 5.0;
    double start1 = 0.0;
    double start2 = 5.0;
};

/// Unit rectangle: 1 for |s| <= 1/2.
inline double rect(double s) { return std::abs(s) <= 0.5 ? 1.0 : 0.0; }

inline InputVector doublet(double t, const DoubletSpec& spec, Eigen::Index m) {
    InputVector d = InputVector::Zero(m);
    d[spec.channel] = spec.amplitude1 * rect((t - spec.start1) / spec.width - 0.5) +
                      spec.amplitude2 * rect((t - spec.start2) / spec.width - 0.5);
    return d;
}

}  // namespace pbcbf::harness
