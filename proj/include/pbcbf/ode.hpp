#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pbcbf/errors.hpp"

namespace pbcbf {

using StateVector = Eigen::VectorXd;
using InputVector = Eigen::VectorXd;

/// Right-hand side x' = F(t, x).
using VectorField = std::function<StateVector(double, const StateVector&)>;
using StopPredicate = std::function<bool(double, const StateVector&)>;

/// Uniformly sampled record of a trajectory.
///
/// `inputs` is kept the same length as `states`; pure propagation without an
/// input channel stores empty vectors. Annotation channels hold one scalar per
/// sample and are keyed by name.
struct Trace {
    std::vector<double> times;
    std::vector<StateVector> states;
    std::vector<InputVector> inputs;
    std::map<std::string, std::vector<double>> annotations;
    bool stopped = false;  // set by propagate_until when the stop event fired

    std::size_t size() const noexcept { return times.size(); }
    bool empty() const noexcept { return times.empty(); }

    void push(double t, StateVector x, InputVector u = InputVector()) {
        times.push_back(t);
        states.push_back(std::move(x));
        inputs.push_back(std::move(u));
    }

    void annotate(const std::string& channel, double value) {
        auto& column = annotations[channel];
        // Channels that start late are back-filled with zeros.
        if (column.size() + 1 < times.size()) column.resize(times.size() - 1, 0.0);
        column.push_back(value);
    }

    /// Value of `channel` at sample `i`, or 0 when the channel is absent.
    double channel(const std::string& name, std::size_t i) const {
        auto it = annotations.find(name);
        if (it == annotations.end() || i >= it->second.size()) return 0.0;
        return it->second[i];
    }
};

namespace detail {

inline void require_finite(const StateVector& v, const char* where) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw NumericalError(std::string(where) + ": non-finite component " +
                                 std::to_string(i));
        }
    }
}

}  // namespace detail

/// One classical fourth-order Runge-Kutta step.
inline StateVector rk4_step(const VectorField& derivative, const StateVector& x, double t,
                            double dt) {
    if (!(dt > 0.0)) throw NumericalError("rk4_step: dt must be positive");
    const double half = 0.5 * dt;
    const StateVector k1 = derivative(t, x);
    detail::require_finite(k1, "rk4_step derivative (stage 1)");
    const StateVector k2 = derivative(t + half, x + half * k1);
    detail::require_finite(k2, "rk4_step derivative (stage 2)");
    const StateVector k3 = derivative(t + half, x + half * k2);
    detail::require_finite(k3, "rk4_step derivative (stage 3)");
    const StateVector k4 = derivative(t + dt, x + dt * k3);
    detail::require_finite(k4, "rk4_step derivative (stage 4)");
    StateVector next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::require_finite(next, "rk4_step result");
    return next;
}

/// Integrates from (t0, x0) until `stop` holds.
///
/// `stop` is called exactly once per recorded sample, in order, so callers may
/// accumulate quantities inside it. The event is resolved at step granularity:
/// the trace ends at the first sample where `stop` is true. Throws
/// HorizonExceeded when the elapsed time reaches `t_max` first.
inline Trace propagate_until(const VectorField& derivative, const StateVector& x0,
                             const StopPredicate& stop, double dt, double t_max,
                             double t0 = 0.0) {
    if (!(dt > 0.0)) throw NumericalError("propagate_until: dt must be positive");
    if (!(t_max > 0.0)) throw NumericalError("propagate_until: t_max must be positive");

    Trace trace;
    StateVector x = x0;
    double t = t0;
    for (std::size_t k = 0;; ++k) {
        trace.push(t, x);
        if (stop(t, x)) {
            trace.stopped = true;
            return trace;
        }
        if (t - t0 >= t_max) {
            throw HorizonExceeded("propagate_until: stop event not reached within " +
                                  std::to_string(t_max) + " s");
        }
        x = rk4_step(derivative, x, t, dt);
        t = t0 + static_cast<double>(k + 1) * dt;
    }
}

}  // namespace pbcbf
