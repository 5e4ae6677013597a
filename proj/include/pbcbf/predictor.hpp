#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pbcbf/barrier.hpp"
#include "pbcbf/errors.hpp"
#include "pbcbf/ode.hpp"
#include "pbcbf/policy.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf {

inline constexpr double kDefaultPredictionDt = 1e-3;
inline constexpr double kDefaultPredictionHorizon = 60.0;
// Rates this close to zero count as stopped. Without it a policy whose
// direction vanishes together with h_dot (norm-ball gradient at r_dot = 0)
// can sit at h_dot = -1e-16 forever.
inline constexpr double kStopRateTolerance = 1e-12;

/// Stopping margin of one barrier at one state.
struct PredictionResult {
    double delta_h = 0.0;  // <= 0
    double T = 0.0;        // time until h_dot first reaches zero under u0
    StateVector stop_state;
    std::size_t steps = 0;
};

/// Total change of h while the stopping policy drives h_dot from negative to zero.
///
/// Propagates x' = f + G u0(x) from `x`, with u0 held over each step, and
/// stops at the first sample where h_dot(x, u0) >= -kStopRateTolerance. The integral is the left Riemann sum over completed
/// steps; the final partial step is dropped. A policy that never stops the
/// approach within `t_max` raises PolicyFailure.
inline PredictionResult compute_delta_h(const AffineSystem& system, const Barrier& barrier,
                                        const PredictionPolicy& policy, const StateVector& x,
                                        double dt = kDefaultPredictionDt,
                                        double t_max = kDefaultPredictionHorizon,
                                        const InputVector& u_nominal = InputVector()) {
    // u0 is sampled at each step start and held through the RK4 stages, the
    // same zero-order hold the closed loop uses. Evaluating a switching policy
    // inside the stages lets it chatter about its switching surface.
    InputVector held;
    std::vector<double> rates;
    const auto stop = [&](double, const StateVector& s) {
        held = evaluate_policy(policy, system, barrier, s, u_nominal);
        const double rate = h_dot(barrier, system, s, held);
        if (rate >= -kStopRateTolerance) return true;
        rates.push_back(rate);
        return false;
    };
    const auto derivative = [&](double, const StateVector& s) {
        return system.dynamics(s, held);
    };

    Trace trace;
    try {
        trace = propagate_until(derivative, x, stop, dt, t_max);
    } catch (const HorizonExceeded& e) {
        throw PolicyFailure(barrier.name + " / " + policy.label() + ": " + e.what());
    }

    PredictionResult result;
    result.stop_state = trace.states.back();
    result.steps = rates.size();
    if (rates.empty()) return result;
    double sum = 0.0;
    for (double r : rates) sum += r;
    result.delta_h = sum * dt;
    result.T = trace.times.back();
    return result;
}

/// A barrier paired with the policy used for its stopping prediction.
struct GuardedBarrier {
    Barrier barrier;
    PredictionPolicy policy;
};

/// Index of the barrier whose rate under its own policy is negative.
///
/// A rate within kStopRateTolerance of zero counts as inactive. More than one negative rate
/// means the barriers are not an opposed pair and raises MultipleActive.
inline std::optional<std::size_t> select_active(const std::vector<GuardedBarrier>& barriers,
                                                const AffineSystem& system, const StateVector& x,
                                                const InputVector& u_nominal = InputVector(),
                                                std::vector<double>* rates_out = nullptr) {
    std::optional<std::size_t> active;
    if (rates_out) rates_out->clear();
    for (std::size_t i = 0; i < barriers.size(); ++i) {
        const auto& entry = barriers[i];
        const InputVector u0 = evaluate_policy(entry.policy, system, entry.barrier, x, u_nominal);
        const double rate = h_dot(entry.barrier, system, x, u0);
        if (rates_out) rates_out->push_back(rate);
        if (rate < -kStopRateTolerance) {
            if (active) {
                throw MultipleActive("select_active: " + barriers[*active].barrier.name + " and " +
                                     entry.barrier.name + " both approach their boundary");
            }
            active = i;
        }
    }
    return active;
}

}  // namespace pbcbf
