#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pbcbf/errors.hpp"
#include "pbcbf/filter.hpp"
#include "pbcbf/harness/controllers.hpp"
#include "pbcbf/ode.hpp"
#include "pbcbf/predictor.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf::harness {

/// A closed-loop experiment in built form.
struct Scenario {
    std::string name;
    AffineSystem system;
    StateVector x0;
    /// Fresh controller for each run (controllers may carry integrator state).
    std::function<std::unique_ptr<Controller>()> make_controller;
    std::optional<DoubletSpec> disturbance;
    std::vector<GuardedBarrier> barriers;
    FilterConfig filter;
    double duration = 0.0;
    double dt_sim = 1e-3;
    std::string trace_path;
    std::string metrics_path;
};

inline constexpr double kViolationTolerance = 1e-3;

struct Metrics {
    std::vector<double> min_h;  // per barrier
    double min_margin = std::numeric_limits<double>::infinity();
    bool violated = false;
    std::optional<double> first_activation_time;
    std::size_t saturation_steps = 0;
    std::size_t qp_infeasible_steps = 0;
};

/// Checks the invariants that must hold before a run: positive step and
/// duration, h(x0) > 0 for every barrier and, in prediction-based mode,
/// h(x0) + delta_h(x0) > 0. Throws ScenarioError.
inline void validate_scenario(const Scenario& s) {
    if (!(s.dt_sim > 0.0)) throw ScenarioError(s.name + ": dt_sim must be positive");
    if (!(s.duration >= 0.0)) throw ScenarioError(s.name + ": duration must be nonnegative");
    if (s.x0.size() != s.system.n) throw ScenarioError(s.name + ": x0 has wrong dimension");
    if (!s.make_controller) throw ScenarioError(s.name + ": no controller");
    try {
        s.filter.validate(s.system.m);
    } catch (const Error& e) {
        throw ScenarioError(s.name + ": " + e.what());
    }
    for (const GuardedBarrier& b : s.barriers) {
        const double h = b.barrier.value(s.x0);
        if (!(h > 0.0)) {
            throw ScenarioError(s.name + ": x0 is not inside " + b.barrier.name + " (h = " +
                                std::to_string(h) + ")");
        }
        if (s.filter.mode == FilterMode::PredictionBased) {
            const PredictionResult p =
                compute_delta_h(s.system, b.barrier, b.policy, s.x0, s.filter.dt_prediction,
                                s.filter.t_max_prediction);
            if (!(h + p.delta_h > 0.0)) {
                throw ScenarioError(s.name + ": x0 is outside the reduced set of " +
                                    b.barrier.name + " (h_P = " + std::to_string(h + p.delta_h) +
                                    ")");
            }
        }
    }
}

inline bool on_input_boundary(const InputBounds& bounds, const InputVector& u) {
    constexpr double tol = 1e-12;
    if (bounds.is_norm_ball()) return u.norm() >= bounds.as_norm_ball().radius - tol;
    const Box& b = bounds.as_box();
    return ((u - b.lower).array() <= tol).any() || ((b.upper - u).array() <= tol).any();
}

/// Annotation channel names shared by the runner and the CSV writer.
inline std::string h_channel(std::size_t i) { return "h_" + std::to_string(i); }
inline std::string hp_channel(std::size_t i) { return "hP_" + std::to_string(i); }
inline std::string delta_h_channel(std::size_t i) { return "delta_h_" + std::to_string(i); }
inline std::string margin_channel(std::size_t i) { return "margin_" + std::to_string(i); }
inline std::string nominal_channel(std::size_t j) { return "u_nom_" + std::to_string(j); }

/// Computes Metrics from an annotated trace.
inline Metrics compute_metrics(const Trace& trace, std::size_t barrier_count) {
    Metrics m;
    m.min_h.assign(barrier_count, std::numeric_limits<double>::infinity());
    for (std::size_t k = 0; k < trace.size(); ++k) {
        for (std::size_t i = 0; i < barrier_count; ++i) {
            m.min_h[i] = std::min(m.min_h[i], trace.channel(h_channel(i), k));
            m.min_margin = std::min(m.min_margin, trace.channel(margin_channel(i), k));
        }
        if (!m.first_activation_time && trace.channel("filter_on", k) != 0.0) {
            m.first_activation_time = trace.times[k];
        }
        if (trace.channel("saturated", k) != 0.0) ++m.saturation_steps;
        if (trace.channel("qp_status", k) == static_cast<double>(QpStatus::Infeasible)) {
            ++m.qp_infeasible_steps;
        }
    }
    m.violated = m.min_margin < -kViolationTolerance;
    return m;
}

struct RunResult {
    Trace trace;
    Metrics metrics;
};

/// Closed-loop simulation.
///
/// At every sample: nominal input from the controller plus disturbance, one
/// filter step, then an RK4 step with the filtered input held constant. The
/// trace holds one row per sample, the last row at t = duration.
inline RunResult run_scenario(const Scenario& s) {
    validate_scenario(s);
    const auto steps = static_cast<std::size_t>(std::llround(s.duration / s.dt_sim));
    const std::size_t nb = s.barriers.size();
    std::unique_ptr<Controller> controller = s.make_controller();

    RunResult result;
    Trace& trace = result.trace;
    StateVector x = s.x0;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * s.dt_sim;
        InputVector u_nom = controller->command(t, x);
        if (s.disturbance) u_nom += doublet(t, *s.disturbance, s.system.m);

        const FilterOutput out = filter_step(s.system, s.barriers, s.filter, x, u_nom);
        const FilterDiagnostics& diag = out.diagnostics;

        trace.push(t, x, out.u);
        const InputVector u_clamped = s.system.bounds.clamp(u_nom);
        for (Eigen::Index j = 0; j < s.system.m; ++j) {
            trace.annotate(nominal_channel(static_cast<std::size_t>(j)), u_clamped[j]);
        }
        double delta_h = 0.0;
        for (std::size_t i = 0; i < nb; ++i) {
            const BarrierReport& r = diag.barriers[i];
            trace.annotate(h_channel(i), r.h);
            trace.annotate(hp_channel(i), r.h + r.delta_h);
            trace.annotate(delta_h_channel(i), r.delta_h);
            trace.annotate(margin_channel(i), s.barriers[i].barrier.safety_margin(x));
            if (r.active) delta_h = r.delta_h;
        }
        trace.annotate("delta_h", delta_h);
        trace.annotate("active", diag.active ? static_cast<double>(*diag.active) : -1.0);
        trace.annotate("filter_on", diag.filter_on ? 1.0 : 0.0);
        trace.annotate("qp_status", static_cast<double>(diag.status));
        trace.annotate("saturated", on_input_boundary(s.system.bounds, out.u) ? 1.0 : 0.0);

        if (k == steps) break;
        controller->advance(t, x, out.u, s.dt_sim);
        const InputVector u = out.u;
        x = rk4_step([&](double, const StateVector& y) { return s.system.dynamics(y, u); }, x, t,
                     s.dt_sim);
    }
    result.metrics = compute_metrics(trace, nb);
    return result;
}

// Safe-set slices -----------------------------------------------------------------

struct SliceAxis {
    Eigen::Index index = 0;
    double lower = 0.0;
    double upper = 1.0;
    std::size_t count = 2;

    double value(std::size_t k) const {
        if (count < 2) return lower;
        return lower + (upper - lower) * static_cast<double>(k) / static_cast<double>(count - 1);
    }
};

struct SliceSpec {
    StateVector base;  // values of the coordinates that are held fixed
    SliceAxis first;
    SliceAxis second;
};

/// h and h_P on a grid; rows follow the first axis, columns the second.
/// Cells where the stopping policy fails, or its trajectory leaves the
/// model's domain, hold NaN in hP.
struct SliceGrid {
    std::vector<double> first_values;
    std::vector<double> second_values;
    Eigen::MatrixXd h;
    Eigen::MatrixXd hP;
    Eigen::MatrixXd h_dot;  // rate under the stopping policy
    std::size_t failures = 0;
};

inline SliceGrid safe_set_slice(const AffineSystem& system, const Barrier& barrier,
                                const PredictionPolicy& policy, const SliceSpec& spec,
                                double dt = kDefaultPredictionDt,
                                double t_max = kDefaultPredictionHorizon) {
    if (spec.base.size() != system.n) throw Error("safe_set_slice: base state has wrong size");
    if (spec.first.count == 0 || spec.second.count == 0) throw Error("safe_set_slice: empty grid");
    const auto n1 = static_cast<Eigen::Index>(spec.first.count);
    const auto n2 = static_cast<Eigen::Index>(spec.second.count);
    SliceGrid grid;
    grid.h.resize(n1, n2);
    grid.hP.resize(n1, n2);
    grid.h_dot.resize(n1, n2);
    for (std::size_t a = 0; a < spec.first.count; ++a) grid.first_values.push_back(spec.first.value(a));
    for (std::size_t b = 0; b < spec.second.count; ++b) {
        grid.second_values.push_back(spec.second.value(b));
    }
    for (Eigen::Index a = 0; a < n1; ++a) {
        for (Eigen::Index b = 0; b < n2; ++b) {
            StateVector x = spec.base;
            x[spec.first.index] = grid.first_values[static_cast<std::size_t>(a)];
            x[spec.second.index] = grid.second_values[static_cast<std::size_t>(b)];
            const double h = barrier.value(x);
            grid.h(a, b) = h;
            try {
                grid.h_dot(a, b) =
                    h_dot(barrier, system, x, evaluate_policy(policy, system, barrier, x));
                grid.hP(a, b) = h + compute_delta_h(system, barrier, policy, x, dt, t_max).delta_h;
            } catch (const Error& e) {
                // Policy failures and predictions that leave the model's domain.
                if (!dynamic_cast<const PolicyFailure*>(&e) && !dynamic_cast<const DomainError*>(&e)) {
                    throw;
                }
                grid.hP(a, b) = std::numeric_limits<double>::quiet_NaN();
                ++grid.failures;
            }
        }
    }
    return grid;
}

}  // namespace pbcbf::harness
