#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "pbcbf/aircraft.hpp"
#include "pbcbf/barrier.hpp"
#include "pbcbf/errors.hpp"
#include "pbcbf/filter.hpp"
#include "pbcbf/harness/controllers.hpp"
#include "pbcbf/harness/run.hpp"
#include "pbcbf/policy.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf::harness {

using json = nlohmann::json;

inline double deg(double v) { return v * M_PI / 180.0; }

namespace detail {

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
}

inline double number(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw ScenarioError(std::string("missing numeric field \"") + key + "\"");
    }
    return j.at(key).get<double>();
}

inline double number_or(const json& j, const char* key, double fallback) {
    return j.contains(key) ? number(j, key) : fallback;
}

inline bool is_angular(const std::string& unit) { return unit == "rad" || unit == "rad/s"; }

}  // namespace detail

/// Aircraft data from a JSON object keyed by coefficient symbol. Elevator
/// limits are given in degrees.
inline AircraftParams aircraft_params_from_json(const json& j) {
    using detail::number;
    using detail::number_or;
    AircraftParams p;
    p.mass = number(j, "m");
    p.Iy = number(j, "Iy");
    p.S = number(j, "S");
    p.chord = number(j, "c");
    p.c_F0 << number(j, "C_L0"), number(j, "C_D0");
    p.C_Fi << number(j, "C_L_alpha"), number_or(j, "C_L_M", 0.0), number_or(j, "C_L_q", 0.0),
        number(j, "C_D_alpha"), number_or(j, "C_D_M", 0.0), number_or(j, "C_D_q", 0.0);
    p.c_F_alphadot << number_or(j, "C_L_alphadot", 0.0), number_or(j, "C_D_alphadot", 0.0);
    p.c_F_delta_E << number_or(j, "C_L_delta_E", 0.0), number_or(j, "C_D_delta_E", 0.0);
    p.C_m0 = number(j, "C_m0");
    p.c_mi << number(j, "C_m_alpha"), number_or(j, "C_m_M", 0.0), number_or(j, "C_m_q", 0.0);
    p.C_m_delta_E = number(j, "C_m_delta_E");
    p.C_m_alphadot = number_or(j, "C_m_alphadot", 0.0);
    p.X_delta_th = number(j, "X_delta_th");
    p.rho = number_or(j, "rho", p.rho);
    p.speed_of_sound = number_or(j, "a", p.speed_of_sound);
    p.g = number_or(j, "g", p.g);
    p.delta_E_min = deg(number_or(j, "delta_E_min_deg", -20.0));
    p.delta_E_max = deg(number_or(j, "delta_E_max_deg", 10.0));
    p.delta_th_min = number_or(j, "delta_th_min", 0.0);
    p.delta_th_max = number_or(j, "delta_th_max", 100.0);
    try {
        p.validate();
    } catch (const Error& e) {
        throw ScenarioError(e.what());
    }
    return p;
}

inline AircraftParams load_aircraft_params(const std::filesystem::path& path) {
    return aircraft_params_from_json(detail::read_json_file(path));
}

inline FilterMode parse_mode(const std::string& s) {
    if (s == "none") return FilterMode::None;
    if (s == "base") return FilterMode::Base;
    if (s == "pb") return FilterMode::PredictionBased;
    throw ScenarioError("unknown filter mode \"" + s + "\" (expected none, base or pb)");
}

namespace detail {

struct BuildContext {
    AffineSystem system;
    std::optional<TrimPoint> trim;
    std::filesystem::path base_dir;
};

inline BuildContext build_system(const json& j, const std::filesystem::path& base_dir) {
    BuildContext ctx;
    ctx.base_dir = base_dir;
    const std::string model = j.at("model").get<std::string>();
    if (model == "double_integrator") {
        ctx.system = double_integrator_polar(number_or(j, "u_max", 1.0), number_or(j, "r_floor", 1e-6));
    } else if (model == "acc") {
        std::function<double(double)> resistance;
        if (j.contains("resistance")) {
            resistance = polynomial_resistance(j.at("resistance").get<std::vector<double>>());
        }
        ctx.system = acc_system(number(j, "mass"), number(j, "v_front"), number(j, "a_max"),
                                resistance);
    } else if (model == "aircraft") {
        AircraftParams params;
        if (j.contains("params_file")) {
            params = load_aircraft_params(base_dir / j.at("params_file").get<std::string>());
        } else {
            params = aircraft_params_from_json(j.at("params"));
        }
        ctx.system = aircraft_longitudinal(params);
        if (j.contains("trim")) {
            const json& t = j.at("trim");
            ctx.trim = trim_solve(params, number(t, "V0"), deg(number_or(t, "gamma_path_deg", 0.0)));
        }
    } else {
        throw ScenarioError("unknown system model \"" + model + "\"");
    }
    return ctx;
}

/// Angular states are written in degrees (and deg/s).
inline StateVector build_x0(const json& j, const BuildContext& ctx) {
    const AffineSystem& sys = ctx.system;
    if (j.is_string()) {
        if (j.get<std::string>() != "trim" || !ctx.trim) {
            throw ScenarioError("x0 \"" + j.get<std::string>() + "\" needs a trim block");
        }
        return ctx.trim->x;
    }
    if (j.is_object() && j.contains("cartesian")) {
        const json& c = j.at("cartesian");
        const auto p = c.at("position").get<std::vector<double>>();
        const auto v = c.at("velocity").get<std::vector<double>>();
        if (p.size() != 2 || v.size() != 2 || sys.n != 4) {
            throw ScenarioError("cartesian x0 is only defined for the planar double integrator");
        }
        return cartesian_to_polar(Eigen::Vector2d(p[0], p[1]), Eigen::Vector2d(v[0], v[1]));
    }
    const auto values = j.get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != sys.n) {
        throw ScenarioError("x0 has " + std::to_string(values.size()) + " entries, expected " +
                            std::to_string(sys.n));
    }
    StateVector x(sys.n);
    for (Eigen::Index i = 0; i < sys.n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        x[i] = is_angular(sys.state_units[k]) ? deg(values[k]) : values[k];
    }
    return x;
}

/// Input-space vector; angle channels in degrees, null entries become NaN.
inline InputVector input_vector(const json& j, const AffineSystem& sys) {
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != sys.m) {
        throw ScenarioError("input vector must have " + std::to_string(sys.m) + " entries");
    }
    InputVector u(sys.m);
    for (Eigen::Index i = 0; i < sys.m; ++i) {
        const json& e = j.at(static_cast<std::size_t>(i));
        if (e.is_null()) {
            u[i] = std::numeric_limits<double>::quiet_NaN();
        } else {
            u[i] = sys.is_angle_input(static_cast<std::size_t>(i)) ? deg(e.get<double>())
                                                                   : e.get<double>();
        }
    }
    return u;
}

inline PredictionPolicy build_policy(const json& j, const BuildContext& ctx,
                                     const Barrier& barrier, const StateVector& x0) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "normball_gradient") return {NormBallGradient{}};
    if (type == "qp_maximal") return {QpMaximal{}};
    if (type != "bang_bang") throw ScenarioError("unknown policy \"" + type + "\"");

    BangBang bb;
    const std::string source = j.value("gradient", std::string("CAB"));
    if (source == "CAB") {
        bb.source = GradientSource::CAB;
    } else if (source == "CB") {
        bb.source = GradientSource::CB;
    } else {
        throw ScenarioError("bang_bang gradient must be CB or CAB");
    }
    if (j.contains("neutral")) bb.neutral = input_vector(j.at("neutral"), ctx.system);
    bb.zero_tolerance = number_or(j, "zero_tolerance", 0.0);
    const std::string lin = j.value("linearization", std::string("state"));
    if (lin == "trim") {
        if (!ctx.trim) throw ScenarioError("bang_bang linearization \"trim\" needs a trim block");
        bb.reference = make_linear_reference(ctx.system, barrier, ctx.trim->x, ctx.trim->u);
    } else if (lin == "x0") {
        bb.reference = make_linear_reference(ctx.system, barrier, x0, InputVector::Zero(ctx.system.m));
    } else if (lin != "state") {
        throw ScenarioError("bang_bang linearization must be state, x0 or trim");
    }
    return {bb};
}

inline Barrier build_barrier(const json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "radial_keepout") return radial_keepout_barrier(number(j, "R"), number(j, "mu"));
    if (type == "gap") return gap_barrier(number(j, "z0"));
    if (type == "aoa_upper") return aoa_upper_barrier(deg(number(j, "alpha_max_deg")));
    if (type == "aoa_lower") return aoa_lower_barrier(deg(number(j, "alpha_min_deg")));
    throw ScenarioError("unknown barrier \"" + type + "\"");
}

inline std::function<std::unique_ptr<Controller>()> build_controller(const json& j,
                                                                     const BuildContext& ctx,
                                                                     const json& barriers) {
    const std::string type = j.at("type").get<std::string>();
    const AffineSystem& sys = ctx.system;
    if (type == "tracking") {
        TrackingGains g;
        g.kp = number(j, "kp");
        g.kd = number(j, "kd");
        g.push = number_or(j, "push", 1.0);
        g.u_max = sys.bounds.is_norm_ball() ? sys.bounds.as_norm_ball().radius : 1.0;
        g.keepout_radius = 1.0;
        for (const json& b : barriers) {
            if (b.value("type", std::string()) == "radial_keepout") g.keepout_radius = number(b, "R");
        }
        TrackingController probe(g);  // validates gains at load time
        return [g] { return std::make_unique<TrackingController>(g); };
    }
    if (type == "pid_sas_autothrottle") {
        if (!ctx.trim) throw ScenarioError("pid_sas_autothrottle needs a trim block");
        SasGains g;
        g.k_P_alpha = number_or(j, "k_P_alpha", 0.0);
        g.k_D_theta = number_or(j, "k_D_theta", 0.0);
        g.k_P_theta = number_or(j, "k_P_theta", 0.0);
        g.k_I_theta = number_or(j, "k_I_theta", 0.0);
        g.k_P_u = number_or(j, "k_P_u", 0.0);
        g.k_I_u = number_or(j, "k_I_u", 0.0);
        g.k_D_u = number_or(j, "k_D_u", 0.0);
        g.derivative_pole = number_or(j, "derivative_pole", 50.0);
        const TrimPoint trim = *ctx.trim;
        const Box limits = sys.bounds.as_box();
        PidSasAutothrottle probe(trim.x, trim.u, g, limits);
        return [trim, g, limits] {
            return std::make_unique<PidSasAutothrottle>(trim.x, trim.u, g, limits);
        };
    }
    if (type == "cruise") {
        if (!sys.bounds.is_box() || sys.m != 1) throw ScenarioError("cruise needs the acc model");
        const double limit = sys.bounds.as_box().upper[0];
        const double mass = limit / number(j, "a_max");
        const double v_des = number(j, "v_desired");
        const double gain = number(j, "gain");
        return [=] { return std::make_unique<CruiseController>(mass, v_des, gain, limit); };
    }
    throw ScenarioError("unknown controller \"" + type + "\"");
}

inline DoubletSpec build_doublet(const json& j) {
    DoubletSpec d;
    d.channel = j.value("channel", 0);
    d.amplitude1 = deg(number_or(j, "amplitude1_deg", 10.0));
    d.amplitude2 = deg(number_or(j, "amplitude2_deg", -20.0));
    d.width = number_or(j, "width", 5.0);
    d.start1 = number_or(j, "start1", 0.0);
    d.start2 = number_or(j, "start2", 5.0);
    if (!(d.width > 0.0)) throw ScenarioError("doublet width must be positive");
    return d;
}

}  // namespace detail

/// Builds a scenario from its JSON description. A relative coefficient-file
/// name resolves against `base_dir`; output names are kept as written. Validation of the
/// initial state runs in run_scenario, after any overrides.
inline Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir = ".") {
    using detail::number;
    using detail::number_or;
    try {
        Scenario s;
        s.name = j.value("name", std::string("scenario"));
        detail::BuildContext ctx = detail::build_system(j.at("system"), base_dir);
        s.system = ctx.system;
        s.x0 = detail::build_x0(j.at("x0"), ctx);

        const json barriers = j.value("barriers", json::array());
        for (const json& b : barriers) {
            Barrier barrier = detail::build_barrier(b);
            PredictionPolicy policy = b.contains("policy")
                                          ? detail::build_policy(b.at("policy"), ctx, barrier, s.x0)
                                          : PredictionPolicy{BangBang{}};
            s.barriers.push_back({std::move(barrier), std::move(policy)});
        }
        if (s.barriers.size() == 2) {
            if (!check_opposed_pair(s.barriers[0].barrier, s.barriers[1].barrier, {s.x0})) {
                throw ScenarioError("two barriers must form an opposed pair");
            }
        } else if (s.barriers.size() > 2) {
            throw ScenarioError("at most two barriers (an opposed pair) are supported");
        }

        const json filter = j.value("filter", json::object());
        s.filter.mode = parse_mode(filter.value("mode", std::string("pb")));
        s.filter.kappa = ClassKappa::linear(number_or(filter, "gamma", 1.0));
        s.filter.dt_prediction = number_or(filter, "dt_prediction", kDefaultPredictionDt);
        s.filter.t_max_prediction = number_or(filter, "t_max_prediction", kDefaultPredictionHorizon);
        if (filter.contains("H")) {
            const auto rows = filter.at("H").get<std::vector<std::vector<double>>>();
            s.filter.H.resize(static_cast<Eigen::Index>(rows.size()), s.system.m);
            for (std::size_t r = 0; r < rows.size(); ++r) {
                if (static_cast<Eigen::Index>(rows[r].size()) != s.system.m) {
                    throw ScenarioError("H has wrong shape");
                }
                for (std::size_t c = 0; c < rows[r].size(); ++c) {
                    s.filter.H(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
                }
            }
        }

        s.make_controller = detail::build_controller(j.at("controller"), ctx, barriers);
        if (j.contains("disturbance") && !j.at("disturbance").is_null()) {
            s.disturbance = detail::build_doublet(j.at("disturbance"));
            if (s.disturbance->channel < 0 || s.disturbance->channel >= s.system.m) {
                throw ScenarioError("doublet channel out of range");
            }
        }
        s.duration = number(j, "duration");
        s.dt_sim = number_or(j, "dt_sim", 1e-3);
        if (!(s.duration > 0.0)) throw ScenarioError("duration must be positive");
        if (!(s.dt_sim > 0.0)) throw ScenarioError("dt_sim must be positive");

        const json outputs = j.value("outputs", json::object());
        s.trace_path = outputs.value("trace", s.name + "_trace.csv");
        s.metrics_path = outputs.value("metrics", s.name + "_metrics.json");
        return s;
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("malformed scenario: ") + e.what());
    } catch (const TrimNotConverged& e) {
        throw ScenarioError(e.what());
    }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    const json j = detail::read_json_file(path);
    return scenario_from_json(j, path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace pbcbf::harness
