// Command-line front end: run, compare, slice and sweep scenario files.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "pbcbf/pbcbf.hpp"

namespace fs = std::filesystem;
using namespace pbcbf;
using namespace pbcbf::harness;

namespace {

enum ExitCode { kOk = 0, kScenarioInvalid = 2, kRunAborted = 3, kIoFailure = 4 };

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("pbcbf");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("[%l] %v");
    const char* env = std::getenv("PBCBF_LOG");
    const std::string level = env ? env : "error";
    if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else if (level == "info") {
        spdlog::set_level(spdlog::level::info);
    } else {
        spdlog::set_level(spdlog::level::err);
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Eigen::Index state_index(const AffineSystem& sys, const std::string& name) {
    for (std::size_t i = 0; i < sys.state_names.size(); ++i) {
        if (sys.state_names[i] == name) return static_cast<Eigen::Index>(i);
    }
    throw ScenarioError("unknown state \"" + name + "\"");
}

std::string label_of(const Scenario& s) { return std::string(to_string(s.filter.mode)); }

struct Output {
    fs::path dir = ".";
    std::string suffix;

    fs::path file(const std::string& name) const {
        if (suffix.empty()) return dir / name;
        const fs::path p(name);
        return dir / (p.stem().string() + "_" + suffix + p.extension().string());
    }
};

Metrics run_and_write(const Scenario& s, const Output& out) {
    spdlog::info("{}: running mode {} for {} s at dt {}", s.name, label_of(s), s.duration,
                 s.dt_sim);
    const RunResult r = run_scenario(s);
    fs::create_directories(out.dir);
    const fs::path trace = out.file(s.trace_path);
    const fs::path metrics = out.file(s.metrics_path);
    write_trace_csv(r.trace, s.system, s.barriers.size(), trace.string());
    write_metrics_json(r.metrics, metrics.string());
    spdlog::info("{}: wrote {} and {}", s.name, trace.string(), metrics.string());
    if (r.metrics.qp_infeasible_steps > 0) {
        spdlog::warn("{}: {} steps with an infeasible filter QP", s.name,
                     r.metrics.qp_infeasible_steps);
    }
    return r.metrics;
}

void print_table_header() {
    std::printf("%-10s %12s %9s %12s %10s %10s\n", "run", "min_margin", "violated", "first_on",
                "saturated", "qp_infeas");
}

void print_table_row(const std::string& label, const Metrics& m) {
    const std::string first =
        m.first_activation_time ? format_double(*m.first_activation_time) : std::string("-");
    std::printf("%-10s %12.6g %9s %12s %10zu %10zu\n", label.c_str(), m.min_margin,
                m.violated ? "yes" : "no", first.c_str(), m.saturation_steps,
                m.qp_infeasible_steps);
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();

    CLI::App app{"Prediction-based control barrier function simulator"};
    app.require_subcommand(1);

    std::string scenario_path;
    std::string out_dir = ".";
    std::string mode;
    double gamma = 0.0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("scenario", scenario_path, "Scenario JSON file")->required();
        cmd->add_option("--out-dir", out_dir, "Directory for traces and metrics");
    };

    CLI::App* run = app.add_subcommand("run", "Single closed-loop run");
    add_common(run);
    run->add_option("--mode", mode, "Override the filter mode (none, base, pb)");
    run->add_option("--gamma", gamma, "Override the class-K gain");

    std::string modes = "none,base,pb";
    CLI::App* compare = app.add_subcommand("compare", "Same scenario under several filter modes");
    add_common(compare);
    compare->add_option("--modes", modes, "Comma-separated modes");

    std::string grid;
    std::vector<std::string> fixes;
    std::size_t barrier_index = 0;
    std::string slice_file = "slice.csv";
    CLI::App* slice = app.add_subcommand("slice", "h and h_P on a 2-D state grid");
    add_common(slice);
    slice->add_option("--grid", grid, "name:lo:hi:count,name:lo:hi:count")->required();
    slice->add_option("--at", fixes, "Fixed coordinate name=value (natural units)");
    slice->add_option("--barrier", barrier_index, "Barrier index");
    slice->add_option("--file", slice_file, "Output CSV name");

    std::string param = "gamma";
    std::string values;
    CLI::App* sweep = app.add_subcommand("sweep", "Repeat a run over parameter values");
    add_common(sweep);
    sweep->add_option("--param", param, "Parameter to vary (gamma)");
    sweep->add_option("--values", values, "Comma-separated values")->required();
    sweep->add_option("--mode", mode, "Override the filter mode");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kScenarioInvalid;
    }

    try {
        Scenario base = load_scenario(scenario_path);
        Output out{out_dir, ""};

        if (run->parsed()) {
            if (!mode.empty()) base.filter.mode = parse_mode(mode);
            if (gamma > 0.0) base.filter.kappa = ClassKappa::linear(gamma);
            const Metrics m = run_and_write(base, out);
            print_table_header();
            print_table_row(label_of(base), m);
        } else if (compare->parsed()) {
            std::vector<std::pair<std::string, Metrics>> rows;
            for (const std::string& m : split(modes, ',')) {
                Scenario s = base;
                s.filter.mode = parse_mode(m);
                rows.emplace_back(m, run_and_write(s, Output{out_dir, m}));
            }
            print_table_header();
            for (const auto& [label, m] : rows) print_table_row(label, m);
        } else if (slice->parsed()) {
            const std::vector<std::string> axes = split(grid, ',');
            if (axes.size() != 2) throw ScenarioError("--grid needs exactly two axes");
            SliceSpec spec;
            spec.base = base.x0;
            SliceAxis* targets[2] = {&spec.first, &spec.second};
            for (int a = 0; a < 2; ++a) {
                const std::vector<std::string> f = split(axes[static_cast<std::size_t>(a)], ':');
                if (f.size() != 4) throw ScenarioError("grid axis must be name:lo:hi:count");
                targets[a]->index = state_index(base.system, f[0]);
                targets[a]->lower = std::stod(f[1]);
                targets[a]->upper = std::stod(f[2]);
                targets[a]->count = static_cast<std::size_t>(std::stoul(f[3]));
            }
            for (const std::string& fix : fixes) {
                const auto eq = fix.find('=');
                if (eq == std::string::npos) throw ScenarioError("--at expects name=value");
                spec.base[state_index(base.system, fix.substr(0, eq))] = std::stod(fix.substr(eq + 1));
            }
            if (barrier_index >= base.barriers.size()) throw ScenarioError("no such barrier");
            const GuardedBarrier& gb = base.barriers[barrier_index];
            const SliceGrid g = safe_set_slice(base.system, gb.barrier, gb.policy, spec,
                                               base.filter.dt_prediction,
                                               base.filter.t_max_prediction);
            std::ostringstream os;
            os << base.system.state_names[static_cast<std::size_t>(spec.first.index)] << ','
               << base.system.state_names[static_cast<std::size_t>(spec.second.index)]
               << ",h,hP,h_dot\n";
            for (std::size_t a = 0; a < g.first_values.size(); ++a) {
                for (std::size_t b = 0; b < g.second_values.size(); ++b) {
                    const auto ia = static_cast<Eigen::Index>(a);
                    const auto ib = static_cast<Eigen::Index>(b);
                    os << format_double(g.first_values[a]) << ','
                       << format_double(g.second_values[b]) << ',' << format_double(g.h(ia, ib))
                       << ',' << format_double(g.hP(ia, ib)) << ','
                       << format_double(g.h_dot(ia, ib)) << '\n';
                }
            }
            fs::create_directories(out.dir);
            write_text((out.dir / slice_file).string(), os.str());
            std::printf("slice: %zu cells, %zu policy failures -> %s\n",
                        g.first_values.size() * g.second_values.size(), g.failures,
                        (out.dir / slice_file).string().c_str());
        } else if (sweep->parsed()) {
            if (param != "gamma") throw ScenarioError("only --param gamma is supported");
            if (!mode.empty()) base.filter.mode = parse_mode(mode);
            std::vector<std::pair<std::string, Metrics>> rows;
            for (const std::string& v : split(values, ',')) {
                Scenario s = base;
                s.filter.kappa = ClassKappa::linear(std::stod(v));
                rows.emplace_back("gamma=" + v, run_and_write(s, Output{out_dir, "gamma" + v}));
            }
            print_table_header();
            for (const auto& [label, m] : rows) print_table_row(label, m);
        }
    } catch (const ScenarioError& e) {
        spdlog::error("invalid scenario: {}", e.what());
        return kScenarioInvalid;
    } catch (const IoError& e) {
        spdlog::error("i/o: {}", e.what());
        return kIoFailure;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("i/o: {}", e.what());
        return kIoFailure;
    } catch (const std::invalid_argument& e) {
        spdlog::error("invalid argument: {}", e.what());
        return kScenarioInvalid;
    } catch (const Error& e) {
        spdlog::error("run aborted: {}", e.what());
        return kRunAborted;
    }
    return kOk;
}
