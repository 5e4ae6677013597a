#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pbcbf/errors.hpp"
#include "pbcbf/harness/run.hpp"
#include "pbcbf/ode.hpp"
#include "pbcbf/system.hpp"

namespace pbcbf::harness {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> trace_csv_header(const AffineSystem& system,
                                                 std::size_t barrier_count) {
    std::vector<std::string> cols{"t"};
    for (const auto& name : system.state_names) cols.push_back(name);
    for (const auto& name : system.input_names) cols.push_back(name);
    for (const auto& name : system.input_names) cols.push_back("u_nom_" + name);
    for (std::size_t i = 0; i < barrier_count; ++i) {
        cols.push_back(h_channel(i));
        cols.push_back(hp_channel(i));
    }
    for (const char* c : {"delta_h", "active", "filter_on", "qp_status"}) cols.emplace_back(c);
    return cols;
}

/// One row per sample; 17 significant digits; missing annotation channels are written as 0.
inline std::string trace_csv(const Trace& trace, const AffineSystem& system,
                             std::size_t barrier_count) {
    std::ostringstream os;
    const std::vector<std::string> header = trace_csv_header(system, barrier_count);
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << '\n';
    for (std::size_t k = 0; k < trace.size(); ++k) {
        os << format_double(trace.times[k]);
        for (Eigen::Index i = 0; i < system.n; ++i) os << ',' << format_double(trace.states[k][i]);
        for (Eigen::Index j = 0; j < system.m; ++j) {
            const InputVector& u = trace.inputs[k];
            os << ',' << format_double(u.size() == system.m ? u[j] : 0.0);
        }
        for (Eigen::Index j = 0; j < system.m; ++j) {
            os << ',' << format_double(trace.channel(nominal_channel(static_cast<std::size_t>(j)), k));
        }
        for (std::size_t i = 0; i < barrier_count; ++i) {
            os << ',' << format_double(trace.channel(h_channel(i), k)) << ','
               << format_double(trace.channel(hp_channel(i), k));
        }
        for (const char* c : {"delta_h", "active", "filter_on", "qp_status"}) {
            os << ',' << format_double(trace.channel(c, k));
        }
        os << '\n';
    }
    return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write to " + path + " failed");
}

inline void write_trace_csv(const Trace& trace, const AffineSystem& system,
                            std::size_t barrier_count, const std::string& path) {
    write_text(path, trace_csv(trace, system, barrier_count));
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == name) return c;
        }
        throw Error("csv: no column " + name);
    }
};

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    CsvTable table;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        return cells;
    };
    if (!std::getline(in, line)) throw IoError(path + ": empty file");
    table.header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        for (const std::string& cell : split(line)) row.push_back(std::stod(cell));
        if (row.size() != table.header.size()) throw IoError(path + ": ragged row");
        table.rows.push_back(std::move(row));
    }
    return table;
}

inline nlohmann::json metrics_json(const Metrics& m) {
    nlohmann::json j;
    j["min_h"] = m.min_h;
    j["min_margin"] = m.min_margin;
    j["violated"] = m.violated;
    j["first_activation_time"] =
        m.first_activation_time ? nlohmann::json(*m.first_activation_time) : nlohmann::json();
    j["saturation_steps"] = m.saturation_steps;
    j["qp_infeasible_steps"] = m.qp_infeasible_steps;
    return j;
}

inline void write_metrics_json(const Metrics& m, const std::string& path) {
    write_text(path, metrics_json(m).dump(2) + "\n");
}

}  // namespace pbcbf::harness
