#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "maxdisc/verify.hpp"

namespace maxdisc {

/// Machine-file float formatting: 17 significant digits round-trips
/// any double exactly.
inline std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Combined (empirical + quadrature) standard error at the lattice
/// point realizing the sup-distance.
inline double stderr_at_sup(const ExperimentReport& report) {
    double best = 0.0, sup = -1.0;
    for (const auto& point : report.points) {
        const double dist = std::abs(point.empirical - point.theoretical);
        if (dist > sup) {
            sup = dist;
            best = std::sqrt(point.stderr_emp * point.stderr_emp +
                             point.theo_error * point.theo_error);
        }
    }
    return best;
}

/// Deterministic JSON summary of a report. Wall-clock runtime is
/// deliberately omitted so reruns are byte-identical.
inline nlohmann::json report_to_json(const ExperimentReport& report) {
    nlohmann::json doc;
    doc["horizon"] = report.horizon;
    doc["ln_T"] = std::log(report.horizon);
    doc["regime"] = to_string(report.regime);
    doc["delta"] = report.delta;
    doc["delta_snap_error"] = report.delta_snap_error;
    doc["mesh"] = {{"h", report.mesh.h}, {"n", report.mesh.n}};
    doc["seed"] = report.master_seed;
    doc["replications"] = report.replications;
    doc["sup_distance"] = report.sup_distance;
    doc["worst_z"] = report.worst_z;
    nlohmann::json points = nlohmann::json::array();
    for (const auto& point : report.points) {
        points.push_back({{"x", point.x},
                          {"y", point.y},
                          {"empirical", point.empirical},
                          {"stderr", point.stderr_emp},
                          {"theoretical", point.theoretical},
                          {"theo_error", point.theo_error},
                          {"z", point.z_score}});
    }
    doc["points"] = points;
    return doc;
}

/// Per-lattice-point CSV of a report.
inline std::string report_csv(const ExperimentReport& report) {
    std::string out = "x,y,empirical,stderr,theoretical,theo_error,z\n";
    for (const auto& point : report.points) {
        out += format_full(point.x) + "," + format_full(point.y) + "," +
               format_full(point.empirical) + "," + format_full(point.stderr_emp) + "," +
               format_full(point.theoretical) + "," + format_full(point.theo_error) +
               "," + format_full(point.z_score) + "\n";
    }
    return out;
}

/// Per-replication normalized maxima.
inline std::string samples_csv(const ExperimentReport& report) {
    std::string out = "replication,component,m_cont,m_grid,x_hat,y_hat\n";
    for (std::size_t rep = 0; rep < report.samples.size(); ++rep) {
        const auto& sample = report.samples[rep];
        for (std::size_t k = 0; k < sample.x_hat.size(); ++k) {
            out += std::to_string(rep) + "," + std::to_string(k) + "," +
                   format_full(sample.m_cont[k]) + "," + format_full(sample.m_grid[k]) +
                   "," + format_full(sample.x_hat[k]) + "," +
                   format_full(sample.y_hat[k]) + "\n";
        }
    }
    return out;
}

/// Plot data: empirical-vs-theoretical CDF overlay per lattice point.
inline std::string overlay_csv(const ExperimentReport& report) {
    std::string out = "# columns: x, y, empirical, stderr, theoretical\n";
    out += "x,y,empirical,stderr,theoretical\n";
    for (const auto& point : report.points) {
        out += format_full(point.x) + "," + format_full(point.y) + "," +
               format_full(point.empirical) + "," + format_full(point.stderr_emp) + "," +
               format_full(point.theoretical) + "\n";
    }
    return out;
}

/// Plot data: sup-distance against ln T for a convergence sweep.
inline std::string sweep_csv(const SweepResult& sweep) {
    std::string out = "# columns: ln_T, sup_distance, stderr_at_sup\n";
    out += "ln_T,sup_distance,stderr_at_sup\n";
    for (const auto& report : sweep.reports) {
        out += format_full(std::log(report.horizon)) + "," +
               format_full(report.sup_distance) + "," +
               format_full(stderr_at_sup(report)) + "\n";
    }
    return out;
}

inline nlohmann::json sweep_to_json(const SweepResult& sweep) {
    nlohmann::json doc;
    doc["pass"] = sweep.pass;
    doc["sup_distances"] = sweep.sup_distances;
    nlohmann::json horizons = nlohmann::json::array();
    for (const auto& report : sweep.reports) horizons.push_back(report.horizon);
    doc["horizons"] = horizons;
    nlohmann::json reports = nlohmann::json::array();
    for (const auto& report : sweep.reports) reports.push_back(report_to_json(report));
    doc["reports"] = reports;
    return doc;
}

}  // namespace maxdisc
