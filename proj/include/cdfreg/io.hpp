#pragma once

// CSV and JSON artifact writers. Every artifact starts with the version string
// and the resolved config; the parallelism degree is left out of the config so
// outputs do not depend on it.

#include "cdfreg/realdata.hpp"
#include "cdfreg/synth.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <ostream>
#include <string>

#ifndef CDFREG_VERSION
#define CDFREG_VERSION "unknown"
#endif

namespace cdfreg {

inline std::string version_string() { return CDFREG_VERSION; }

// Shortest round-trip representation; non-finite values print as nan/inf/-inf.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline nlohmann::json provenance_config(nlohmann::json config) {
    if (config.is_object()) config.erase("threads");
    return config;
}

inline void write_provenance(std::ostream& os, const nlohmann::json& config) {
    os << "# version: " << version_string() << "\n";
    os << "# config: " << provenance_config(config).dump() << "\n";
}

inline void write_records_csv(std::ostream& os, const std::vector<ExperimentRecord>& records, const nlohmann::json& config) {
    write_provenance(os, config);
    os << "experiment_id,scheme,d,n,lambda,rep,seed,metric_name,value\n";
    for (const auto& r : records) {
        const std::string prefix = csv_field(r.experiment_id) + "," + csv_field(r.scheme) + "," + std::to_string(r.d) + "," +
                                   std::to_string(r.n) + "," + format_double(r.lambda) + "," + std::to_string(r.rep) +
                                   "," + std::to_string(r.seed) + ",";
        if (r.failed) os << prefix << "error," << "nan\n";
        for (const auto& [name, value] : r.metrics) os << prefix << csv_field(name) << "," << format_double(value) << "\n";
    }
}

inline void write_aggregates_csv(std::ostream& os, const std::vector<AggregateRow>& rows, const nlohmann::json& config) {
    write_provenance(os, config);
    os << "experiment_id,scheme,d,n,lambda,metric_name,count,mean,q05,q95\n";
    for (const auto& r : rows)
        os << csv_field(r.experiment_id) << "," << csv_field(r.scheme) << "," << r.d << "," << r.n << ","
           << format_double(r.lambda) << "," << csv_field(r.metric) << "," << r.count << "," << format_double(r.mean)
           << "," << format_double(r.q05) << "," << format_double(r.q95) << "\n";
}

// Pipeline report rows; lambda is empty for the baselines.
inline void write_pipeline_csv(std::ostream& os, const PipelineReport& report, const nlohmann::json& config) {
    write_provenance(os, config);
    os << "method,lambda,seed,l2_error,status\n";
    for (const auto& r : report.rows)
        os << r.method << "," << (std::isfinite(r.lambda) ? format_double(r.lambda) : std::string{}) << "," << r.seed
           << "," << format_double(r.l2_error) << "," << csv_field(r.status) << "\n";
}

// JSON numbers cannot be NaN; non-finite values become null.
inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json slopes_json(const std::vector<SlopeRow>& slopes) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : slopes)
        out.push_back({{"d", s.d},
                       {"lambda", s.lambda},
                       {"metric", s.metric},
                       {"slope", json_number(s.slope)},
                       {"intercept", json_number(s.intercept)},
                       {"points", s.points}});
    return out;
}

inline nlohmann::json coverage_json(const CoverageReport& r) {
    nlohmann::json rows = nlohmann::json::array();
    double worst = 1.0;
    for (const auto& c : r.rows) {
        worst = std::min(worst, c.coverage);
        rows.push_back({{"n", c.n},
                        {"reps", c.reps},
                        {"covered", c.covered},
                        {"failures", c.failures},
                        {"coverage", json_number(c.coverage)},
                        {"mean_error", json_number(c.mean_error)},
                        {"mean_bound", json_number(c.mean_bound)},
                        {"dominance_violations", c.dominance_violations},
                        {"max_mismatch_norm", json_number(c.max_mismatch_norm)},
                        {"mu_min_sigma_n", json_number(c.mu_min_sigma_n)},
                        {"burn_in", json_number(c.burn_in)}});
    }
    return {{"mode", r.mode}, {"delta", r.delta}, {"sigma_min", json_number(r.sigma_min)}, {"coverage", worst}, {"rows", rows}};
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path + "'", "out");
    out << content;
}

}  // namespace cdfreg
