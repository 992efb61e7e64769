#pragma once

// Run configuration: one key=value file, '#' comments, flags layered on top.
// Relative paths are resolved against the directory holding the file.
// docs/configuration.md lists every key with its default.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "busghg/analytics.hpp"
#include "busghg/csv.hpp"
#include "busghg/error.hpp"
#include "busghg/gapfill.hpp"
#include "busghg/geo.hpp"
#include "busghg/ingest.hpp"
#include "busghg/pairing.hpp"
#include "busghg/sinuosity.hpp"
#include "busghg/time.hpp"

namespace busghg {

struct RunConfig {
    // inputs
    std::string gps_path;
    Schema gps_schema;
    std::string graph_nodes;
    std::string graph_edges;
    std::string graph_geojson;
    std::string curve_path;
    std::string fuels_path;
    std::string reference_path;  ///< optional

    BoundingBox bounds = kRioBounds;
    UtcOffset utc_offset{-180};
    PairingConfig pairing;

    double sample_fraction = 0.01;
    std::uint64_t seed = 1;
    double snap_radius_m = 100.0;
    HistogramSpec histogram;
    std::optional<double> mean_s_override;

    double cell_size_m = 500.0;
    std::set<unsigned> lattice_weekdays;  ///< empty = every weekday
    bool best_days_only = false;
    std::optional<Date> start_date;
    std::optional<Date> end_date;

    FreeFlowConfig freeflow;
    GapfillConfig gapfill;

    std::string output_dir = "out";
    bool dump_partitions = false;
    unsigned workers = 1;

    /// Every key as given (after flags), for the manifest snapshot.
    std::map<std::string, std::string> values;
};

namespace config_detail {

inline double to_double(const std::string& key, const std::string& v) {
    const auto d = csv::parse_double(v);
    if (!d) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return *d;
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
    const auto d = csv::parse_int(v);
    if (!d) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    return *d;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "0" || v == "false" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline Date to_date(const std::string& key, const std::string& v) { return require_date(v, key); }

inline int to_hour(const std::string& key, const std::string& v) {
    const auto h = to_int(key, v);
    if (h < 0 || h > 24) {
        throw ConfigError(key + ": hour must be in 0..24");
    }
    return static_cast<int>(h);
}

inline std::set<unsigned> to_weekdays(const std::string& key, const std::string& v) {
    std::set<unsigned> out;
    if (v.empty() || v == "all") {
        return out;
    }
    for (const auto& part : csv::split(v, ',')) {
        const auto wd = parse_weekday(csv::trim(part));
        if (!wd) {
            throw ConfigError(key + ": unknown weekday '" + part + "'");
        }
        out.insert(*wd);
    }
    return out;
}

}  // namespace config_detail

/// Keys whose values are file paths.
inline const std::set<std::string> kPathKeys{"gps.path",    "graph.nodes",    "graph.edges", "graph.geojson",
                                             "curve.path",  "fuels.path",     "reference.path", "output.dir"};

/// Applies one key. Unknown keys are configuration errors.
inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
    using namespace config_detail;
    const auto& v = value;
    if (key == "gps.path") {
        cfg.gps_path = v;
    } else if (key == "gps.delimiter") {
        if (v == "tab" || v == "\\t") {
            cfg.gps_schema.delimiter = '\t';
        } else if (v.size() == 1) {
            cfg.gps_schema.delimiter = v[0];
        } else {
            throw ConfigError("gps.delimiter: expected a single character or 'tab'");
        }
    } else if (key == "gps.header") {
        cfg.gps_schema.has_header = to_bool(key, v);
    } else if (key == "gps.columns") {
        cfg.gps_schema.columns = Schema::parse_columns(v);
    } else if (key == "graph.nodes") {
        cfg.graph_nodes = v;
    } else if (key == "graph.edges") {
        cfg.graph_edges = v;
    } else if (key == "graph.geojson") {
        cfg.graph_geojson = v;
    } else if (key == "curve.path") {
        cfg.curve_path = v;
    } else if (key == "fuels.path") {
        cfg.fuels_path = v;
    } else if (key == "reference.path") {
        cfg.reference_path = v;
    } else if (key == "bounds.min_lat") {
        cfg.bounds.min_lat = to_double(key, v);
    } else if (key == "bounds.max_lat") {
        cfg.bounds.max_lat = to_double(key, v);
    } else if (key == "bounds.min_lon") {
        cfg.bounds.min_lon = to_double(key, v);
    } else if (key == "bounds.max_lon") {
        cfg.bounds.max_lon = to_double(key, v);
    } else if (key == "time.utc_offset") {
        const auto off = parse_utc_offset(v);
        if (!off) {
            throw ConfigError("time.utc_offset: expected +HH:MM, got '" + v + "'");
        }
        cfg.utc_offset = *off;
    } else if (key == "pairing.max_gap_s") {
        cfg.pairing.max_gap_s = to_double(key, v);
    } else if (key == "pairing.max_speed_kmh") {
        cfg.pairing.max_speed_kmh = to_double(key, v);
    } else if (key == "pairing.near_threshold_m") {
        cfg.pairing.near_threshold_m = to_double(key, v);
    } else if (key == "sinuosity.fraction") {
        cfg.sample_fraction = to_double(key, v);
    } else if (key == "sinuosity.seed") {
        const auto s = to_int(key, v);
        if (s < 0) {
            throw ConfigError("sinuosity.seed must be >= 0");
        }
        cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "sinuosity.snap_radius_m") {
        cfg.snap_radius_m = to_double(key, v);
    } else if (key == "sinuosity.bin_width") {
        cfg.histogram.width = to_double(key, v);
    } else if (key == "sinuosity.hist_min") {
        cfg.histogram.low = to_double(key, v);
    } else if (key == "sinuosity.hist_max") {
        cfg.histogram.high = to_double(key, v);
    } else if (key == "sinuosity.mean_override") {
        if (v.empty()) {
            cfg.mean_s_override.reset();
        } else {
            cfg.mean_s_override = to_double(key, v);
        }
    } else if (key == "lattice.cell_size_m") {
        cfg.cell_size_m = to_double(key, v);
    } else if (key == "analysis.weekdays") {
        cfg.lattice_weekdays = to_weekdays(key, v);
    } else if (key == "analysis.best_days_only") {
        cfg.best_days_only = to_bool(key, v);
    } else if (key == "analysis.start_date") {
        cfg.start_date = v.empty() ? std::nullopt : std::optional<Date>(to_date(key, v));
    } else if (key == "analysis.end_date") {
        cfg.end_date = v.empty() ? std::nullopt : std::optional<Date>(to_date(key, v));
    } else if (key == "freeflow.dawn_start") {
        cfg.freeflow.dawn.begin = to_hour(key, v);
    } else if (key == "freeflow.dawn_end") {
        cfg.freeflow.dawn.end = to_hour(key, v);
    } else if (key == "freeflow.peak_start") {
        cfg.freeflow.peak.begin = to_hour(key, v);
    } else if (key == "freeflow.peak_end") {
        cfg.freeflow.peak.end = to_hour(key, v);
    } else if (key == "freeflow.min_samples") {
        cfg.freeflow.min_samples = to_int(key, v);
    } else if (key == "freeflow.tail_fraction") {
        cfg.freeflow.tail_fraction = to_double(key, v);
    } else if (key == "gapfill.percentile") {
        const auto p = to_int(key, v);
        if (p < 1 || p > 100) {
            throw ConfigError("gapfill.percentile must be in 1..100");
        }
        cfg.gapfill.percentile = static_cast<unsigned>(p);
    } else if (key == "gapfill.min_observations") {
        const auto n = to_int(key, v);
        if (n < 1) {
            throw ConfigError("gapfill.min_observations must be >= 1");
        }
        cfg.gapfill.min_observations = static_cast<std::size_t>(n);
    } else if (key == "output.dir") {
        cfg.output_dir = v;
    } else if (key == "output.dump_partitions") {
        cfg.dump_partitions = to_bool(key, v);
    } else if (key == "workers") {
        const auto n = to_int(key, v);
        if (n < 1 || n > 1024) {
            throw ConfigError("workers must be in 1..1024");
        }
        cfg.workers = static_cast<unsigned>(n);
    } else {
        throw ConfigError("unknown configuration key '" + key + "'");
    }
    cfg.values[key] = value;
}

/// Splits "key=value"; whitespace around both parts is dropped.
inline std::pair<std::string, std::string> split_setting(const std::string& text, const std::string& where) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
        throw ConfigError(where + ": expected key=value, got '" + text + "'");
    }
    return {std::string(csv::trim(std::string_view(text).substr(0, eq))),
            std::string(csv::trim(std::string_view(text).substr(eq + 1)))};
}

/// Reads key=value lines; later lines override earlier ones.
inline std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open configuration file " + path);
    }
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    const auto base = std::filesystem::path(path).parent_path();
    while (std::getline(in, line)) {
        ++lineno;
        const auto view = csv::trim(line);
        if (view.empty() || view.front() == '#') {
            continue;
        }
        auto [key, value] = split_setting(std::string(view), path + ":" + std::to_string(lineno));
        if (kPathKeys.contains(key) && !value.empty() && std::filesystem::path(value).is_relative()) {
            value = (base / value).lexically_normal().string();
        }
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

/// Builds a configuration from defaults, then `file` (if any), then `overrides` in order.
inline RunConfig load_config(const std::optional<std::string>& file,
                             const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    RunConfig cfg;
    if (file) {
        for (const auto& [k, v] : read_config_file(*file)) {
            try {
                apply_setting(cfg, k, v);
            } catch (const ConfigError& e) {
                throw ConfigError(*file + ": " + e.what());
            }
        }
    }
    for (const auto& [k, v] : overrides) {
        apply_setting(cfg, k, v);
    }
    return cfg;
}

inline void require_file(const std::string& key, const std::string& path) {
    if (path.empty()) {
        throw ConfigError(key + " is not set");
    }
    if (!std::filesystem::is_regular_file(path)) {
        throw ConfigError(key + ": file not found: " + path);
    }
}

/// Parameter checks shared by every stage.
inline void validate_parameters(const RunConfig& cfg) {
    cfg.bounds.validate();
    cfg.pairing.validate();
    cfg.histogram.validate();
    cfg.freeflow.validate();
    cfg.gapfill.validate();
    if (!(cfg.sample_fraction > 0.0) || cfg.sample_fraction > 1.0) {
        throw ConfigError("sinuosity.fraction must be in (0, 1]");
    }
    if (!(cfg.snap_radius_m > 0.0)) {
        throw ConfigError("sinuosity.snap_radius_m must be > 0");
    }
    if (cfg.mean_s_override && !(*cfg.mean_s_override > 0.0)) {
        throw ConfigError("sinuosity.mean_override must be > 0");
    }
    if (!(cfg.cell_size_m > 0.0)) {
        throw ConfigError("lattice.cell_size_m must be > 0");
    }
    if (cfg.start_date && cfg.end_date && *cfg.end_date < *cfg.start_date) {
        throw ConfigError("analysis.end_date is before analysis.start_date");
    }
}

inline void require_graph(const RunConfig& cfg) {
    if (!cfg.graph_geojson.empty()) {
        require_file("graph.geojson", cfg.graph_geojson);
        return;
    }
    require_file("graph.nodes", cfg.graph_nodes);
    require_file("graph.edges", cfg.graph_edges);
}

/// Full-run validation: parameters plus every input file.
inline void validate_config(const RunConfig& cfg) {
    validate_parameters(cfg);
    require_file("gps.path", cfg.gps_path);
    if (!cfg.mean_s_override) {
        require_graph(cfg);
    }
    require_file("curve.path", cfg.curve_path);
    require_file("fuels.path", cfg.fuels_path);
    if (!cfg.reference_path.empty()) {
        require_file("reference.path", cfg.reference_path);
    }
}

}  // namespace busghg
