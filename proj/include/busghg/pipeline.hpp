#pragma once

// Stage orchestration: ingest -> pairing -> sinuosity -> emissions ->
// gapfill -> analytics. Each stage writes its documented files, so any stage
// can be rerun from its predecessor's output.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "busghg/analytics.hpp"
#include "busghg/config.hpp"
#include "busghg/emissions.hpp"
#include "busghg/error.hpp"
#include "busghg/gapfill.hpp"
#include "busghg/ingest.hpp"
#include "busghg/io.hpp"
#include "busghg/pairing.hpp"
#include "busghg/sinuosity.hpp"
#include "busghg/street_graph.hpp"

#ifndef BUSGHG_VERSION
#define BUSGHG_VERSION "0.0.0"
#endif

namespace busghg {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = BUSGHG_VERSION;

/// Output file names, relative to the output directory.
namespace files {
inline constexpr const char* segments = "segments.csv";
inline constexpr const char* diagnostics = "ingest_diagnostics.csv";
inline constexpr const char* partitions = "partitions";
inline constexpr const char* sinuosity = "sinuosity_report.csv";
inline constexpr const char* emissions = "emissions.csv";
inline constexpr const char* daily = "daily.csv";
inline constexpr const char* ranges = "expected_ranges.csv";
inline constexpr const char* filled = "filled_days.csv";
inline constexpr const char* monthly = "monthly_totals.csv";
inline constexpr const char* lattice = "lattice.geojson";
inline constexpr const char* temporal = "temporal.csv";
inline constexpr const char* lines = "lines.csv";
inline constexpr const char* freeflow = "freeflow.csv";
inline constexpr const char* validation = "validation.csv";
}  // namespace files

/// Every configuration key with its effective value.
inline std::map<std::string, std::string> effective_settings(const RunConfig& c) {
    auto d = [](double v) { return csv::format_double(v); };
    std::string cols;
    for (const auto f : c.gps_schema.columns) {
        cols += (cols.empty() ? "" : ",") + std::string(field_name(f));
    }
    std::string weekdays;
    for (const auto w : c.lattice_weekdays) {
        weekdays += (weekdays.empty() ? "" : ",") + std::string(kWeekdayNames[w]);
    }
    return {
        {"gps.path", c.gps_path},
        {"gps.delimiter", c.gps_schema.delimiter == '\t' ? "tab" : std::string(1, c.gps_schema.delimiter)},
        {"gps.header", c.gps_schema.has_header ? "true" : "false"},
        {"gps.columns", cols},
        {"graph.nodes", c.graph_nodes},
        {"graph.edges", c.graph_edges},
        {"graph.geojson", c.graph_geojson},
        {"curve.path", c.curve_path},
        {"fuels.path", c.fuels_path},
        {"reference.path", c.reference_path},
        {"bounds.min_lat", d(c.bounds.min_lat)},
        {"bounds.max_lat", d(c.bounds.max_lat)},
        {"bounds.min_lon", d(c.bounds.min_lon)},
        {"bounds.max_lon", d(c.bounds.max_lon)},
        {"time.utc_offset", format_utc_offset(c.utc_offset)},
        {"pairing.max_gap_s", d(c.pairing.max_gap_s)},
        {"pairing.max_speed_kmh", d(c.pairing.max_speed_kmh)},
        {"pairing.near_threshold_m", d(c.pairing.near_threshold_m)},
        {"sinuosity.fraction", d(c.sample_fraction)},
        {"sinuosity.seed", std::to_string(c.seed)},
        {"sinuosity.snap_radius_m", d(c.snap_radius_m)},
        {"sinuosity.bin_width", d(c.histogram.width)},
        {"sinuosity.hist_min", d(c.histogram.low)},
        {"sinuosity.hist_max", d(c.histogram.high)},
        {"sinuosity.mean_override", c.mean_s_override ? d(*c.mean_s_override) : ""},
        {"lattice.cell_size_m", d(c.cell_size_m)},
        {"analysis.weekdays", weekdays.empty() ? "all" : weekdays},
        {"analysis.best_days_only", c.best_days_only ? "true" : "false"},
        {"analysis.start_date", c.start_date ? format_date(*c.start_date) : ""},
        {"analysis.end_date", c.end_date ? format_date(*c.end_date) : ""},
        {"freeflow.dawn_start", std::to_string(c.freeflow.dawn.begin)},
        {"freeflow.dawn_end", std::to_string(c.freeflow.dawn.end)},
        {"freeflow.peak_start", std::to_string(c.freeflow.peak.begin)},
        {"freeflow.peak_end", std::to_string(c.freeflow.peak.end)},
        {"freeflow.min_samples", std::to_string(c.freeflow.min_samples)},
        {"freeflow.tail_fraction", d(c.freeflow.tail_fraction)},
        {"gapfill.percentile", std::to_string(c.gapfill.percentile)},
        {"gapfill.min_observations", std::to_string(c.gapfill.min_observations)},
        {"output.dir", c.output_dir},
        {"output.dump_partitions", c.dump_partitions ? "true" : "false"},
        {"workers", std::to_string(c.workers)},
    };
}

/// Run record written as JSON at the end of a run or stage.
class Manifest {
public:
    Manifest(const RunConfig& cfg, std::string command) {
        doc_["tool"] = "busghg";
        doc_["version"] = kVersion;
        doc_["command"] = std::move(command);
        doc_["config"] = effective_settings(cfg);
        doc_["seed"] = cfg.seed;
        doc_["stages"] = nlohmann::json::array();
        doc_["warnings"] = nlohmann::json::array();
        doc_["outputs"] = nlohmann::json::array();
    }

    nlohmann::json& stage(const std::string& name, double seconds) {
        doc_["stages"].push_back({{"name", name}, {"seconds", seconds}, {"counts", nlohmann::json::object()}});
        return doc_["stages"].back()["counts"];
    }

    void warn(const std::string& message) {
        spdlog::warn("{}", message);
        doc_["warnings"].push_back(message);
    }

    void output(const std::string& name) { doc_["outputs"].push_back(name); }

    nlohmann::json& operator[](const std::string& key) { return doc_[key]; }
    const nlohmann::json& json() const { return doc_; }

    void write(const fs::path& path) const {
        io::write_file_atomic(path, [&](std::ostream& os) { os << doc_.dump(2) << '\n'; });
    }

private:
    nlohmann::json doc_;
};

/// Runs `fn` and prefixes any error with the stage name while keeping its
/// category (configuration, data, internal).
template <class Fn>
auto run_stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
    spdlog::info("stage {}: start", name);
    try {
        return fn();
    } catch (const ConfigError& e) {
        throw ConfigError(name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(name + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error(name + ": " + e.what());
    }
}

class StageTimer {
public:
    StageTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline void write_output(Manifest& m, const fs::path& dir, const char* name,
                         const std::function<void(std::ostream&)>& body) {
    io::write_file_atomic(dir / name, body);
    m.output(name);
}

// ---------------------------------------------------------------- ingest + pairing

struct IngestOutput {
    std::vector<TravelSegment> segments;
    IngestStats stats;
    PairingStats pairing;
    std::size_t partitions = 0;
};

inline IngestOutput stage_ingest(const RunConfig& cfg, Manifest& m) {
    return run_stage("ingest", [&] {
        StageTimer timer;
        require_file("gps.path", cfg.gps_path);
        const fs::path out_dir = cfg.output_dir;
        std::ifstream in(cfg.gps_path, std::ios::binary);
        if (!in) {
            throw DataError("cannot read " + cfg.gps_path);
        }
        const auto parsed = parse_records(in, cfg.gps_schema, cfg.workers);
        if (in.bad()) {
            throw DataError("I/O error while reading " + cfg.gps_path);
        }
        auto cleaned = clean_records(parsed, cfg.bounds);
        const auto parts = partition_by_vehicle_day(cleaned.records, cfg.utc_offset);
        if (cfg.dump_partitions) {
            io::dump_partitions(out_dir / files::partitions, parts, cfg.utc_offset);
        }
        IngestOutput out;
        out.stats = cleaned.stats;
        out.partitions = parts.size();
        auto paired = build_all_segments(parts, cfg.pairing, cfg.utc_offset, cfg.workers);
        out.segments = std::move(paired.segments);
        out.pairing = paired.stats;

        write_output(m, out_dir, files::diagnostics, [&](std::ostream& os) {
            csv::Writer w(os);
            w.row("row", "column", "message");
            for (const auto& d : cleaned.diagnostics) {
                w.row(d.row, d.column, d.message);
            }
        });
        write_output(m, out_dir, files::segments,
                     [&](std::ostream& os) { io::write_segments(os, out.segments, cfg.utc_offset); });

        auto& c = m.stage("ingest", timer.seconds());
        c["rows_read"] = out.stats.rows_read;
        c["rows_parsed"] = out.stats.rows_parsed;
        c["rows_rejected_parse"] = out.stats.rows_rejected_parse;
        c["rows_rejected_bounds"] = out.stats.rows_rejected_bounds;
        c["clean_records"] = out.stats.clean();
        c["partitions"] = out.partitions;
        c["pairs_considered"] = out.pairing.pairs_considered;
        c["segments"] = out.pairing.segments;
        c["gap_skipped"] = out.pairing.gap_skipped;
        c["zero_dt_skipped"] = out.pairing.zero_dt_skipped;
        c["speed_rejected"] = out.pairing.speed_rejected;
        c["line_changes"] = out.pairing.line_changes;
        if (out.stats.rows_rejected_parse > 0) {
            m.warn("ingest: " + std::to_string(out.stats.rows_rejected_parse) + " malformed rows skipped (see " +
                   files::diagnostics + ")");
        }
        if (out.pairing.line_changes > 0) {
            m.warn("ingest: " + std::to_string(out.pairing.line_changes) +
                   " segments span a line change (attributed to the start record's line)");
        }
        spdlog::info("ingest: {} rows, {} clean, {} segments", out.stats.rows_read, out.stats.clean(),
                     out.pairing.segments);
        return out;
    });
}

// ---------------------------------------------------------------- sinuosity

inline StreetGraph load_graph(const RunConfig& cfg) {
    require_graph(cfg);
    if (!cfg.graph_geojson.empty()) {
        return StreetGraph::load_geojson(cfg.graph_geojson);
    }
    return StreetGraph::load_csv(cfg.graph_nodes, cfg.graph_edges);
}

inline SinuosityEstimate stage_sinuosity(const RunConfig& cfg, std::span<const TravelSegment> segments, Manifest& m) {
    return run_stage("sinuosity", [&] {
        StageTimer timer;
        const auto graph = load_graph(cfg);
        const auto sample = sample_segments(segments, cfg.sample_fraction, cfg.seed);
        const auto recon = reconstruct_sample(segments, sample, graph, cfg.pairing, cfg.snap_radius_m, cfg.workers);
        const auto est = estimate_sinuosity(recon, segments.size(), cfg.histogram);
        write_output(m, cfg.output_dir, files::sinuosity,
                     [&](std::ostream& os) { io::write_sinuosity_report(os, est, cfg.seed, segments.size()); });
        auto& c = m.stage("sinuosity", timer.seconds());
        c["graph_nodes"] = graph.node_count();
        c["graph_edges"] = graph.edge_count();
        c["population"] = segments.size();
        c["sample_size"] = est.sample_size;
        for (std::size_t i = 0; i < est.dispositions.size(); ++i) {
            c[std::string(kDispositionNames[i])] = est.dispositions[i];
        }
        c["clamped"] = est.clamped;
        c["below_tolerance"] = est.below_tolerance;
        m["mean_s"] = est.mean_s;
        m["mean_s_source"] = "estimated";
        if (est.below_tolerance > 0) {
            m.warn("sinuosity: " + std::to_string(est.below_tolerance) +
                   " used samples fall below 1 - 0.05 (clamped to 1)");
        }
        spdlog::info("sinuosity: mean_s = {} from {} used samples", est.mean_s, est.used());
        return est;
    });
}

// ---------------------------------------------------------------- emissions

struct EmissionsOutput {
    EmissionDataset data;
    std::vector<DailyCount> daily;
};

/// Days covered by the analysis: configured bounds, else the data's extent.
inline std::pair<Date, Date> analysis_calendar(const RunConfig& cfg, std::span<const TravelSegment> segments) {
    Date first = cfg.start_date.value_or(Date::max());
    Date last = cfg.end_date.value_or(Date::min());
    if (!cfg.start_date || !cfg.end_date) {
        for (const auto& s : segments) {
            if (!cfg.start_date) {
                first = std::min(first, s.day);
            }
            if (!cfg.end_date) {
                last = std::max(last, s.day);
            }
        }
    }
    return {first, last};
}

inline EmissionsOutput compute_emission_products(const RunConfig& cfg, std::vector<TravelSegment> segments,
                                                 double mean_s, std::int64_t* dropped = nullptr) {
    const auto curve = ConsumptionCurve::load_csv(cfg.curve_path);
    const auto fuels = FuelTable::load_csv(cfg.fuels_path);
    const auto n_in = segments.size();
    if (cfg.start_date || cfg.end_date) {
        std::erase_if(segments, [&](const TravelSegment& s) {
            return (cfg.start_date && s.day < *cfg.start_date) || (cfg.end_date && s.day > *cfg.end_date);
        });
    }
    if (dropped) {
        *dropped = static_cast<std::int64_t>(n_in - segments.size());
    }
    EmissionsOutput out;
    out.data.emissions = compute_emissions(segments, mean_s, curve, fuels, cfg.pairing, cfg.workers);
    const auto [first, last] = analysis_calendar(cfg, segments);
    out.data.segments = std::move(segments);
    out.daily = daily_counts(out.data.segments, out.data.emissions, first, last);
    return out;
}

inline EmissionsOutput stage_emissions(const RunConfig& cfg, std::vector<TravelSegment> segments, double mean_s,
                                       Manifest& m) {
    return run_stage("emissions", [&] {
        StageTimer timer;
        require_file("curve.path", cfg.curve_path);
        require_file("fuels.path", cfg.fuels_path);
        std::int64_t dropped = 0;
        auto out = compute_emission_products(cfg, std::move(segments), mean_s, &dropped);
        write_output(m, cfg.output_dir, files::emissions, [&](std::ostream& os) {
            io::write_emissions(os, out.data.segments, out.data.emissions, cfg.utc_offset);
        });
        write_output(m, cfg.output_dir, files::daily, [&](std::ostream& os) { io::write_daily(os, out.daily); });
        const auto total = grand_total(out.data.segments, out.data.emissions);
        auto& c = m.stage("emissions", timer.seconds());
        c["segments"] = out.data.segments.size();
        c["outside_analysis_period"] = dropped;
        c["days"] = out.daily.size();
        c["dist_km"] = total.dist_km;
        c["fuel_l"] = total.fuel_l;
        c["co2e_kg"] = total.co2e_kg;
        c["mean_s"] = mean_s;
        spdlog::info("emissions: {} segments, {} kg CO2e", out.data.segments.size(), total.co2e_kg);
        return out;
    });
}

// ---------------------------------------------------------------- gapfill

struct GapfillOutput {
    std::map<unsigned, ExpectedRange> ranges;
    std::vector<FilledDay> filled;
    std::vector<MonthlyTotals> monthly;
};

inline GapfillOutput compute_gapfill(const RunConfig& cfg, std::span<const DailyCount> daily) {
    GapfillOutput out;
    out.ranges = compute_expected_ranges(daily, cfg.gapfill);
    out.filled = fill_missing_days(daily, out.ranges);
    out.monthly = to_reporting_units(monthly_band(out.filled));
    return out;
}

inline GapfillOutput stage_gapfill(const RunConfig& cfg, std::span<const DailyCount> daily, Manifest& m) {
    return run_stage("gapfill", [&] {
        StageTimer timer;
        auto out = compute_gapfill(cfg, daily);
        const fs::path dir = cfg.output_dir;
        write_output(m, dir, files::ranges, [&](std::ostream& os) { io::write_expected_ranges(os, out.ranges); });
        write_output(m, dir, files::filled, [&](std::ostream& os) { io::write_filled_days(os, out.filled); });
        write_output(m, dir, files::monthly, [&](std::ostream& os) { io::write_monthly_totals(os, out.monthly); });
        std::size_t scaled = 0, synthesized = 0;
        for (const auto& f : out.filled) {
            scaled += f.method == FillMethod::scaled;
            synthesized += f.method == FillMethod::synthesized;
        }
        auto& c = m.stage("gapfill", timer.seconds());
        c["days"] = out.filled.size();
        c["scaled_days"] = scaled;
        c["synthesized_days"] = synthesized;
        c["months"] = out.monthly.size();
        for (const auto& [wd, r] : out.ranges) {
            if (r.insufficient) {
                m.warn("gapfill: " + std::string(kWeekdayNames[wd]) + " has only " + std::to_string(r.observations) +
                       " observed days; expected range flagged insufficient");
            }
        }
        return out;
    });
}

// ---------------------------------------------------------------- analytics

inline void stage_analyze(const RunConfig& cfg, const EmissionDataset& data, std::span<const DailyCount> daily,
                          std::span<const MonthlyTotals> monthly, Manifest& m) {
    run_stage("analyze", [&] {
        StageTimer timer;
        const fs::path dir = cfg.output_dir;
        const auto& segs = data.segments;
        const auto& ems = data.emissions;

        DayFilter filter;
        filter.weekdays = cfg.lattice_weekdays;
        if (cfg.best_days_only) {
            filter.days = best_days(daily, compute_expected_ranges(daily, cfg.gapfill));
        }
        const auto spec = LatticeSpec::covering(cfg.bounds, cfg.cell_size_m);
        const auto grid = aggregate_lattice(segs, ems, spec, filter);
        write_output(m, dir, files::lattice, [&](std::ostream& os) { os << io::lattice_geojson(grid).dump() << '\n'; });

        std::vector<Date> calendar;
        calendar.reserve(daily.size());
        for (const auto& d : daily) {
            calendar.push_back(d.date);
        }
        const auto profile = temporal_profile(segs, ems, filter, calendar);
        write_output(m, dir, files::temporal, [&](std::ostream& os) { io::write_temporal(os, profile); });

        const auto lines = line_distribution(segs, ems);
        write_output(m, dir, files::lines, [&](std::ostream& os) { io::write_lines(os, lines); });

        const auto ff = freeflow_analysis(segs, ems, cfg.freeflow);
        write_output(m, dir, files::freeflow, [&](std::ostream& os) { io::write_freeflow(os, ff); });

        auto& c = m.stage("analyze", timer.seconds());
        c["segments"] = segs.size();
        c["lattice_cells"] = grid.cells.size();
        c["lattice_overflow_segments"] = grid.overflow.segments;
        c["lines"] = lines.size();
        std::size_t ff_ok = 0;
        for (const auto& r : ff) {
            ff_ok += r.status == FreeFlowStatus::ok;
        }
        c["freeflow_lines_ok"] = ff_ok;
        if (grid.overflow.segments > 0) {
            m.warn("analyze: " + std::to_string(grid.overflow.segments) +
                   " segments start outside the lattice (overflow bucket)");
        }
        if (!cfg.reference_path.empty()) {
            require_file("reference.path", cfg.reference_path);
            const auto reference = load_reference_csv(cfg.reference_path);
            const auto rows = topdown_compare(monthly, reference);
            write_output(m, dir, files::validation, [&](std::ostream& os) { io::write_validation(os, rows); });
            std::size_t inside = 0, compared = 0;
            for (const auto& r : rows) {
                if (r.status == CompareStatus::compared) {
                    ++compared;
                    inside += r.inside;
                } else {
                    m.warn("analyze: " + format_year_month(r.month) + " " + std::string(metric_name(r.metric)) + ": " +
                           std::string(compare_status_name(r.status)));
                }
            }
            c["validation_rows"] = compared;
            c["validation_inside_band"] = inside;
        }
        return 0;
    });
}

// ---------------------------------------------------------------- whole run

/// One-shot run. Returns the manifest (already written to the output directory).
inline Manifest run_pipeline(const RunConfig& cfg, const std::string& command = "run") {
    validate_config(cfg);
    Manifest m(cfg, command);
    StageTimer total;
    fs::create_directories(cfg.output_dir);
    auto ingested = stage_ingest(cfg, m);
    double mean_s = 0.0;
    if (cfg.mean_s_override) {
        mean_s = *cfg.mean_s_override;
        m["mean_s"] = mean_s;
        m["mean_s_source"] = "override";
        m.warn("sinuosity: estimation skipped, mean_s override " + csv::format_double(mean_s) + " in use");
    } else {
        mean_s = stage_sinuosity(cfg, ingested.segments, m).mean_s;
    }
    auto emitted = stage_emissions(cfg, std::move(ingested.segments), mean_s, m);
    const auto filled = stage_gapfill(cfg, emitted.daily, m);
    stage_analyze(cfg, emitted.data, emitted.daily, filled.monthly, m);
    m["total_seconds"] = total.seconds();
    m.write(fs::path(cfg.output_dir) / "manifest.json");
    return m;
}

}  // namespace busghg
