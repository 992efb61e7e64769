#pragma once

// Stage files. Every intermediate CSV stores doubles in shortest round-trip
// form, so a stage that reads its predecessor's file sees exactly the values
// the one-shot pipeline holds in memory.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "busghg/analytics.hpp"
#include "busghg/csv.hpp"
#include "busghg/emissions.hpp"
#include "busghg/error.hpp"
#include "busghg/gapfill.hpp"
#include "busghg/ingest.hpp"
#include "busghg/pairing.hpp"
#include "busghg/sinuosity.hpp"
#include "busghg/time.hpp"

namespace busghg::io {

namespace fs = std::filesystem;

/// Writes through a temporary sibling and renames, so readers never see a
/// half-written file.
inline void write_file_atomic(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw DataError("cannot write " + tmp.string());
        }
        body(out);
        out.flush();
        if (!out) {
            throw DataError("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        throw DataError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

// ---------------------------------------------------------------- segments

inline const std::vector<std::string> kSegmentHeader{
    "vehicle", "line",      "t_start",   "t_end", "start_lat", "start_lon", "end_lat",
    "end_lon", "start_row", "end_row",   "dt_s",  "euclid_m",  "speed_kmh"};

inline const std::vector<std::string> kEmissionExtra{"corrected_m", "corrected_speed_kmh", "fuel_l", "co2e_kg"};

inline std::vector<std::string> emission_header() {
    auto h = kSegmentHeader;
    h.insert(h.end(), kEmissionExtra.begin(), kEmissionExtra.end());
    return h;
}

inline void put_segment(csv::Writer& w, const TravelSegment& s, UtcOffset off) {
    w.field(s.vehicle_id)
        .field(s.line_id)
        .field(format_timestamp(s.start.time, off))
        .field(format_timestamp(s.end.time, off))
        .field(s.start.position.lat)
        .field(s.start.position.lon)
        .field(s.end.position.lat)
        .field(s.end.position.lon)
        .field(s.start.source_row)
        .field(s.end.source_row)
        .field(s.dt_s)
        .field(s.euclid_m)
        .field(segment_speed(s, s.euclid_m));
}

inline void write_segments(std::ostream& os, std::span<const TravelSegment> segments, UtcOffset off) {
    csv::Writer w(os);
    for (const auto& h : kSegmentHeader) {
        w.field(h);
    }
    w.end_row();
    for (const auto& s : segments) {
        put_segment(w, s, off);
        w.end_row();
    }
}

inline TravelSegment get_segment(const csv::Row& row, UtcOffset off) {
    auto when = [&](std::size_t col) {
        const auto ts = parse_timestamp(row.fields[col]);
        if (!ts) {
            throw DataError(row.where() + ": invalid timestamp '" + row.fields[col] + "'");
        }
        return *ts;
    };
    const SegmentEnd start{GeoPoint{row.number(4), row.number(5)}, when(2), row.integer(8)};
    const SegmentEnd end{GeoPoint{row.number(6), row.number(7)}, when(3), row.integer(9)};
    auto seg = make_segment(row.fields[0], row.fields[1], start, end, off);
    if (!(seg.dt_s > 0.0)) {
        throw DataError(row.where() + ": segment with non-positive duration");
    }
    return seg;
}

inline std::vector<TravelSegment> read_segments(const std::string& path, UtcOffset off) {
    std::vector<TravelSegment> out;
    csv::for_each_file_row(path, kSegmentHeader, [&](const csv::Row& row) { out.push_back(get_segment(row, off)); });
    return out;
}

inline void write_emissions(std::ostream& os, std::span<const TravelSegment> segments,
                            std::span<const SegmentEmission> emissions, UtcOffset off) {
    csv::Writer w(os);
    for (const auto& h : emission_header()) {
        w.field(h);
    }
    w.end_row();
    for (std::size_t i = 0; i < segments.size(); ++i) {
        put_segment(w, segments[i], off);
        const auto& e = emissions[i];
        w.field(e.corrected_m).field(e.speed_kmh).field(e.fuel_l).field(e.co2e_kg);
        w.end_row();
    }
}

inline EmissionDataset read_emissions(const std::string& path, UtcOffset off) {
    EmissionDataset d;
    const std::size_t base = kSegmentHeader.size();
    csv::for_each_file_row(path, emission_header(), [&](const csv::Row& row) {
        d.segments.push_back(get_segment(row, off));
        d.emissions.push_back(
            SegmentEmission{row.number(base), row.number(base + 1), row.number(base + 2), row.number(base + 3)});
    });
    return d;
}

// ---------------------------------------------------------------- sinuosity report

/// Summary lines are '#'-prefixed key,value pairs ahead of the histogram table.
inline void write_sinuosity_report(std::ostream& os, const SinuosityEstimate& est, std::uint64_t seed,
                                   std::size_t population) {
    os << "# mean_s," << csv::format_double(est.mean_s) << '\n';
    os << "# sample_size," << est.sample_size << '\n';
    os << "# population," << population << '\n';
    os << "# fraction_sampled," << csv::format_double(est.fraction_sampled) << '\n';
    os << "# seed," << seed << '\n';
    for (std::size_t i = 0; i < est.dispositions.size(); ++i) {
        os << "# " << kDispositionNames[i] << ',' << est.dispositions[i] << '\n';
    }
    os << "# clamped," << est.clamped << '\n';
    os << "# below_tolerance," << est.below_tolerance << '\n';
    csv::Writer w(os);
    w.row("bin_low", "bin_high", "count");
    for (const auto& b : est.histogram) {
        w.row(b.low, b.high, b.count);
    }
}

/// Summary key -> value from a sinuosity report.
inline std::map<std::string, std::string> read_sinuosity_summary(const std::string& path) {
    const auto t = csv::read_table_file(path, {"bin_low", "bin_high", "count"});
    std::map<std::string, std::string> out;
    for (const auto& c : t.comments) {
        const auto comma = c.find(',');
        if (comma != std::string::npos) {
            out[std::string(csv::trim(c.substr(0, comma)))] = std::string(csv::trim(c.substr(comma + 1)));
        }
    }
    return out;
}

inline double read_mean_s(const std::string& path) {
    const auto summary = read_sinuosity_summary(path);
    const auto it = summary.find("mean_s");
    const auto v = it == summary.end() ? std::nullopt : csv::parse_double(it->second);
    if (!v) {
        throw DataError("schema mismatch in " + path + ": no mean_s summary line");
    }
    return *v;
}

// ---------------------------------------------------------------- daily and gap filling

inline const std::vector<std::string> kDailyHeader{"date", "weekday", "segments", "co2e_kg", "fuel_l", "dist_km"};

inline void write_daily(std::ostream& os, std::span<const DailyCount> days) {
    csv::Writer w(os);
    w.row("date", "weekday", "segments", "co2e_kg", "fuel_l", "dist_km");
    for (const auto& d : days) {
        w.row(format_date(d.date), kWeekdayNames[d.weekday], d.segment_count, d.co2e_kg, d.fuel_l, d.dist_km);
    }
}

inline std::vector<DailyCount> read_daily(const std::string& path) {
    const auto t = csv::read_table_file(path, kDailyHeader);
    std::vector<DailyCount> out;
    out.reserve(t.rows.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        DailyCount d;
        d.date = require_date(t.rows[r][0], path + ":" + std::to_string(t.line_numbers[r]));
        d.weekday = weekday_index(d.date);
        d.segment_count = csv::require_int(t, r, 2, path);
        d.co2e_kg = csv::require_double(t, r, 3, path);
        d.fuel_l = csv::require_double(t, r, 4, path);
        d.dist_km = csv::require_double(t, r, 5, path);
        if (d.segment_count < 0) {
            throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": negative segment count");
        }
        out.push_back(d);
    }
    return out;
}

inline void write_expected_ranges(std::ostream& os, const std::map<unsigned, ExpectedRange>& ranges) {
    csv::Writer w(os);
    w.row("weekday", "low", "high", "observations", "insufficient");
    for (const auto& [wd, r] : ranges) {
        w.row(kWeekdayNames[wd], r.low, r.high, r.observations, r.insufficient ? 1 : 0);
    }
}

inline void write_filled_days(std::ostream& os, std::span<const FilledDay> filled) {
    csv::Writer w(os);
    w.row("date", "weekday", "segments", "method", "scale_low", "scale_high", "co2e_raw_kg", "co2e_low_kg",
          "co2e_high_kg", "fuel_raw_l", "fuel_low_l", "fuel_high_l", "km_raw", "km_low", "km_high");
    for (const auto& f : filled) {
        w.row(format_date(f.date()), kWeekdayNames[f.observed.weekday], f.observed.segment_count,
              fill_method_name(f.method), f.scale_low, f.scale_high, f.co2e_kg.raw, f.co2e_kg.low, f.co2e_kg.high,
              f.fuel_l.raw, f.fuel_l.low, f.fuel_l.high, f.dist_km.raw, f.dist_km.low, f.dist_km.high);
    }
}

inline const std::vector<std::string> kMonthlyHeader{"month",     "km_raw",     "km_low",    "km_high",
                                                     "fuel_raw_m3", "fuel_low", "fuel_high", "co2e_raw_t",
                                                     "co2e_low",  "co2e_high"};

inline void write_monthly_totals(std::ostream& os, std::span<const MonthlyTotals> months) {
    csv::Writer w(os);
    for (const auto& h : kMonthlyHeader) {
        w.field(h);
    }
    w.end_row();
    for (const auto& m : months) {
        w.row(format_year_month(m.month), m.km.raw, m.km.low, m.km.high, m.fuel_m3.raw, m.fuel_m3.low,
              m.fuel_m3.high, m.co2e_t.raw, m.co2e_t.low, m.co2e_t.high);
    }
}

inline std::vector<MonthlyTotals> read_monthly_totals(const std::string& path) {
    const auto t = csv::read_table_file(path, kMonthlyHeader);
    std::vector<MonthlyTotals> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto ym = parse_year_month(t.rows[r][0]);
        if (!ym) {
            throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": invalid month '" + t.rows[r][0] +
                            "'");
        }
        auto band = [&](std::size_t c) {
            return BandValue{csv::require_double(t, r, c, path), csv::require_double(t, r, c + 1, path),
                             csv::require_double(t, r, c + 2, path)};
        };
        out.push_back(MonthlyTotals{*ym, band(1), band(4), band(7)});
    }
    return out;
}

// ---------------------------------------------------------------- analytics products

inline nlohmann::json lattice_geojson(const LatticeGrid& grid) {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.cells.size(); ++i) {
        const auto& c = grid.cells[i];
        const auto corners = grid.spec.cell_corners(i);
        nlohmann::json ring = nlohmann::json::array();
        for (const auto& p : corners) {
            ring.push_back({p.lon, p.lat});
        }
        ring.push_back({corners[0].lon, corners[0].lat});
        features.push_back({
            {"type", "Feature"},
            {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}},
            {"properties",
             {{"row", i / grid.spec.cols},
              {"col", i % grid.spec.cols},
              {"co2e_kg", c.co2e_kg},
              {"normalized", grid.normalized(i)},
              {"segment_count", c.segments}}},
        });
    }
    return {
        {"type", "FeatureCollection"},
        {"properties",
         {{"cell_size_m", grid.spec.cell_size_m},
          {"rows", grid.spec.rows},
          {"cols", grid.spec.cols},
          {"max_co2e_kg", grid.max_co2e_kg},
          {"overflow_co2e_kg", grid.overflow.co2e_kg},
          {"overflow_segment_count", grid.overflow.segments}}},
        {"features", features},
    };
}

inline void write_temporal(std::ostream& os, const TemporalProfile& p) {
    csv::Writer w(os);
    w.row("kind", "key", "days", "segments", "co2e_kg", "fuel_l", "dist_km", "mean_co2e_kg", "mean_fuel_l",
          "mean_dist_km");
    auto put = [&](std::string_view kind, std::string_view key, const ProfileEntry& e) {
        w.row(kind, key, e.days, e.total.segments, e.total.co2e_kg, e.total.fuel_l, e.total.dist_km,
              e.mean_co2e_kg(), e.mean_fuel_l(), e.mean_dist_km());
    };
    for (std::size_t i = 0; i < p.weekday.size(); ++i) {
        put("weekday", kWeekdayNames[i], p.weekday[i]);
    }
    for (std::size_t h = 0; h < p.hour.size(); ++h) {
        put("hour", std::to_string(h), p.hour[h]);
    }
}

inline void write_lines(std::ostream& os, std::span<const LineShare> lines) {
    csv::Writer w(os);
    w.row("rank", "line", "segments", "co2e_kg", "fuel_l", "dist_km", "share", "cumulative_share");
    std::size_t rank = 0;
    for (const auto& l : lines) {
        w.row(++rank, l.line_id, l.totals.segments, l.totals.co2e_kg, l.totals.fuel_l, l.totals.dist_km, l.share,
              l.cumulative_share);
    }
}

inline void write_freeflow(std::ostream& os, std::span<const FreeFlowResult> rows) {
    csv::Writer w(os);
    w.row("line", "dawn_speed_kmh", "peak_speed_kmh", "dawn_kg_per_km", "peak_kg_per_km", "impact", "dawn_segments",
          "peak_segments", "status", "tag");
    for (const auto& r : rows) {
        w.field(r.line_id).field(r.dawn_speed_kmh).field(r.peak_speed_kmh).field(r.dawn_rate).field(r.peak_rate);
        if (r.status == FreeFlowStatus::ok) {
            w.field(r.impact);
        } else {
            w.field("");
        }
        w.field(r.dawn_sample).field(r.peak_sample).field(freeflow_status_name(r.status)).field(freeflow_tag_name(r.tag));
        w.end_row();
    }
}

inline void write_validation(std::ostream& os, std::span<const ComparisonRow> rows) {
    csv::Writer w(os);
    w.row("month", "metric", "raw", "low", "high", "reference", "inside", "gap", "status");
    for (const auto& r : rows) {
        w.field(format_year_month(r.month)).field(metric_name(r.metric));
        if (r.status == CompareStatus::missing_estimate) {
            w.field("").field("").field("");
        } else {
            w.field(r.band.raw).field(r.band.low).field(r.band.high);
        }
        if (r.reference) {
            w.field(*r.reference);
        } else {
            w.field("");
        }
        w.field(r.inside ? 1 : 0);
        if (r.status == CompareStatus::compared) {
            w.field(r.gap);
        } else {
            w.field("");
        }
        w.field(compare_status_name(r.status));
        w.end_row();
    }
}

// ---------------------------------------------------------------- debug

/// One CSV per (vehicle, day) under `dir`, named <vehicle>_<YYYY-MM-DD>.csv.
inline void dump_partitions(const fs::path& dir, const Partitions& parts, UtcOffset off) {
    fs::create_directories(dir);
    for (const auto& [key, records] : parts) {
        std::string name;
        for (const char c : key.vehicle_id) {
            const bool safe = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
            name += safe ? c : '_';
        }
        std::ofstream out(dir / (name + "_" + format_date(key.day) + ".csv"));
        if (!out) {
            throw DataError("cannot write partition dump under " + dir.string());
        }
        csv::Writer w(out);
        w.row("source_row", "vehicle", "line", "timestamp", "lat", "lon");
        for (const auto& r : records) {
            w.row(r.source_row, r.vehicle_id, r.line_id, format_timestamp(r.timestamp, off), r.position.lat,
                  r.position.lon);
        }
    }
}

}  // namespace busghg::io
