#pragma once

// GPS record ingestion: line parsing, bounds cleaning, and partitioning by
// (vehicle, local calendar day).

#include <algorithm>
#include <cstdint>
#include <istream>
#include <iterator>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "busghg/csv.hpp"
#include "busghg/error.hpp"
#include "busghg/geo.hpp"
#include "busghg/parallel.hpp"
#include "busghg/time.hpp"

namespace busghg {

enum class Field { vehicle, line, timestamp, latitude, longitude, speed, ignore };

inline std::string_view field_name(Field f) {
    switch (f) {
        case Field::vehicle: return "vehicle";
        case Field::line: return "line";
        case Field::timestamp: return "timestamp";
        case Field::latitude: return "lat";
        case Field::longitude: return "lon";
        case Field::speed: return "speed";
        case Field::ignore: return "_";
    }
    return "?";
}

/// Column layout of a GPS file.
struct Schema {
    char delimiter = ',';
    bool has_header = true;
    std::vector<Field> columns{Field::vehicle, Field::line, Field::latitude,
                               Field::longitude, Field::timestamp, Field::speed};

    /// Parses a comma-separated role list such as "vehicle,line,lat,lon,timestamp,speed".
    /// "_" skips a column. vehicle, line, timestamp, lat and lon are required.
    static std::vector<Field> parse_columns(std::string_view spec) {
        std::vector<Field> cols;
        for (const auto& raw : csv::split(spec, ',')) {
            const auto name = csv::trim(raw);
            if (name == "vehicle" || name == "vehicle_id") {
                cols.push_back(Field::vehicle);
            } else if (name == "line" || name == "line_id") {
                cols.push_back(Field::line);
            } else if (name == "timestamp" || name == "time") {
                cols.push_back(Field::timestamp);
            } else if (name == "lat" || name == "latitude") {
                cols.push_back(Field::latitude);
            } else if (name == "lon" || name == "longitude") {
                cols.push_back(Field::longitude);
            } else if (name == "speed" || name == "reported_speed") {
                cols.push_back(Field::speed);
            } else if (name == "_" || name == "skip") {
                cols.push_back(Field::ignore);
            } else {
                throw ConfigError("gps.columns: unknown column role '" + std::string(name) + "'");
            }
        }
        for (const auto required : {Field::vehicle, Field::line, Field::timestamp, Field::latitude, Field::longitude}) {
            if (std::count(cols.begin(), cols.end(), required) != 1) {
                throw ConfigError("gps.columns: '" + std::string(field_name(required)) + "' must appear exactly once");
            }
        }
        if (std::count(cols.begin(), cols.end(), Field::speed) > 1) {
            throw ConfigError("gps.columns: 'speed' may appear at most once");
        }
        return cols;
    }
};

struct RawRecord {
    std::string vehicle_id;
    std::string line_id;
    Timestamp timestamp;
    GeoPoint position;
    std::optional<double> reported_speed;  ///< km/h, parsed but never used downstream
    std::int64_t source_row = 0;           ///< 1-based physical line number
};

struct ParseDiagnostic {
    std::int64_t row = 0;
    std::string column;  ///< empty for whole-line problems
    std::string message;
};

using ParseResult = std::variant<RawRecord, ParseDiagnostic>;

struct CleanRecord {
    std::string vehicle_id;
    std::string line_id;
    Timestamp timestamp;
    GeoPoint position;
    std::int64_t source_row = 0;

    friend bool operator==(const CleanRecord&, const CleanRecord&) = default;
};

struct IngestStats {
    std::int64_t rows_read = 0;
    std::int64_t rows_parsed = 0;
    std::int64_t rows_rejected_parse = 0;
    std::int64_t rows_rejected_bounds = 0;

    std::int64_t clean() const { return rows_parsed - rows_rejected_bounds; }

    friend bool operator==(const IngestStats&, const IngestStats&) = default;
};

/// Parses one data line. Never throws for malformed content.
inline ParseResult parse_line(std::string_view line, std::int64_t row, const Schema& schema) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    if (csv::trim(line).empty()) {
        return ParseDiagnostic{row, "", "empty line"};
    }
    thread_local std::vector<std::string> fields;
    csv::split(line, schema.delimiter, fields);
    if (fields.size() != schema.columns.size()) {
        return ParseDiagnostic{row, "", "expected " + std::to_string(schema.columns.size()) + " fields, got " +
                                            std::to_string(fields.size())};
    }
    RawRecord rec;
    rec.source_row = row;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto value = csv::trim(fields[i]);
        const Field f = schema.columns[i];
        auto bad = [&](const std::string& why) {
            return ParseDiagnostic{row, std::string(field_name(f)), why + ": '" + std::string(value) + "'"};
        };
        switch (f) {
            case Field::vehicle:
                if (value.empty()) {
                    return bad("empty vehicle id");
                }
                rec.vehicle_id = std::string(value);
                break;
            case Field::line:
                if (value.empty()) {
                    return bad("empty line id");
                }
                rec.line_id = std::string(value);
                break;
            case Field::timestamp: {
                const auto t = parse_timestamp(value);
                if (!t) {
                    return bad("timestamp is not ISO-8601 with UTC offset");
                }
                rec.timestamp = *t;
                break;
            }
            case Field::latitude: {
                const auto v = csv::parse_double(value);
                if (!v || *v < -90.0 || *v > 90.0) {
                    return bad("latitude is not a number in [-90, 90]");
                }
                rec.position.lat = *v;
                break;
            }
            case Field::longitude: {
                const auto v = csv::parse_double(value);
                if (!v || *v < -180.0 || *v > 180.0) {
                    return bad("longitude is not a number in [-180, 180]");
                }
                rec.position.lon = *v;
                break;
            }
            case Field::speed: {
                if (value.empty() || value == "NA" || value == "null" || value == "NULL") {
                    break;
                }
                const auto v = csv::parse_double(value);
                if (!v) {
                    return bad("speed is not a number");
                }
                rec.reported_speed = *v;
                break;
            }
            case Field::ignore:
                break;
        }
    }
    return rec;
}

/// Parses every data line of `in`, one result per line, in input order.
/// A header line (when schema.has_header) is skipped and not counted.
/// Throws DataError if the stream itself cannot be read.
inline std::vector<ParseResult> parse_records(std::istream& in, const Schema& schema, unsigned workers = 1) {
    if (!in) {
        throw DataError("GPS input stream is not readable");
    }
    std::string buffer{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    if (in.bad()) {
        throw DataError("I/O error while reading GPS input");
    }
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < buffer.size()) {
        auto nl = buffer.find('\n', start);
        if (nl == std::string::npos) {
            nl = buffer.size();
        }
        lines.emplace_back(buffer.data() + start, nl - start);
        start = nl + 1;
    }
    const std::size_t first = schema.has_header && !lines.empty() ? 1 : 0;
    const std::size_t n = lines.size() - first;
    std::vector<ParseResult> out(n);
    parallel_for(n, workers, [&](std::size_t i) {
        out[i] = parse_line(lines[first + i], static_cast<std::int64_t>(first + i + 1), schema);
    });
    return out;
}

struct CleanResult {
    std::vector<CleanRecord> records;
    IngestStats stats;
    std::vector<ParseDiagnostic> diagnostics;
};

/// Keeps parsed records inside `bounds`, drops reported speed, and tallies
/// the row accounting.
inline CleanResult clean_records(std::span<const ParseResult> parsed, const BoundingBox& bounds) {
    bounds.validate();
    CleanResult result;
    result.stats.rows_read = static_cast<std::int64_t>(parsed.size());
    for (const auto& item : parsed) {
        if (const auto* diag = std::get_if<ParseDiagnostic>(&item)) {
            ++result.stats.rows_rejected_parse;
            result.diagnostics.push_back(*diag);
            continue;
        }
        const auto& rec = std::get<RawRecord>(item);
        ++result.stats.rows_parsed;
        if (!bounds.contains(rec.position)) {
            ++result.stats.rows_rejected_bounds;
            continue;
        }
        result.records.push_back(CleanRecord{rec.vehicle_id, rec.line_id, rec.timestamp, rec.position, rec.source_row});
    }
    return result;
}

/// Re-cleaning already clean records; used to check idempotence.
inline CleanResult clean_records(std::span<const CleanRecord> records, const BoundingBox& bounds) {
    bounds.validate();
    CleanResult result;
    result.stats.rows_read = static_cast<std::int64_t>(records.size());
    result.stats.rows_parsed = result.stats.rows_read;
    for (const auto& rec : records) {
        if (!bounds.contains(rec.position)) {
            ++result.stats.rows_rejected_bounds;
            continue;
        }
        result.records.push_back(rec);
    }
    return result;
}

struct PartitionKey {
    std::string vehicle_id;
    Date day;

    friend auto operator<=>(const PartitionKey&, const PartitionKey&) = default;
    friend bool operator==(const PartitionKey&, const PartitionKey&) = default;
};

using Partitions = std::map<PartitionKey, std::vector<CleanRecord>>;

inline bool record_time_less(const CleanRecord& a, const CleanRecord& b) {
    return a.timestamp != b.timestamp ? a.timestamp < b.timestamp : a.source_row < b.source_row;
}

/// Groups records by (vehicle, local day at `local`) and sorts each group by
/// (timestamp, source_row).
inline Partitions partition_by_vehicle_day(std::span<const CleanRecord> records, UtcOffset local) {
    Partitions parts;
    for (const auto& rec : records) {
        parts[PartitionKey{rec.vehicle_id, local_day(rec.timestamp, local)}].push_back(rec);
    }
    for (auto& [key, list] : parts) {
        std::sort(list.begin(), list.end(), record_time_less);
    }
    return parts;
}

}  // namespace busghg
