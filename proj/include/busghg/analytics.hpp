#pragma once

// Policy products built from per-segment emissions: a square-lattice map,
// weekday and hour profiles, the per-line distribution, the dawn-versus-peak
// free-flow comparison, and the monthly comparison with top-down totals.
// All aggregations are single sequential passes over the segment list, so
// results never depend on how emissions were computed in parallel.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "busghg/emissions.hpp"
#include "busghg/error.hpp"
#include "busghg/gapfill.hpp"
#include "busghg/geo.hpp"
#include "busghg/pairing.hpp"

namespace busghg {

struct Totals {
    double co2e_kg = 0.0;
    double fuel_l = 0.0;
    double dist_km = 0.0;
    double hours = 0.0;  ///< summed segment durations
    std::int64_t segments = 0;

    void add(const TravelSegment& s, const SegmentEmission& e) {
        co2e_kg += e.co2e_kg;
        fuel_l += e.fuel_l;
        dist_km += e.corrected_m / 1000.0;
        hours += s.dt_s / 3600.0;
        ++segments;
    }
};

inline Totals grand_total(std::span<const TravelSegment> segments, std::span<const SegmentEmission> emissions) {
    Totals t;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        t.add(segments[i], emissions[i]);
    }
    return t;
}

// ---------------------------------------------------------------- lattice

struct LatticeSpec {
    GeoPoint origin;  ///< south-west corner
    double cell_size_m = 500.0;
    std::size_t rows = 0;
    std::size_t cols = 0;

    /// Cells are lat/lon rectangles; the east-west size is exact at the
    /// reference latitude (the lattice's mid-latitude).
    double ref_lat() const { return origin.lat + cell_dlat() * static_cast<double>(rows) / 2.0; }
    double cell_dlat() const { return cell_size_m / kMetersPerDegree; }
    double cell_dlon() const {
        const double mid = origin.lat + cell_dlat() * static_cast<double>(rows) / 2.0;
        return cell_size_m / (kMetersPerDegree * std::cos(deg2rad(mid)));
    }

    /// Smallest lattice with the given cell size that covers `box`.
    static LatticeSpec covering(const BoundingBox& box, double cell_size_m) {
        box.validate();
        if (!(cell_size_m > 0.0)) {
            throw ConfigError("lattice.cell_size_m must be > 0");
        }
        LatticeSpec spec;
        spec.origin = GeoPoint{box.min_lat, box.min_lon};
        spec.cell_size_m = cell_size_m;
        spec.rows = static_cast<std::size_t>(std::ceil((box.max_lat - box.min_lat) / spec.cell_dlat()));
        spec.rows = std::max<std::size_t>(spec.rows, 1);
        spec.cols = static_cast<std::size_t>(std::ceil((box.max_lon - box.min_lon) / spec.cell_dlon()));
        spec.cols = std::max<std::size_t>(spec.cols, 1);
        return spec;
    }

    /// Row-major cell index, or nullopt outside the lattice.
    std::optional<std::size_t> cell_of(const GeoPoint& p) const {
        const double r = std::floor((p.lat - origin.lat) / cell_dlat());
        const double c = std::floor((p.lon - origin.lon) / cell_dlon());
        if (r < 0.0 || c < 0.0 || r >= static_cast<double>(rows) || c >= static_cast<double>(cols)) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(c);
    }

    /// Corner points of a cell (SW, SE, NE, NW).
    std::array<GeoPoint, 4> cell_corners(std::size_t index) const {
        const double r = static_cast<double>(index / cols);
        const double c = static_cast<double>(index % cols);
        const double lat0 = origin.lat + r * cell_dlat();
        const double lon0 = origin.lon + c * cell_dlon();
        const double lat1 = lat0 + cell_dlat();
        const double lon1 = lon0 + cell_dlon();
        return {GeoPoint{lat0, lon0}, GeoPoint{lat0, lon1}, GeoPoint{lat1, lon1}, GeoPoint{lat1, lon0}};
    }
};

/// Which segments an aggregation includes.
struct DayFilter {
    std::set<unsigned> weekdays;          ///< empty = all
    std::optional<std::set<Date>> days;   ///< restrict to these days (e.g. best-recorded ones)

    bool accepts(const TravelSegment& s) const {
        if (!weekdays.empty() && !weekdays.contains(s.weekday)) {
            return false;
        }
        return !days || days->contains(s.day);
    }
    bool accepts(Date d) const {
        if (!weekdays.empty() && !weekdays.contains(weekday_index(d))) {
            return false;
        }
        return !days || days->contains(d);
    }
};

struct LatticeGrid {
    LatticeSpec spec;
    std::vector<Totals> cells;  ///< row-major
    Totals overflow;            ///< segments starting outside the lattice
    double max_co2e_kg = 0.0;

    /// co2e / max(co2e); 0 everywhere when the grid is empty.
    double normalized(std::size_t index) const {
        return max_co2e_kg > 0.0 ? cells[index].co2e_kg / max_co2e_kg : 0.0;
    }
};

/// Bins each accepted segment's emission into the cell holding its start point.
inline LatticeGrid aggregate_lattice(std::span<const TravelSegment> segments,
                                     std::span<const SegmentEmission> emissions, const LatticeSpec& spec,
                                     const DayFilter& filter = {}) {
    LatticeGrid grid;
    grid.spec = spec;
    grid.cells.resize(spec.rows * spec.cols);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (!filter.accepts(segments[i])) {
            continue;
        }
        const auto cell = spec.cell_of(segments[i].start.position);
        (cell ? grid.cells[*cell] : grid.overflow).add(segments[i], emissions[i]);
    }
    for (const auto& c : grid.cells) {
        grid.max_co2e_kg = std::max(grid.max_co2e_kg, c.co2e_kg);
    }
    return grid;
}

// ---------------------------------------------------------------- temporal

struct ProfileEntry {
    Totals total;
    std::size_t days = 0;  ///< included days that this key averages over
    double mean_co2e_kg() const { return days > 0 ? total.co2e_kg / static_cast<double>(days) : 0.0; }
    double mean_fuel_l() const { return days > 0 ? total.fuel_l / static_cast<double>(days) : 0.0; }
    double mean_dist_km() const { return days > 0 ? total.dist_km / static_cast<double>(days) : 0.0; }
};

struct TemporalProfile {
    std::array<ProfileEntry, 7> weekday{};
    std::array<ProfileEntry, 24> hour{};
};

/// Average emissions per weekday (over that weekday's included days) and per
/// start hour (over all included days). `calendar` lists the days to average
/// over; when empty, the days present in the data are used.
inline TemporalProfile temporal_profile(std::span<const TravelSegment> segments,
                                        std::span<const SegmentEmission> emissions, const DayFilter& filter = {},
                                        std::span<const Date> calendar = {}) {
    TemporalProfile p;
    std::set<Date> days;
    if (calendar.empty()) {
        for (const auto& s : segments) {
            if (filter.accepts(s)) {
                days.insert(s.day);
            }
        }
    } else {
        for (const auto d : calendar) {
            if (filter.accepts(d)) {
                days.insert(d);
            }
        }
    }
    for (const auto d : days) {
        ++p.weekday[weekday_index(d)].days;
    }
    for (auto& h : p.hour) {
        h.days = days.size();
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (!filter.accepts(s) || !days.contains(s.day)) {
            continue;
        }
        p.weekday[s.weekday].total.add(s, emissions[i]);
        p.hour[static_cast<std::size_t>(s.start_hour)].total.add(s, emissions[i]);
    }
    return p;
}

// ---------------------------------------------------------------- lines

struct LineShare {
    std::string line_id;
    Totals totals;
    double share = 0.0;
    double cumulative_share = 0.0;
};

/// Lines ranked by descending CO2e (ties by line id) with cumulative share.
inline std::vector<LineShare> line_distribution(std::span<const TravelSegment> segments,
                                                std::span<const SegmentEmission> emissions) {
    std::map<std::string, Totals> by_line;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        by_line[segments[i].line_id].add(segments[i], emissions[i]);
    }
    std::vector<LineShare> out;
    out.reserve(by_line.size());
    double total = 0.0;
    for (auto& [line, t] : by_line) {
        out.push_back(LineShare{line, t, 0.0, 0.0});
        total += t.co2e_kg;
    }
    std::stable_sort(out.begin(), out.end(), [](const LineShare& a, const LineShare& b) {
        return a.totals.co2e_kg > b.totals.co2e_kg;
    });
    double running = 0.0;
    for (auto& l : out) {
        running += l.totals.co2e_kg;
        l.share = total > 0.0 ? l.totals.co2e_kg / total : 0.0;
        l.cumulative_share = total > 0.0 ? running / total : 0.0;
    }
    return out;
}

/// Share of total CO2e held by the top `fraction` of lines (at least one line).
inline double top_share(std::span<const LineShare> ranked, double fraction) {
    if (ranked.empty()) {
        return 0.0;
    }
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(ranked.size()) + 1e-9)));
    return ranked[std::min(k, ranked.size()) - 1].cumulative_share;
}

// ---------------------------------------------------------------- free flow

struct HourWindow {
    int begin = 0;  ///< inclusive
    int end = 0;    ///< exclusive

    bool contains(int hour) const { return hour >= begin && hour < end; }
};

struct FreeFlowConfig {
    HourWindow dawn{0, 3};
    HourWindow peak{8, 12};
    std::int64_t min_samples = 30;
    double tail_fraction = 0.10;

    void validate() const {
        for (const auto& w : {dawn, peak}) {
            if (w.begin < 0 || w.end > 24 || w.begin >= w.end) {
                throw ConfigError("freeflow: hour windows must satisfy 0 <= begin < end <= 24");
            }
        }
        if (dawn.begin < peak.end && peak.begin < dawn.end) {
            throw ConfigError("freeflow: dawn and peak windows must be disjoint");
        }
        if (min_samples < 1 || !(tail_fraction > 0.0) || tail_fraction > 0.5) {
            throw ConfigError("freeflow: min_samples >= 1 and tail_fraction in (0, 0.5] required");
        }
    }
};

enum class FreeFlowStatus : std::uint8_t { ok, insufficient_dawn, insufficient_peak, zero_dawn_rate };
enum class FreeFlowTag : std::uint8_t { none, most_impacted, least_impacted };

inline std::string_view freeflow_status_name(FreeFlowStatus s) {
    switch (s) {
        case FreeFlowStatus::ok: return "ok";
        case FreeFlowStatus::insufficient_dawn: return "insufficient_dawn";
        case FreeFlowStatus::insufficient_peak: return "insufficient_peak";
        case FreeFlowStatus::zero_dawn_rate: return "zero_dawn_rate";
    }
    return "?";
}

inline std::string_view freeflow_tag_name(FreeFlowTag t) {
    switch (t) {
        case FreeFlowTag::none: return "";
        case FreeFlowTag::most_impacted: return "most_impacted";
        case FreeFlowTag::least_impacted: return "least_impacted";
    }
    return "?";
}

struct FreeFlowResult {
    std::string line_id;
    double dawn_speed_kmh = 0.0;
    double peak_speed_kmh = 0.0;
    double dawn_rate = 0.0;  ///< kg CO2e per km
    double peak_rate = 0.0;
    double impact = 0.0;     ///< peak_rate / dawn_rate
    std::int64_t dawn_sample = 0;
    std::int64_t peak_sample = 0;
    FreeFlowStatus status = FreeFlowStatus::ok;
    FreeFlowTag tag = FreeFlowTag::none;
};

/// Per line: distance-weighted mean speed and CO2e per km in the dawn and
/// peak windows, and their ratio. Lines short of min_samples in either window
/// are kept with a status but no impact. Among ok lines, the top and bottom
/// tail_fraction by impact (at least one each, ties by line id) are tagged.
/// Results are ordered by line id.
inline std::vector<FreeFlowResult> freeflow_analysis(std::span<const TravelSegment> segments,
                                                     std::span<const SegmentEmission> emissions,
                                                     const FreeFlowConfig& cfg = {}) {
    cfg.validate();
    struct Acc {
        Totals dawn, peak;
    };
    std::map<std::string, Acc> by_line;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (cfg.dawn.contains(s.start_hour)) {
            by_line[s.line_id].dawn.add(s, emissions[i]);
        } else if (cfg.peak.contains(s.start_hour)) {
            by_line[s.line_id].peak.add(s, emissions[i]);
        }
    }
    std::vector<FreeFlowResult> out;
    for (const auto& [line, acc] : by_line) {
        FreeFlowResult r;
        r.line_id = line;
        r.dawn_sample = acc.dawn.segments;
        r.peak_sample = acc.peak.segments;
        r.dawn_speed_kmh = acc.dawn.hours > 0.0 ? acc.dawn.dist_km / acc.dawn.hours : 0.0;
        r.peak_speed_kmh = acc.peak.hours > 0.0 ? acc.peak.dist_km / acc.peak.hours : 0.0;
        r.dawn_rate = acc.dawn.dist_km > 0.0 ? acc.dawn.co2e_kg / acc.dawn.dist_km : 0.0;
        r.peak_rate = acc.peak.dist_km > 0.0 ? acc.peak.co2e_kg / acc.peak.dist_km : 0.0;
        if (r.dawn_sample < cfg.min_samples) {
            r.status = FreeFlowStatus::insufficient_dawn;
        } else if (r.peak_sample < cfg.min_samples) {
            r.status = FreeFlowStatus::insufficient_peak;
        } else if (!(r.dawn_rate > 0.0) || !(r.peak_rate > 0.0)) {
            r.status = FreeFlowStatus::zero_dawn_rate;
        } else {
            r.impact = r.peak_rate / r.dawn_rate;
        }
        out.push_back(std::move(r));
    }
    std::vector<FreeFlowResult*> ranked;
    for (auto& r : out) {
        if (r.status == FreeFlowStatus::ok) {
            ranked.push_back(&r);
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const FreeFlowResult* a, const FreeFlowResult* b) { return a->impact > b->impact; });
    const std::size_t n = ranked.size();
    std::size_t k = static_cast<std::size_t>(std::floor(cfg.tail_fraction * static_cast<double>(n) + 1e-9));
    k = std::min(std::max<std::size_t>(k, 1), n / 2);
    for (std::size_t i = 0; i < k; ++i) {
        ranked[i]->tag = FreeFlowTag::most_impacted;
        ranked[n - 1 - i]->tag = FreeFlowTag::least_impacted;
    }
    return out;
}

// ---------------------------------------------------------------- top-down comparison

struct ReferenceMonth {
    YearMonth month;
    double km = 0.0;
    double diesel_m3 = 0.0;
    double co2e_t = 0.0;
};

inline std::vector<ReferenceMonth> load_reference_csv(const std::string& path) {
    const auto t = csv::read_table_file(path, {"month", "km", "diesel_m3", "co2e_t"});
    std::vector<ReferenceMonth> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto ym = parse_year_month(t.rows[r][0]);
        if (!ym) {
            throw DataError(path + ":" + std::to_string(t.line_numbers[r]) + ": invalid month '" + t.rows[r][0] +
                            "' (expected YYYY-MM)");
        }
        out.push_back(ReferenceMonth{*ym, csv::require_double(t, r, 1, path), csv::require_double(t, r, 2, path),
                                     csv::require_double(t, r, 3, path)});
    }
    return out;
}

enum class Metric : std::uint8_t { km, diesel_m3, co2e_t };

inline std::string_view metric_name(Metric m) {
    switch (m) {
        case Metric::km: return "km";
        case Metric::diesel_m3: return "diesel_m3";
        case Metric::co2e_t: return "co2e_t";
    }
    return "?";
}

enum class CompareStatus : std::uint8_t { compared, missing_reference, missing_estimate };

inline std::string_view compare_status_name(CompareStatus s) {
    switch (s) {
        case CompareStatus::compared: return "ok";
        case CompareStatus::missing_reference: return "missing_reference";
        case CompareStatus::missing_estimate: return "missing_estimate";
    }
    return "?";
}

struct ComparisonRow {
    YearMonth month;
    Metric metric = Metric::km;
    BandValue band;                   ///< in the metric's unit
    std::optional<double> reference;
    bool inside = false;
    double gap = 0.0;                 ///< relative distance to the nearest band edge, 0 inside
    CompareStatus status = CompareStatus::compared;
};

/// Relative gap of `ref` to [low, high]: 0 inside, (ref - high) / high above,
/// (ref - low) / low below.
inline double band_gap(double ref, double low, double high) {
    if (ref > high) {
        return high != 0.0 ? (ref - high) / high : std::numeric_limits<double>::infinity();
    }
    if (ref < low) {
        return low != 0.0 ? (ref - low) / low : -std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

/// Monthly band in reporting units: km, m3 of diesel, t CO2e.
struct MonthlyTotals {
    YearMonth month;
    BandValue km;
    BandValue fuel_m3;
    BandValue co2e_t;
};

inline std::vector<MonthlyTotals> to_reporting_units(std::span<const MonthlyBand> bands) {
    auto scaled = [](const BandValue& v, double k) { return BandValue{v.raw * k, v.low * k, v.high * k}; };
    std::vector<MonthlyTotals> out;
    out.reserve(bands.size());
    for (const auto& b : bands) {
        out.push_back(MonthlyTotals{b.month, b.dist_km, scaled(b.fuel_l, 1e-3), scaled(b.co2e_kg, 1e-3)});
    }
    return out;
}

/// One row per (month, metric) across the union of computed and reference
/// months. Months present on only one side are reported, never imputed.
inline std::vector<ComparisonRow> topdown_compare(std::span<const MonthlyTotals> totals,
                                                  std::span<const ReferenceMonth> reference) {
    std::map<YearMonth, const MonthlyTotals*> est;
    for (const auto& b : totals) {
        est[b.month] = &b;
    }
    std::map<YearMonth, const ReferenceMonth*> ref;
    for (const auto& r : reference) {
        ref[r.month] = &r;
    }
    std::set<YearMonth> months;
    for (const auto& [m, p] : est) {
        months.insert(m);
    }
    for (const auto& [m, p] : ref) {
        months.insert(m);
    }
    std::vector<ComparisonRow> out;
    for (const auto& m : months) {
        const auto e = est.find(m);
        const auto r = ref.find(m);
        for (const auto metric : {Metric::km, Metric::diesel_m3, Metric::co2e_t}) {
            ComparisonRow row;
            row.month = m;
            row.metric = metric;
            if (e != est.end()) {
                const auto& b = *e->second;
                row.band = metric == Metric::km ? b.km : metric == Metric::diesel_m3 ? b.fuel_m3 : b.co2e_t;
            }
            if (r != ref.end()) {
                row.reference = metric == Metric::km          ? r->second->km
                                : metric == Metric::diesel_m3 ? r->second->diesel_m3
                                                              : r->second->co2e_t;
            }
            if (e == est.end()) {
                row.status = CompareStatus::missing_estimate;
            } else if (r == ref.end()) {
                row.status = CompareStatus::missing_reference;
            } else {
                row.inside = *row.reference >= row.band.low && *row.reference <= row.band.high;
                row.gap = band_gap(*row.reference, row.band.low, row.band.high);
            }
            out.push_back(row);
        }
    }
    return out;
}

/// Per-month totals of segment emissions (used for mass-conservation checks).
inline std::map<YearMonth, Totals> month_totals(std::span<const TravelSegment> segments,
                                                std::span<const SegmentEmission> emissions) {
    std::map<YearMonth, Totals> out;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        out[segments[i].month].add(segments[i], emissions[i]);
    }
    return out;
}

}  // namespace busghg
