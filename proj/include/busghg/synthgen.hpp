#pragma once

// Synthetic grid city: street graph, bus lines, a ground-truth drive log and
// the low-resolution GPS feed a real fleet would transmit, plus a ledger of
// true distance, fuel and CO2e. Used as the oracle for end-to-end tests.
//
// Kinematics: a trip runs terminal to terminal at one speed, chosen from the
// line's base speed and the hourly multiplier at departure. The speed is
// nudged so the trip takes a whole number of sampling intervals, so arrivals
// land on ping times and no sampled pair straddles a turnaround.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "busghg/csv.hpp"
#include "busghg/emissions.hpp"
#include "busghg/error.hpp"
#include "busghg/geo.hpp"
#include "busghg/io.hpp"
#include "busghg/pairing.hpp"
#include "busghg/sinuosity.hpp"
#include "busghg/street_graph.hpp"
#include "busghg/time.hpp"

namespace busghg::synth {

using Cell = std::pair<int, int>;  ///< (row, col)

struct GridSpec {
    int rows = 10;
    int cols = 10;
    double spacing_m = 200.0;
    GeoPoint origin{-22.95, -43.40};  ///< node (0, 0)
    std::vector<std::pair<Cell, Cell>> removed_edges;
};

struct LineSpec {
    std::string id;
    std::string label;  ///< free-form tag carried into the truth files
    int buses = 1;
    std::vector<Cell> waypoints;  ///< consecutive waypoints are joined by staircase paths
    double speed_kmh = 20.0;
    std::array<double, 24> hourly_multipliers{};  ///< filled with 1 by default
    int service_start_h = 5;
    int service_end_h = 23;
    std::int64_t headway_s = 600;
    int layover_intervals = 1;

    LineSpec() { hourly_multipliers.fill(1.0); }
};

struct DegradedDay {
    Date day;
    double retention = 1.0;
};

struct RandomDegradation {
    double fraction = 0.0;  ///< share of days damaged, rounded to a whole count
    double min_retention = 0.1;
    double max_retention = 0.5;
};

struct Scenario {
    std::uint64_t seed = 1;
    GridSpec grid;
    std::vector<LineSpec> lines;
    std::int64_t sampling_interval_s = 120;
    Date start_date{std::chrono::year{2015} / 1 / 1};
    int days = 1;
    UtcOffset utc_offset{-180};
    double jitter_m = 0.0;
    double baseline_retention = 1.0;
    std::vector<DegradedDay> degraded;
    RandomDegradation random_degradation;
    std::map<Date, double> service_multipliers;  ///< scales the bus count per day
    std::vector<SpeedBand> curve;
    std::vector<FuelSpec> fuels;
    std::map<std::string, std::string> pipeline;  ///< extra keys for the emitted run config

    Date end_date() const { return start_date + std::chrono::days{days - 1}; }
};

/// Illustrative speed-band curve for a 12 m diesel bus. Replace with
/// jurisdiction data for real inventories.
inline std::vector<SpeedBand> illustrative_bus_curve() {
    const double inf = std::numeric_limits<double>::infinity();
    return {{0, 10, 0.75}, {10, 20, 0.55}, {20, 30, 0.45}, {30, 40, 0.40}, {40, 60, 0.38}, {60, inf, 0.40}};
}

// ---------------------------------------------------------------- scenario file

namespace detail {

inline Cell cell_of(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw ConfigError("scenario: a grid cell is written [row, col]");
    }
    return {j[0].get<int>(), j[1].get<int>()};
}

inline double number_or_inf(const nlohmann::json& j) {
    if (j.is_null() || (j.is_string() && (j == "inf" || j == "Infinity"))) {
        return std::numeric_limits<double>::infinity();
    }
    return j.get<double>();
}

inline Date date_of(const nlohmann::json& j, const std::string& what) {
    return require_date(j.get<std::string>(), "scenario " + what);
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json& j) {
    try {
        Scenario s;
        s.seed = j.value("seed", std::uint64_t{1});
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            s.grid.rows = g.value("rows", s.grid.rows);
            s.grid.cols = g.value("cols", s.grid.cols);
            s.grid.spacing_m = g.value("spacing_m", s.grid.spacing_m);
            s.grid.origin.lat = g.value("origin_lat", s.grid.origin.lat);
            s.grid.origin.lon = g.value("origin_lon", s.grid.origin.lon);
            for (const auto& e : g.value("removed_edges", nlohmann::json::array())) {
                s.grid.removed_edges.emplace_back(detail::cell_of(e.at(0)), detail::cell_of(e.at(1)));
            }
        }
        for (const auto& l : j.at("lines")) {
            LineSpec line;
            line.id = l.at("id").get<std::string>();
            line.label = l.value("label", std::string{});
            line.buses = l.value("buses", line.buses);
            for (const auto& w : l.at("waypoints")) {
                line.waypoints.push_back(detail::cell_of(w));
            }
            line.speed_kmh = l.value("speed_kmh", line.speed_kmh);
            if (l.contains("hourly_multipliers")) {
                const auto& m = l["hourly_multipliers"];
                if (!m.is_array() || m.size() != 24) {
                    throw ConfigError("scenario: line " + line.id + " needs 24 hourly multipliers");
                }
                for (std::size_t h = 0; h < 24; ++h) {
                    line.hourly_multipliers[h] = m[h].get<double>();
                }
            }
            line.service_start_h = l.value("service_start_h", line.service_start_h);
            line.service_end_h = l.value("service_end_h", line.service_end_h);
            line.headway_s = l.value("headway_s", line.headway_s);
            line.layover_intervals = l.value("layover_intervals", line.layover_intervals);
            s.lines.push_back(std::move(line));
        }
        s.sampling_interval_s = j.value("sampling_interval_s", s.sampling_interval_s);
        if (j.contains("start_date")) {
            s.start_date = detail::date_of(j["start_date"], "start_date");
        }
        s.days = j.value("days", s.days);
        if (j.contains("utc_offset")) {
            const auto off = parse_utc_offset(j["utc_offset"].get<std::string>());
            if (!off) {
                throw ConfigError("scenario: invalid utc_offset");
            }
            s.utc_offset = *off;
        }
        s.jitter_m = j.value("jitter_m", s.jitter_m);
        s.baseline_retention = j.value("baseline_retention", s.baseline_retention);
        if (j.contains("degradation")) {
            const auto& d = j["degradation"];
            for (const auto& day : d.value("days", nlohmann::json::array())) {
                s.degraded.push_back(
                    DegradedDay{detail::date_of(day.at("date"), "degradation date"), day.at("retention").get<double>()});
            }
            if (d.contains("random")) {
                const auto& r = d["random"];
                s.random_degradation.fraction = r.value("fraction", 0.0);
                s.random_degradation.min_retention = r.value("min_retention", 0.1);
                s.random_degradation.max_retention = r.value("max_retention", 0.5);
            }
        }
        for (const auto& m : j.value("service_multipliers", nlohmann::json::array())) {
            s.service_multipliers[detail::date_of(m.at("date"), "service multiplier date")] =
                m.at("factor").get<double>();
        }
        if (j.contains("curve")) {
            for (const auto& b : j["curve"]) {
                s.curve.push_back(SpeedBand{b.at("low").get<double>(), detail::number_or_inf(b.at("high")),
                                            b.at("rate").get<double>()});
            }
        } else {
            s.curve = illustrative_bus_curve();
        }
        if (j.contains("fuels")) {
            for (const auto& f : j["fuels"]) {
                s.fuels.push_back(FuelSpec{f.at("name").get<std::string>(), f.at("factor").get<double>(),
                                           detail::date_of(f.at("from"), "fuel from"),
                                           detail::date_of(f.at("to"), "fuel to")});
            }
        } else {
            s.fuels.push_back(FuelSpec{"B6", kDieselB6Factor, s.start_date, s.end_date()});
        }
        const auto extra = j.value("pipeline", nlohmann::json::object());
        for (const auto& [k, v] : extra.items()) {
            s.pipeline[k] = v.is_string() ? v.get<std::string>() : v.dump();
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open scenario file " + path);
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    try {
        return parse_scenario(j);
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void validate_scenario(const Scenario& s) {
    if (s.grid.rows < 2 || s.grid.cols < 2 || !(s.grid.spacing_m > 0.0)) {
        throw ConfigError("scenario: grid needs rows, cols >= 2 and spacing_m > 0");
    }
    if (s.sampling_interval_s <= 0 || s.days < 1) {
        throw ConfigError("scenario: sampling_interval_s and days must be positive");
    }
    auto check_retention = [](double r, const std::string& what) {
        if (!(r >= 0.0 && r <= 1.0)) {
            throw ConfigError("scenario: " + what + " retention must be in [0, 1]");
        }
    };
    check_retention(s.baseline_retention, "baseline");
    for (const auto& d : s.degraded) {
        check_retention(d.retention, format_date(d.day));
    }
    check_retention(s.random_degradation.min_retention, "random min");
    check_retention(s.random_degradation.max_retention, "random max");
    if (s.random_degradation.fraction < 0.0 || s.random_degradation.fraction > 1.0 ||
        s.random_degradation.min_retention > s.random_degradation.max_retention) {
        throw ConfigError("scenario: random degradation needs fraction in [0, 1] and min <= max retention");
    }
    if (s.jitter_m < 0.0) {
        throw ConfigError("scenario: jitter_m must be >= 0");
    }
    std::set<std::string> ids;
    for (const auto& l : s.lines) {
        if (l.id.empty() || !ids.insert(l.id).second) {
            throw ConfigError("scenario: line ids must be unique and non-empty");
        }
        if (l.buses < 0 || l.waypoints.size() < 2 || !(l.speed_kmh > 0.0) || l.headway_s < 0 ||
            l.layover_intervals < 0) {
            throw ConfigError("scenario: line " + l.id + " needs >= 2 waypoints, speed > 0, buses/headway >= 0");
        }
        if (l.service_start_h < 0 || l.service_end_h > 24 || l.service_start_h >= l.service_end_h) {
            throw ConfigError("scenario: line " + l.id + " service hours must satisfy 0 <= start < end <= 24");
        }
        for (const double m : l.hourly_multipliers) {
            if (!(m > 0.0)) {
                throw ConfigError("scenario: line " + l.id + " hourly multipliers must be > 0");
            }
        }
        for (const auto& [r, c] : l.waypoints) {
            if (r < 0 || c < 0 || r >= s.grid.rows || c >= s.grid.cols) {
                throw ConfigError("scenario: line " + l.id + " waypoint outside the grid");
            }
        }
    }
    for (const auto& [d, f] : s.service_multipliers) {
        if (!(f >= 0.0)) {
            throw ConfigError("scenario: service multiplier for " + format_date(d) + " must be >= 0");
        }
    }
}

// ---------------------------------------------------------------- corpus

struct Ping {
    std::uint32_t vehicle = 0;  ///< index into SyntheticCorpus::vehicles
    Timestamp time;
    GeoPoint position;
    double speed_kmh = 0.0;
};

/// One sampling interval of the true drive log.
struct Leg {
    std::uint32_t vehicle = 0;
    Timestamp start;
    double dt_s = 0.0;
    double distance_m = 0.0;
    Date day;  ///< local day of the leg start
};

struct Vehicle {
    std::string id;
    std::uint32_t line = 0;  ///< index into the scenario's lines
};

struct LedgerRow {
    std::uint32_t vehicle = 0;
    Date day;
    double distance_m = 0.0;
    double fuel_l = 0.0;
    double co2e_kg = 0.0;
};

struct MonthTruth {
    YearMonth month;
    double distance_m = 0.0;
    double fuel_l = 0.0;
    double co2e_kg = 0.0;
};

struct LineTruth {
    std::string id;
    std::string label;
    double route_m = 0.0;
    double distance_m = 0.0;
    double fuel_l = 0.0;
    double co2e_kg = 0.0;
    double service_hours = 0.0;
};

struct SyntheticCorpus {
    std::vector<std::pair<NodeId, GeoPoint>> nodes;
    std::vector<Edge> edges;
    std::vector<Vehicle> vehicles;
    std::vector<Ping> pings;  ///< retained pings, ordered by (time, vehicle)
    std::size_t pings_generated = 0;
    std::vector<Leg> legs;    ///< full drive log, ordered by (day, vehicle, time)
    std::vector<LedgerRow> ledger;
    std::vector<MonthTruth> monthly;
    std::vector<LineTruth> lines;
    std::map<Date, double> retention;  ///< per-day retention actually applied

    StreetGraph graph() const { return StreetGraph(nodes, edges); }
};

inline NodeId grid_node(const GridSpec& g, int r, int c) { return static_cast<NodeId>(r) * g.cols + c; }

inline GeoPoint grid_position(const GridSpec& g, int r, int c) {
    const double dlat = g.spacing_m / kMetersPerDegree;
    const double dlon = g.spacing_m / (kMetersPerDegree * std::cos(deg2rad(g.origin.lat)));
    return GeoPoint{g.origin.lat + r * dlat, g.origin.lon + c * dlon};
}

/// Monotone staircase between two cells: alternate row and column steps
/// while both remain, then go straight. Same-row or same-column pairs give a
/// straight path.
inline std::vector<Cell> staircase(Cell from, Cell to) {
    std::vector<Cell> path{from};
    auto [r, c] = from;
    const int dr = to.first > r ? 1 : -1;
    const int dc = to.second > c ? 1 : -1;
    bool row_turn = true;
    while (r != to.first || c != to.second) {
        if (r != to.first && (row_turn || c == to.second)) {
            r += dr;
        } else {
            c += dc;
        }
        row_turn = !row_turn;
        path.emplace_back(r, c);
    }
    return path;
}

/// Uniform index in [0, n) from the top bits; portable across standard libraries.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(n)));
}

/// Standard normal draw (Box-Muller), portable across standard libraries.
inline double standard_normal(std::mt19937_64& rng) {
    const double u1 = 1.0 - unit_uniform(rng);  // (0, 1]
    const double u2 = unit_uniform(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace detail {

struct Route {
    std::vector<GeoPoint> points;  ///< node positions along the forward direction
    std::vector<double> cum;       ///< cumulative length at each point
    double length() const { return cum.back(); }

    /// Position at arc length s from the start (forward) or the end (reverse).
    GeoPoint at(double s, bool reverse) const {
        if (reverse) {
            s = length() - s;
        }
        s = std::clamp(s, 0.0, length());
        auto it = std::upper_bound(cum.begin(), cum.end(), s);
        std::size_t i = it == cum.begin() ? 0 : static_cast<std::size_t>(it - cum.begin()) - 1;
        if (i + 1 >= points.size()) {
            return points.back();
        }
        const double span = cum[i + 1] - cum[i];
        const double f = span > 0.0 ? (s - cum[i]) / span : 0.0;
        return GeoPoint{points[i].lat + f * (points[i + 1].lat - points[i].lat),
                        points[i].lon + f * (points[i + 1].lon - points[i].lon)};
    }
};

}  // namespace detail

/// Builds the corpus. Throws ConfigError for invalid scenarios and DataError
/// when a route uses a street that is not in the graph.
inline SyntheticCorpus generate(const Scenario& s) {
    validate_scenario(s);
    const FuelTable fuels(s.fuels);
    fuels.check_covers(s.start_date, s.end_date());
    const ConsumptionCurve curve(s.curve);
    const auto& g = s.grid;

    SyntheticCorpus out;
    // Graph: grid nodes and 4-neighbour edges with haversine lengths.
    std::set<std::pair<NodeId, NodeId>> removed;
    for (const auto& [a, b] : g.removed_edges) {
        const auto na = grid_node(g, a.first, a.second);
        const auto nb = grid_node(g, b.first, b.second);
        removed.emplace(std::min(na, nb), std::max(na, nb));
    }
    std::map<std::pair<NodeId, NodeId>, double> edge_length;
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            out.nodes.emplace_back(grid_node(g, r, c), grid_position(g, r, c));
        }
    }
    auto add_edge = [&](int r1, int c1, int r2, int c2) {
        const auto a = grid_node(g, r1, c1);
        const auto b = grid_node(g, r2, c2);
        if (removed.contains({std::min(a, b), std::max(a, b)})) {
            return;
        }
        const double len = haversine_distance(grid_position(g, r1, c1), grid_position(g, r2, c2));
        out.edges.push_back(Edge{a, b, len, false});
        edge_length[{std::min(a, b), std::max(a, b)}] = len;
    };
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            if (c + 1 < g.cols) {
                add_edge(r, c, r, c + 1);
            }
            if (r + 1 < g.rows) {
                add_edge(r, c, r + 1, c);
            }
        }
    }

    // Routes.
    std::vector<detail::Route> routes;
    for (const auto& line : s.lines) {
        detail::Route route;
        route.points.push_back(grid_position(g, line.waypoints[0].first, line.waypoints[0].second));
        route.cum.push_back(0.0);
        for (std::size_t w = 1; w < line.waypoints.size(); ++w) {
            const auto steps = staircase(line.waypoints[w - 1], line.waypoints[w]);
            for (std::size_t k = 1; k < steps.size(); ++k) {
                const auto a = grid_node(g, steps[k - 1].first, steps[k - 1].second);
                const auto b = grid_node(g, steps[k].first, steps[k].second);
                const auto it = edge_length.find({std::min(a, b), std::max(a, b)});
                if (it == edge_length.end()) {
                    throw DataError("synth: route of line " + line.id + " is disconnected (no street between nodes " +
                                    std::to_string(a) + " and " + std::to_string(b) + ")");
                }
                route.points.push_back(grid_position(g, steps[k].first, steps[k].second));
                route.cum.push_back(route.cum.back() + it->second);
            }
        }
        if (!(route.length() > 0.0)) {
            throw ConfigError("synth: line " + line.id + " has a zero-length route");
        }
        routes.push_back(std::move(route));
        out.lines.push_back(LineTruth{line.id, line.label, routes.back().length(), 0.0, 0.0, 0.0, 0.0});
    }

    std::mt19937_64 rng(s.seed);

    // Day retention: explicit list, then a random draw among the remaining days.
    for (int d = 0; d < s.days; ++d) {
        out.retention[s.start_date + std::chrono::days{d}] = s.baseline_retention;
    }
    std::set<Date> explicit_days;
    for (const auto& d : s.degraded) {
        if (out.retention.contains(d.day)) {
            out.retention[d.day] = d.retention;
            explicit_days.insert(d.day);
        }
    }
    if (s.random_degradation.fraction > 0.0) {
        std::vector<Date> pool;
        for (const auto& [d, r] : out.retention) {
            if (!explicit_days.contains(d)) {
                pool.push_back(d);
            }
        }
        const auto want = std::min(pool.size(), static_cast<std::size_t>(std::llround(
                                                    s.random_degradation.fraction * static_cast<double>(s.days))));
        for (std::size_t i = 0; i < want; ++i) {
            const auto j = i + uniform_index(rng, pool.size() - i);
            std::swap(pool[i], pool[j]);
            const auto& rd = s.random_degradation;
            out.retention[pool[i]] = rd.min_retention + (rd.max_retention - rd.min_retention) * unit_uniform(rng);
        }
    }

    // Vehicles: the largest fleet any day needs, per line.
    double max_factor = 1.0;
    for (const auto& [d, f] : s.service_multipliers) {
        max_factor = std::max(max_factor, f);
    }
    std::vector<std::vector<std::uint32_t>> fleet(s.lines.size());
    for (std::size_t li = 0; li < s.lines.size(); ++li) {
        const auto n = static_cast<int>(std::llround(s.lines[li].buses * max_factor));
        const int width = n >= 100 ? 3 : 2;
        for (int b = 0; b < n; ++b) {
            std::string num = std::to_string(b);
            num.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(num.size()))), '0');
            fleet[li].push_back(static_cast<std::uint32_t>(out.vehicles.size()));
            out.vehicles.push_back(Vehicle{s.lines[li].id + "-" + num, static_cast<std::uint32_t>(li)});
        }
    }

    const std::int64_t dt = s.sampling_interval_s;
    const double dlat_per_m = 1.0 / kMetersPerDegree;
    const double dlon_per_m = 1.0 / (kMetersPerDegree * std::cos(deg2rad(g.origin.lat)));

    for (int di = 0; di < s.days; ++di) {
        const Date day = s.start_date + std::chrono::days{di};
        const double retention = out.retention[day];
        const auto mult_it = s.service_multipliers.find(day);
        const double factor = mult_it == s.service_multipliers.end() ? 1.0 : mult_it->second;
        const std::int64_t midnight_s = local_midnight(day, s.utc_offset).ms / 1000;
        std::vector<Ping> day_pings;

        for (std::size_t li = 0; li < s.lines.size(); ++li) {
            const auto& line = s.lines[li];
            const auto& route = routes[li];
            const auto L = route.length();
            const auto n_buses =
                std::min<std::size_t>(fleet[li].size(), static_cast<std::size_t>(std::llround(line.buses * factor)));
            for (std::size_t b = 0; b < n_buses; ++b) {
                const auto vid = fleet[li][b];
                bool reverse = b % 2 == 1;
                std::int64_t t = line.service_start_h * 3600LL + static_cast<std::int64_t>(b) * line.headway_s;
                const std::int64_t end = line.service_end_h * 3600LL;
                bool first = true;
                LedgerRow row{vid, day, 0.0, 0.0, 0.0};
                auto emit = [&](double dist_m, double speed, GeoPoint where) {
                    day_pings.push_back(Ping{vid, Timestamp{(midnight_s + t) * 1000}, where, speed});
                    Leg leg{vid, Timestamp{(midnight_s + t) * 1000}, static_cast<double>(dt), dist_m, day};
                    const double fuel = fuel_consumption(dist_m, speed_kmh(dist_m, leg.dt_s), curve);
                    row.distance_m += dist_m;
                    row.fuel_l += fuel;
                    row.co2e_kg += co2e_emissions(fuel, day, fuels);
                    out.legs.push_back(leg);
                    t += dt;
                };
                while (true) {
                    const std::int64_t depart = t + (first ? 0 : line.layover_intervals * dt);
                    if (depart >= end) {
                        break;
                    }
                    const double v = line.speed_kmh * line.hourly_multipliers[static_cast<std::size_t>(depart / 3600)];
                    const auto n = std::max<std::int64_t>(1, std::llround(L / (v / 3.6 * static_cast<double>(dt))));
                    if (depart + n * dt > end) {
                        break;
                    }
                    if (!first) {
                        const auto terminal = route.at(L, reverse);
                        for (int k = 0; k < line.layover_intervals; ++k) {
                            emit(0.0, 0.0, terminal);
                        }
                        reverse = !reverse;
                    }
                    const double leg_m = L / static_cast<double>(n);
                    const double v_eff = speed_kmh(leg_m, static_cast<double>(dt));
                    for (std::int64_t k = 0; k < n; ++k) {
                        emit(leg_m, v_eff, route.at(leg_m * static_cast<double>(k), reverse));
                    }
                    first = false;
                }
                if (!first) {
                    // Final fix at the last terminal.
                    day_pings.push_back(Ping{vid, Timestamp{(midnight_s + t) * 1000}, route.at(L, reverse), 0.0});
                    out.ledger.push_back(row);
                }
            }
        }

        // Downsample and jitter in (time, vehicle) order.
        std::sort(day_pings.begin(), day_pings.end(), [](const Ping& a, const Ping& b) {
            return a.time.ms != b.time.ms ? a.time.ms < b.time.ms : a.vehicle < b.vehicle;
        });
        out.pings_generated += day_pings.size();
        for (auto& p : day_pings) {
            const bool keep = unit_uniform(rng) < retention;
            if (s.jitter_m > 0.0) {
                const double north = standard_normal(rng) * s.jitter_m;
                const double east = standard_normal(rng) * s.jitter_m;
                p.position.lat += north * dlat_per_m;
                p.position.lon += east * dlon_per_m;
            }
            if (keep) {
                out.pings.push_back(p);
            }
        }
    }

    // Rollups, summed in ledger order.
    std::map<YearMonth, MonthTruth> months;
    for (int d = 0; d < s.days; ++d) {
        const auto ym = year_month_of(s.start_date + std::chrono::days{d});
        months[ym].month = ym;
    }
    for (const auto& r : out.ledger) {
        auto& m = months[year_month_of(r.day)];
        m.distance_m += r.distance_m;
        m.fuel_l += r.fuel_l;
        m.co2e_kg += r.co2e_kg;
        auto& lt = out.lines[out.vehicles[r.vehicle].line];
        lt.distance_m += r.distance_m;
        lt.fuel_l += r.fuel_l;
        lt.co2e_kg += r.co2e_kg;
    }
    for (const auto& leg : out.legs) {
        out.lines[out.vehicles[leg.vehicle].line].service_hours += leg.dt_s / 3600.0;
    }
    for (auto& [ym, m] : months) {
        out.monthly.push_back(m);
    }
    return out;
}

// ---------------------------------------------------------------- files

struct CorpusPaths {
    std::filesystem::path dir;
    std::filesystem::path gps() const { return dir / "gps.csv"; }
    std::filesystem::path nodes() const { return dir / "nodes.csv"; }
    std::filesystem::path edges() const { return dir / "edges.csv"; }
    std::filesystem::path ledger() const { return dir / "ledger.csv"; }
    std::filesystem::path reference() const { return dir / "reference_monthly.csv"; }
    std::filesystem::path line_truth() const { return dir / "line_truth.csv"; }
    std::filesystem::path curve() const { return dir / "curve.csv"; }
    std::filesystem::path fuels() const { return dir / "fuels.csv"; }
    std::filesystem::path config() const { return dir / "config.ini"; }
};

/// Bounding box of the grid with a margin of two blocks.
inline BoundingBox scenario_bounds(const Scenario& s) {
    const auto lo = grid_position(s.grid, 0, 0);
    const auto hi = grid_position(s.grid, s.grid.rows - 1, s.grid.cols - 1);
    const double mlat = 2.0 * s.grid.spacing_m / kMetersPerDegree;
    const double mlon = 2.0 * s.grid.spacing_m / (kMetersPerDegree * std::cos(deg2rad(s.grid.origin.lat)));
    return BoundingBox{lo.lat - mlat, hi.lat + mlat, lo.lon - mlon, hi.lon + mlon};
}

inline void write_corpus(const SyntheticCorpus& c, const Scenario& s, const std::filesystem::path& dir) {
    const CorpusPaths p{dir};
    std::filesystem::create_directories(dir);
    auto d = [](double v) { return csv::format_double(v); };

    io::write_file_atomic(p.gps(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("vehicle", "line", "lat", "lon", "timestamp", "speed");
        for (const auto& ping : c.pings) {
            const auto& v = c.vehicles[ping.vehicle];
            w.row(v.id, s.lines[v.line].id, ping.position.lat, ping.position.lon,
                  format_timestamp(ping.time, s.utc_offset), ping.speed_kmh);
        }
    });
    io::write_file_atomic(p.nodes(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("node_id", "lat", "lon");
        for (const auto& [id, pos] : c.nodes) {
            w.row(id, pos.lat, pos.lon);
        }
    });
    io::write_file_atomic(p.edges(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("node_a", "node_b", "length_m", "oneway");
        for (const auto& e : c.edges) {
            w.row(e.a, e.b, e.length_m, e.oneway ? 1 : 0);
        }
    });
    io::write_file_atomic(p.ledger(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("vehicle", "line", "date", "distance_m", "fuel_l", "co2e_kg", "retention");
        for (const auto& r : c.ledger) {
            const auto& v = c.vehicles[r.vehicle];
            w.row(v.id, s.lines[v.line].id, format_date(r.day), r.distance_m, r.fuel_l, r.co2e_kg,
                  c.retention.at(r.day));
        }
    });
    io::write_file_atomic(p.reference(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("month", "km", "diesel_m3", "co2e_t");
        for (const auto& m : c.monthly) {
            w.row(format_year_month(m.month), m.distance_m / 1000.0, m.fuel_l / 1000.0, m.co2e_kg / 1000.0);
        }
    });
    io::write_file_atomic(p.line_truth(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("line", "label", "route_m", "distance_m", "fuel_l", "co2e_kg", "service_hours");
        for (const auto& l : c.lines) {
            w.row(l.id, l.label, l.route_m, l.distance_m, l.fuel_l, l.co2e_kg, l.service_hours);
        }
    });
    io::write_file_atomic(p.curve(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("speed_low_kmh", "speed_high_kmh", "liters_per_km");
        for (const auto& b : s.curve) {
            w.row(b.low_kmh, b.high_kmh, b.liters_per_km);
        }
    });
    io::write_file_atomic(p.fuels(), [&](std::ostream& os) {
        csv::Writer w(os);
        w.row("name", "factor_tco2e_per_m3", "from_date", "to_date");
        for (const auto& f : s.fuels) {
            w.row(f.name, f.factor_t_per_m3, format_date(f.effective_from), format_date(f.effective_to));
        }
    });
    const auto box = scenario_bounds(s);
    std::map<std::string, std::string> cfg{
        {"gps.path", "gps.csv"},
        {"gps.columns", "vehicle,line,lat,lon,timestamp,speed"},
        {"graph.nodes", "nodes.csv"},
        {"graph.edges", "edges.csv"},
        {"curve.path", "curve.csv"},
        {"fuels.path", "fuels.csv"},
        {"reference.path", "reference_monthly.csv"},
        {"bounds.min_lat", d(box.min_lat)},
        {"bounds.max_lat", d(box.max_lat)},
        {"bounds.min_lon", d(box.min_lon)},
        {"bounds.max_lon", d(box.max_lon)},
        {"time.utc_offset", format_utc_offset(s.utc_offset)},
        {"analysis.start_date", format_date(s.start_date)},
        {"analysis.end_date", format_date(s.end_date())},
        {"output.dir", "out"},
    };
    for (const auto& [k, v] : s.pipeline) {
        cfg[k] = v;
    }
    io::write_file_atomic(p.config(), [&](std::ostream& os) {
        os << "# generated by busghg synth (seed " << s.seed << ")\n";
        for (const auto& [k, v] : cfg) {
            os << k << " = " << v << '\n';
        }
    });
}

}  // namespace busghg::synth
