#pragma once

// Speed-band fuel consumption and fuel-to-CO2e conversion.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "busghg/csv.hpp"
#include "busghg/error.hpp"
#include "busghg/pairing.hpp"
#include "busghg/parallel.hpp"
#include "busghg/sinuosity.hpp"
#include "busghg/time.hpp"

namespace busghg {

/// Brazilian diesel blend emission factors, tCO2e per m3.
inline constexpr double kDieselB6Factor = 2.51;
inline constexpr double kDieselB7Factor = 2.49;

struct SpeedBand {
    double low_kmh = 0.0;   ///< inclusive
    double high_kmh = 0.0;  ///< exclusive; may be +inf for the last band
    double liters_per_km = 0.0;
};

/// Piecewise-constant fuel rate over speed bands [low, high). Speeds below
/// the first band use its rate; speeds at or above the last band's upper
/// edge use the last rate.
class ConsumptionCurve {
public:
    explicit ConsumptionCurve(std::vector<SpeedBand> bands) : bands_(std::move(bands)) {
        if (bands_.empty()) {
            throw ConfigError("consumption curve: at least one band is required");
        }
        if (bands_.front().low_kmh != 0.0) {
            throw ConfigError("consumption curve: first band must start at 0 km/h");
        }
        for (std::size_t i = 0; i < bands_.size(); ++i) {
            const auto& b = bands_[i];
            if (!(b.high_kmh > b.low_kmh)) {
                throw ConfigError("consumption curve: band " + std::to_string(i) + " has high <= low");
            }
            if (!(b.liters_per_km > 0.0) || !std::isfinite(b.liters_per_km)) {
                throw ConfigError("consumption curve: band " + std::to_string(i) + " needs a positive rate");
            }
            if (i > 0 && b.low_kmh != bands_[i - 1].high_kmh) {
                throw ConfigError("consumption curve: bands " + std::to_string(i - 1) + " and " + std::to_string(i) +
                                  " are not contiguous");
            }
        }
    }

    static ConsumptionCurve flat(double liters_per_km) {
        return ConsumptionCurve({SpeedBand{0.0, std::numeric_limits<double>::infinity(), liters_per_km}});
    }

    /// CSV with header speed_low_kmh,speed_high_kmh,liters_per_km; "inf" is
    /// accepted as the last upper edge.
    static ConsumptionCurve load_csv(const std::string& path) {
        const auto t = csv::read_table_file(path, {"speed_low_kmh", "speed_high_kmh", "liters_per_km"});
        std::vector<SpeedBand> bands;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            bands.push_back(SpeedBand{csv::require_double(t, r, 0, path), csv::require_double(t, r, 1, path),
                                      csv::require_double(t, r, 2, path)});
        }
        try {
            return ConsumptionCurve(std::move(bands));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }

    double rate_at(double speed_kmh) const {
        if (speed_kmh < bands_.front().low_kmh) {
            return bands_.front().liters_per_km;
        }
        // First band whose upper edge lies above the speed.
        const auto it = std::upper_bound(bands_.begin(), bands_.end(), speed_kmh,
                                         [](double v, const SpeedBand& b) { return v < b.high_kmh; });
        return it == bands_.end() ? bands_.back().liters_per_km : it->liters_per_km;
    }

    std::span<const SpeedBand> bands() const { return bands_; }

private:
    std::vector<SpeedBand> bands_;
};

struct FuelSpec {
    std::string name;  ///< B6, B7 or a custom label
    double factor_t_per_m3 = 0.0;
    Date effective_from;  ///< inclusive
    Date effective_to;    ///< inclusive
};

/// Non-overlapping, date-ranged emission factors.
class FuelTable {
public:
    explicit FuelTable(std::vector<FuelSpec> specs) : specs_(std::move(specs)) {
        if (specs_.empty()) {
            throw ConfigError("fuels: at least one fuel spec is required");
        }
        std::sort(specs_.begin(), specs_.end(),
                  [](const FuelSpec& a, const FuelSpec& b) { return a.effective_from < b.effective_from; });
        for (std::size_t i = 0; i < specs_.size(); ++i) {
            const auto& s = specs_[i];
            if (!(s.factor_t_per_m3 > 0.0) || !std::isfinite(s.factor_t_per_m3)) {
                throw ConfigError("fuels: factor for " + s.name + " must be > 0");
            }
            if (s.effective_to < s.effective_from) {
                throw ConfigError("fuels: " + s.name + " ends before it starts");
            }
            if (i > 0 && s.effective_from <= specs_[i - 1].effective_to) {
                throw ConfigError("fuels: " + specs_[i - 1].name + " and " + s.name + " overlap");
            }
        }
    }

    /// CSV with header name,factor_tco2e_per_m3,from_date,to_date (inclusive dates).
    static FuelTable load_csv(const std::string& path) {
        const auto t = csv::read_table_file(path, {"name", "factor_tco2e_per_m3", "from_date", "to_date"});
        std::vector<FuelSpec> specs;
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const auto where = path + ":" + std::to_string(t.line_numbers[r]);
            specs.push_back(FuelSpec{t.rows[r][0], csv::require_double(t, r, 1, path),
                                     require_date(t.rows[r][2], where), require_date(t.rows[r][3], where)});
        }
        try {
            return FuelTable(std::move(specs));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ": " + e.what());
        }
    }

    /// Throws ConfigError naming the date when no spec covers it.
    const FuelSpec& at(Date d) const {
        const auto it = std::upper_bound(specs_.begin(), specs_.end(), d,
                                         [](Date v, const FuelSpec& s) { return v < s.effective_from; });
        if (it != specs_.begin()) {
            const auto& s = *std::prev(it);
            if (d <= s.effective_to) {
                return s;
            }
        }
        throw ConfigError("fuels: no fuel spec covers " + format_date(d));
    }

    /// Throws ConfigError naming the first uncovered day in [from, to].
    void check_covers(Date from, Date to) const {
        for (Date d = from; d <= to; d += std::chrono::days{1}) {
            (void)at(d);
        }
    }

    std::span<const FuelSpec> specs() const { return specs_; }

private:
    std::vector<FuelSpec> specs_;
};

/// Liters burned over `dist_m` at average `speed_kmh`.
inline double fuel_consumption(double dist_m, double speed_kmh, const ConsumptionCurve& curve) {
    return dist_m / 1000.0 * curve.rate_at(speed_kmh);
}

/// kg CO2e from liters: L * 1e-3 m3/L * factor t/m3 * 1e3 kg/t. The two
/// powers of ten cancel, so the product is taken directly.
inline double co2e_emissions(double fuel_l, Date at, const FuelTable& fuels) {
    return fuel_l * fuels.at(at).factor_t_per_m3;
}

struct SegmentEmission {
    double corrected_m = 0.0;
    double speed_kmh = 0.0;  ///< from the corrected distance
    double fuel_l = 0.0;
    double co2e_kg = 0.0;

    friend bool operator==(const SegmentEmission&, const SegmentEmission&) = default;
};

/// corrected distance -> speed on that distance -> fuel -> CO2e.
inline SegmentEmission emissions_for_segment(const TravelSegment& seg, double mean_s, const ConsumptionCurve& curve,
                                             const FuelTable& fuels, const PairingConfig& cfg) {
    SegmentEmission e;
    e.corrected_m = corrected_distance(seg, mean_s, cfg);
    e.speed_kmh = segment_speed(seg, e.corrected_m);
    e.fuel_l = fuel_consumption(e.corrected_m, e.speed_kmh, curve);
    e.co2e_kg = co2e_emissions(e.fuel_l, seg.day, fuels);
    return e;
}

inline SegmentEmission emissions_for_segment(const TravelSegment& seg, const SinuosityEstimate& est,
                                             const ConsumptionCurve& curve, const FuelTable& fuels,
                                             const PairingConfig& cfg) {
    return emissions_for_segment(seg, est.mean_s, curve, fuels, cfg);
}

/// Segments with their per-segment emissions, index aligned.
struct EmissionDataset {
    std::vector<TravelSegment> segments;
    std::vector<SegmentEmission> emissions;
};

inline std::vector<SegmentEmission> compute_emissions(std::span<const TravelSegment> segments, double mean_s,
                                                      const ConsumptionCurve& curve, const FuelTable& fuels,
                                                      const PairingConfig& cfg, unsigned workers = 1) {
    std::vector<SegmentEmission> out(segments.size());
    parallel_for(segments.size(), workers,
                 [&](std::size_t i) { out[i] = emissions_for_segment(segments[i], mean_s, curve, fuels, cfg); });
    return out;
}

}  // namespace busghg
