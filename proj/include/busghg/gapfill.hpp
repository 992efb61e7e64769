#pragma once

// Day-level gap filling. Each weekday's best-recorded days (the top decile
// of its daily segment-count distribution) define an expected range; days
// below it are scaled up into that range, giving a low/high band.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include "busghg/emissions.hpp"
#include "busghg/error.hpp"
#include "busghg/pairing.hpp"
#include "busghg/time.hpp"

namespace busghg {

struct DailyCount {
    Date date;
    unsigned weekday = 0;  ///< 0 = Monday
    std::int64_t segment_count = 0;
    double co2e_kg = 0.0;
    double fuel_l = 0.0;
    double dist_km = 0.0;

    friend bool operator==(const DailyCount&, const DailyCount&) = default;
};

struct ExpectedRange {
    unsigned weekday = 0;
    std::int64_t low = 0;   ///< nearest-rank percentile of that weekday's counts
    std::int64_t high = 0;  ///< maximum count
    std::size_t observations = 0;
    bool insufficient = false;  ///< fewer observations than the configured minimum
};

struct GapfillConfig {
    unsigned percentile = 90;
    std::size_t min_observations = 10;

    void validate() const {
        if (percentile == 0 || percentile > 100) {
            throw ConfigError("gapfill.percentile must be in 1..100");
        }
    }
};

/// Daily totals for every date in [first, last], zero rows included.
inline std::vector<DailyCount> daily_counts(std::span<const TravelSegment> segments,
                                            std::span<const SegmentEmission> emissions, Date first, Date last) {
    if (last < first) {
        return {};
    }
    const auto n = static_cast<std::size_t>((last - first).count() + 1);
    std::vector<DailyCount> days(n);
    for (std::size_t i = 0; i < n; ++i) {
        days[i].date = first + std::chrono::days{static_cast<int>(i)};
        days[i].weekday = weekday_index(days[i].date);
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& s = segments[i];
        if (s.day < first || s.day > last) {
            continue;
        }
        auto& d = days[static_cast<std::size_t>((s.day - first).count())];
        ++d.segment_count;
        d.co2e_kg += emissions[i].co2e_kg;
        d.fuel_l += emissions[i].fuel_l;
        d.dist_km += emissions[i].corrected_m / 1000.0;
    }
    return days;
}

/// Nearest-rank percentile: the value at 1-based rank ceil(p/100 * n) of the ascending list.
inline std::int64_t nearest_rank(std::span<const std::int64_t> sorted, unsigned percentile) {
    const std::size_t n = sorted.size();
    std::size_t rank = (static_cast<std::size_t>(percentile) * n + 99) / 100;
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

/// Per-weekday expected range: [P90, max] of that weekday's daily counts.
/// Keyed by weekday index; weekdays without any day are absent.
inline std::map<unsigned, ExpectedRange> compute_expected_ranges(std::span<const DailyCount> days,
                                                                 const GapfillConfig& cfg = {}) {
    cfg.validate();
    std::map<unsigned, std::vector<std::int64_t>> by_weekday;
    for (const auto& d : days) {
        by_weekday[d.weekday].push_back(d.segment_count);
    }
    std::map<unsigned, ExpectedRange> ranges;
    for (auto& [wd, counts] : by_weekday) {
        std::sort(counts.begin(), counts.end());
        ExpectedRange r;
        r.weekday = wd;
        r.low = nearest_rank(counts, cfg.percentile);
        r.high = counts.back();
        r.observations = counts.size();
        r.insufficient = counts.size() < cfg.min_observations;
        ranges.emplace(wd, r);
    }
    return ranges;
}

enum class FillMethod : std::uint8_t { pass_through, scaled, synthesized };

inline std::string_view fill_method_name(FillMethod m) {
    switch (m) {
        case FillMethod::pass_through: return "pass";
        case FillMethod::scaled: return "scaled";
        case FillMethod::synthesized: return "synthesized";
    }
    return "?";
}

struct BandValue {
    double raw = 0.0;
    double low = 0.0;
    double high = 0.0;

    friend bool operator==(const BandValue&, const BandValue&) = default;
};

struct FilledDay {
    DailyCount observed;
    FillMethod method = FillMethod::pass_through;
    double scale_low = 1.0;   ///< +inf when synthesized from a zero count
    double scale_high = 1.0;
    BandValue co2e_kg;
    BandValue fuel_l;
    BandValue dist_km;

    Date date() const { return observed.date; }
};

/// Days below their weekday's range are scaled by low/count and high/count;
/// zero-count days get the weekday's mean per-segment values times low and
/// high. Other days pass through unchanged.
inline std::vector<FilledDay> fill_missing_days(std::span<const DailyCount> days,
                                                const std::map<unsigned, ExpectedRange>& ranges) {
    struct Mean {
        std::int64_t count = 0;
        double co2e = 0.0, fuel = 0.0, dist = 0.0;
    };
    std::map<unsigned, Mean> sums;
    for (const auto& d : days) {
        if (d.segment_count > 0) {
            auto& m = sums[d.weekday];
            m.count += d.segment_count;
            m.co2e += d.co2e_kg;
            m.fuel += d.fuel_l;
            m.dist += d.dist_km;
        }
    }
    std::vector<FilledDay> out;
    out.reserve(days.size());
    for (const auto& d : days) {
        FilledDay f;
        f.observed = d;
        f.co2e_kg = {d.co2e_kg, d.co2e_kg, d.co2e_kg};
        f.fuel_l = {d.fuel_l, d.fuel_l, d.fuel_l};
        f.dist_km = {d.dist_km, d.dist_km, d.dist_km};
        const auto it = ranges.find(d.weekday);
        if (it != ranges.end() && d.segment_count < it->second.low) {
            const auto& r = it->second;
            const double low = static_cast<double>(r.low);
            const double high = static_cast<double>(r.high);
            if (d.segment_count > 0) {
                f.method = FillMethod::scaled;
                const double count = static_cast<double>(d.segment_count);
                f.scale_low = low / count;
                f.scale_high = high / count;
                f.co2e_kg.low = d.co2e_kg * f.scale_low;
                f.co2e_kg.high = d.co2e_kg * f.scale_high;
                f.fuel_l.low = d.fuel_l * f.scale_low;
                f.fuel_l.high = d.fuel_l * f.scale_high;
                f.dist_km.low = d.dist_km * f.scale_low;
                f.dist_km.high = d.dist_km * f.scale_high;
            } else if (const auto m = sums.find(d.weekday); m != sums.end()) {
                f.method = FillMethod::synthesized;
                f.scale_low = std::numeric_limits<double>::infinity();
                f.scale_high = std::numeric_limits<double>::infinity();
                const double per = static_cast<double>(m->second.count);
                f.co2e_kg.low = m->second.co2e / per * low;
                f.co2e_kg.high = m->second.co2e / per * high;
                f.fuel_l.low = m->second.fuel / per * low;
                f.fuel_l.high = m->second.fuel / per * high;
                f.dist_km.low = m->second.dist / per * low;
                f.dist_km.high = m->second.dist / per * high;
            }
        }
        out.push_back(f);
    }
    return out;
}

struct MonthlyBand {
    YearMonth month;
    BandValue dist_km;
    BandValue fuel_l;
    BandValue co2e_kg;
    std::size_t days = 0;
    std::size_t filled_days = 0;
};

/// Observed and filled totals per calendar month, in month order.
inline std::vector<MonthlyBand> monthly_band(std::span<const FilledDay> filled) {
    std::map<YearMonth, MonthlyBand> months;
    auto add = [](BandValue& acc, const BandValue& v) {
        acc.raw += v.raw;
        acc.low += v.low;
        acc.high += v.high;
    };
    for (const auto& f : filled) {
        const auto ym = year_month_of(f.date());
        auto& m = months[ym];
        m.month = ym;
        add(m.dist_km, f.dist_km);
        add(m.fuel_l, f.fuel_l);
        add(m.co2e_kg, f.co2e_kg);
        ++m.days;
        if (f.method != FillMethod::pass_through) {
            ++m.filled_days;
        }
    }
    std::vector<MonthlyBand> out;
    out.reserve(months.size());
    for (auto& [ym, m] : months) {
        out.push_back(m);
    }
    return out;
}

/// Days whose count reaches their weekday's expected range (the best-recorded decile).
inline std::set<Date> best_days(std::span<const DailyCount> days, const std::map<unsigned, ExpectedRange>& ranges) {
    std::set<Date> out;
    for (const auto& d : days) {
        const auto it = ranges.find(d.weekday);
        if (it != ranges.end() && d.segment_count >= it->second.low && d.segment_count > 0) {
            out.insert(d.date);
        }
    }
    return out;
}

}  // namespace busghg
