#pragma once

// Sequential GPS pairs ("travel segments") within one vehicle-day.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "busghg/error.hpp"
#include "busghg/geo.hpp"
#include "busghg/ingest.hpp"
#include "busghg/parallel.hpp"
#include "busghg/time.hpp"

namespace busghg {

struct PairingConfig {
    double max_gap_s = 180.0;        ///< pairs need dt strictly below this
    double max_speed_kmh = 120.0;    ///< pairs faster than this are rejected
    double near_threshold_m = 50.0;  ///< below this the straight line is the real distance

    void validate() const {
        if (!(max_gap_s > 0.0) || !(max_speed_kmh > 0.0) || !(near_threshold_m > 0.0)) {
            throw ConfigError("pairing: max_gap_s, max_speed_kmh and near_threshold_m must be > 0");
        }
        if (!(near_threshold_m < max_speed_kmh / 3.6 * max_gap_s)) {
            throw ConfigError("pairing: near_threshold_m must be below max_speed_kmh * max_gap_s");
        }
    }
};

struct SegmentEnd {
    GeoPoint position;
    Timestamp time;
    std::int64_t source_row = 0;
};

struct TravelSegment {
    std::string vehicle_id;
    std::string line_id;
    SegmentEnd start;
    SegmentEnd end;
    double dt_s = 0.0;
    double euclid_m = 0.0;
    int start_hour = 0;    ///< local hour 0..23
    unsigned weekday = 0;  ///< 0 = Monday .. 6 = Sunday
    Date day;              ///< local calendar day of the start record
    YearMonth month;
};

/// km/h from a supplied distance and the segment's elapsed time.
inline double speed_kmh(double dist_m, double dt_s) { return dist_m * 3.6 / dt_s; }

inline double segment_speed(const TravelSegment& seg, double dist_m) { return speed_kmh(dist_m, seg.dt_s); }

/// Builds a segment and its derived fields. Used by pairing and by the
/// intermediate-file readers so both paths compute identical values.
inline TravelSegment make_segment(std::string vehicle, std::string line, const SegmentEnd& start,
                                  const SegmentEnd& end, UtcOffset local) {
    TravelSegment s;
    s.vehicle_id = std::move(vehicle);
    s.line_id = std::move(line);
    s.start = start;
    s.end = end;
    s.dt_s = seconds_between(start.time, end.time);
    s.euclid_m = haversine_distance(start.position, end.position);
    s.day = local_day(start.time, local);
    s.start_hour = local_hour(start.time, local);
    s.weekday = weekday_index(s.day);
    s.month = year_month_of(s.day);
    return s;
}

struct PairingStats {
    std::int64_t pairs_considered = 0;
    std::int64_t segments = 0;
    std::int64_t gap_skipped = 0;      ///< dt >= max_gap
    std::int64_t zero_dt_skipped = 0;  ///< duplicate timestamps
    std::int64_t speed_rejected = 0;   ///< straight-line speed > max_speed
    std::int64_t line_changes = 0;     ///< emitted segments whose end record has another line id

    PairingStats& operator+=(const PairingStats& o) {
        pairs_considered += o.pairs_considered;
        segments += o.segments;
        gap_skipped += o.gap_skipped;
        zero_dt_skipped += o.zero_dt_skipped;
        speed_rejected += o.speed_rejected;
        line_changes += o.line_changes;
        return *this;
    }
};

struct PairingResult {
    std::vector<TravelSegment> segments;
    PairingStats stats;
};

/// Pairs consecutive records of one time-sorted, single-vehicle partition.
/// Throws std::invalid_argument when the partition is unsorted or mixes vehicles.
inline PairingResult build_segments(std::span<const CleanRecord> partition, const PairingConfig& cfg,
                                    UtcOffset local) {
    PairingResult result;
    for (std::size_t i = 1; i < partition.size(); ++i) {
        const auto& a = partition[i - 1];
        const auto& b = partition[i];
        if (b.vehicle_id != a.vehicle_id) {
            throw std::invalid_argument("build_segments: partition mixes vehicles " + a.vehicle_id + " and " +
                                        b.vehicle_id);
        }
        if (record_time_less(b, a)) {
            throw std::invalid_argument("build_segments: partition for " + a.vehicle_id + " is not time-sorted");
        }
        ++result.stats.pairs_considered;
        const double dt = seconds_between(a.timestamp, b.timestamp);
        if (dt <= 0.0) {
            ++result.stats.zero_dt_skipped;
            continue;
        }
        if (dt >= cfg.max_gap_s) {
            ++result.stats.gap_skipped;
            continue;
        }
        auto seg = make_segment(a.vehicle_id, a.line_id, SegmentEnd{a.position, a.timestamp, a.source_row},
                                SegmentEnd{b.position, b.timestamp, b.source_row}, local);
        if (segment_speed(seg, seg.euclid_m) > cfg.max_speed_kmh) {
            ++result.stats.speed_rejected;
            continue;
        }
        if (b.line_id != a.line_id) {
            ++result.stats.line_changes;
        }
        result.segments.push_back(std::move(seg));
    }
    result.stats.segments = static_cast<std::int64_t>(result.segments.size());
    return result;
}

/// Pairs every partition; output is ordered by (vehicle, start time)
/// regardless of the worker count.
inline PairingResult build_all_segments(const Partitions& parts, const PairingConfig& cfg, UtcOffset local,
                                        unsigned workers = 1) {
    std::vector<const std::vector<CleanRecord>*> lists;
    lists.reserve(parts.size());
    for (const auto& [key, list] : parts) {
        lists.push_back(&list);
    }
    std::vector<PairingResult> per(lists.size());
    parallel_for(lists.size(), workers, [&](std::size_t i) { per[i] = build_segments(*lists[i], cfg, local); });
    PairingResult all;
    std::size_t total = 0;
    for (const auto& p : per) {
        total += p.segments.size();
    }
    all.segments.reserve(total);
    for (auto& p : per) {
        all.stats += p.stats;
        std::move(p.segments.begin(), p.segments.end(), std::back_inserter(all.segments));
    }
    return all;
}

}  // namespace busghg
