#pragma once

// Fleet-wide sinuosity: the mean ratio between a shortest-path
// reconstruction of a sampled segment (real distance) and its straight-line
// length, later used as a multiplier on every segment's straight-line length.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "busghg/error.hpp"
#include "busghg/pairing.hpp"
#include "busghg/parallel.hpp"
#include "busghg/street_graph.hpp"

namespace busghg {

/// Uniform double in [0, 1) from the top 53 bits; portable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

enum class Disposition : std::uint8_t { used, zero_path, speed_rejected, unsnappable, unreachable };

inline constexpr std::array<std::string_view, 5> kDispositionNames{"used", "zero_path", "speed_rejected",
                                                                   "unsnappable", "unreachable"};

inline std::string_view disposition_name(Disposition d) { return kDispositionNames[static_cast<std::size_t>(d)]; }

struct SinuositySample {
    std::size_t segment_index = 0;
    std::optional<NodeId> origin_node;
    std::optional<NodeId> dest_node;
    double real_m = 0.0;    ///< RD
    double euclid_m = 0.0;  ///< ED
    double sinuosity = 0.0;
    Disposition disposition = Disposition::unsnappable;
};

struct HistogramSpec {
    double low = 1.0;
    double high = 3.0;
    double width = 0.05;

    std::size_t bins() const { return static_cast<std::size_t>(std::llround((high - low) / width)); }
    double edge(std::size_t i) const { return low + static_cast<double>(i) * width; }

    void validate() const {
        if (!(width > 0.0) || !(high > low) || bins() == 0) {
            throw ConfigError("sinuosity histogram: need width > 0 and high > low");
        }
    }
};

struct HistogramBin {
    double low = 0.0;
    double high = 0.0;  ///< +inf for the overflow bin
    std::size_t count = 0;
};

struct SinuosityEstimate {
    double mean_s = 1.0;
    std::size_t sample_size = 0;   ///< sampled segments, every disposition
    double fraction_sampled = 0.0; ///< sample_size / population
    std::vector<HistogramBin> histogram;
    std::array<std::size_t, 5> dispositions{};
    std::size_t clamped = 0;       ///< used samples below 1 that entered the mean as 1
    std::size_t below_tolerance = 0;  ///< used samples below 1 - epsilon

    std::size_t used() const { return dispositions[0]; }
};

/// Bernoulli sample of segment indices: each of `population` items is drawn
/// independently with probability `fraction`, in index order, from a
/// mt19937_64 seeded with `seed`.
inline std::vector<std::size_t> sample_segments(std::size_t population, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw ConfigError("sinuosity.fraction must be in (0, 1]");
    }
    std::vector<std::size_t> picked;
    picked.reserve(static_cast<std::size_t>(static_cast<double>(population) * fraction * 1.1) + 8);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < population; ++i) {
        if (unit_uniform(rng) < fraction) {
            picked.push_back(i);
        }
    }
    return picked;
}

inline std::vector<std::size_t> sample_segments(std::span<const TravelSegment> segments, double fraction,
                                                std::uint64_t seed) {
    return sample_segments(segments.size(), fraction, seed);
}

/// Reconstructs one segment over the street graph and classifies it.
inline SinuositySample reconstruct_one(const TravelSegment& seg, std::size_t index, const StreetGraph& graph,
                                       const PairingConfig& cfg, double snap_radius_m) {
    SinuositySample s;
    s.segment_index = index;
    s.euclid_m = seg.euclid_m;
    s.origin_node = graph.snap(seg.start.position, snap_radius_m);
    s.dest_node = graph.snap(seg.end.position, snap_radius_m);
    if (!s.origin_node || !s.dest_node) {
        s.disposition = Disposition::unsnappable;
        return s;
    }
    const auto path = graph.shortest_path(*s.origin_node, *s.dest_node);
    if (!path.reachable) {
        s.disposition = Disposition::unreachable;
        return s;
    }
    s.real_m = path.distance_m;
    if (segment_speed(seg, s.real_m) > cfg.max_speed_kmh) {
        s.disposition = Disposition::speed_rejected;
        return s;
    }
    if (s.real_m == 0.0) {
        // Both fixes snapped to the same corner: the straight line stands in.
        s.real_m = s.euclid_m;
        s.sinuosity = 1.0;
        s.disposition = Disposition::zero_path;
        return s;
    }
    s.sinuosity = s.euclid_m > 0.0 ? s.real_m / s.euclid_m : std::numeric_limits<double>::infinity();
    s.disposition = Disposition::used;
    return s;
}

/// Reconstructs every sampled segment; output order follows `sample`.
inline std::vector<SinuositySample> reconstruct_sample(std::span<const TravelSegment> segments,
                                                       std::span<const std::size_t> sample, const StreetGraph& graph,
                                                       const PairingConfig& cfg, double snap_radius_m = 100.0,
                                                       unsigned workers = 1) {
    std::vector<SinuositySample> out(sample.size());
    parallel_for(sample.size(), workers, [&](std::size_t i) {
        out[i] = reconstruct_one(segments[sample[i]], sample[i], graph, cfg, snap_radius_m);
    });
    return out;
}

/// Mean sinuosity over used samples. Values below 1 (snapping can shave a
/// little off the real distance) count as exactly 1. The mean is taken over
/// the sorted values so it does not depend on sample order.
/// Throws DataError when no sample is usable.
inline SinuosityEstimate estimate_sinuosity(std::span<const SinuositySample> samples, std::size_t population,
                                            const HistogramSpec& hist = {}, double epsilon = 0.05) {
    hist.validate();
    SinuosityEstimate est;
    est.sample_size = samples.size();
    est.fraction_sampled =
        population > 0 ? static_cast<double>(samples.size()) / static_cast<double>(population) : 0.0;
    std::vector<double> values;
    for (const auto& s : samples) {
        ++est.dispositions[static_cast<std::size_t>(s.disposition)];
        if (s.disposition != Disposition::used) {
            continue;
        }
        double v = s.sinuosity;
        if (v < 1.0) {
            ++est.clamped;
            if (v < 1.0 - epsilon) {
                ++est.below_tolerance;
            }
            v = 1.0;
        }
        values.push_back(v);
    }
    if (values.empty()) {
        throw DataError("no usable sinuosity samples (all samples were zero_path, speed_rejected, unsnappable or "
                        "unreachable)");
    }
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) {
        sum += v;
    }
    est.mean_s = sum / static_cast<double>(values.size());

    const std::size_t n = hist.bins();
    est.histogram.resize(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        est.histogram[i] = HistogramBin{hist.edge(i), hist.edge(i + 1), 0};
    }
    est.histogram[n] = HistogramBin{hist.edge(n), std::numeric_limits<double>::infinity(), 0};
    for (double v : values) {
        if (v >= hist.edge(n)) {
            ++est.histogram[n].count;
            continue;
        }
        auto i = static_cast<std::size_t>(std::max(0.0, std::floor((v - hist.low) / hist.width)));
        i = std::min(i, n - 1);
        while (i > 0 && v < hist.edge(i)) {
            --i;
        }
        while (i + 1 < n && v >= hist.edge(i + 1)) {
            ++i;
        }
        ++est.histogram[i].count;
    }
    return est;
}

/// Straight-line length below the near threshold is taken as real; above it
/// the straight line is scaled by the fleet sinuosity.
inline double corrected_distance(double euclid_m, double mean_s, const PairingConfig& cfg) {
    return euclid_m < cfg.near_threshold_m ? euclid_m : euclid_m * mean_s;
}

inline double corrected_distance(const TravelSegment& seg, double mean_s, const PairingConfig& cfg) {
    return corrected_distance(seg.euclid_m, mean_s, cfg);
}

inline double corrected_distance(const TravelSegment& seg, const SinuosityEstimate& est, const PairingConfig& cfg) {
    return corrected_distance(seg.euclid_m, est.mean_s, cfg);
}

}  // namespace busghg
