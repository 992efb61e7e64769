#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "busghg/error.hpp"

namespace busghg {

inline constexpr double kEarthRadiusM = 6'371'000.0;

struct GeoPoint {
    double lat = 0.0;  ///< decimal degrees, [-90, 90]
    double lon = 0.0;  ///< decimal degrees, [-180, 180]

    friend constexpr bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline bool is_valid(const GeoPoint& p) {
    return p.lat >= -90.0 && p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

inline constexpr double deg2rad(double deg) { return deg * (std::numbers::pi / 180.0); }

/// Great-circle distance in meters on a sphere of radius 6,371,000 m.
inline double haversine_distance(const GeoPoint& a, const GeoPoint& b) {
    const double phi1 = deg2rad(a.lat);
    const double phi2 = deg2rad(b.lat);
    const double sdphi = std::sin((phi2 - phi1) * 0.5);
    const double sdlam = std::sin(deg2rad(b.lon - a.lon) * 0.5);
    const double h = sdphi * sdphi + std::cos(phi1) * std::cos(phi2) * sdlam * sdlam;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Meters per degree of latitude on the reference sphere.
inline constexpr double kMetersPerDegree = kEarthRadiusM * std::numbers::pi / 180.0;

struct BoundingBox {
    double min_lat = 0.0;
    double max_lat = 0.0;
    double min_lon = 0.0;
    double max_lon = 0.0;

    /// Throws ConfigError unless min < max on both axes and all values are in range.
    void validate() const {
        if (!(min_lat < max_lat) || !(min_lon < max_lon)) {
            throw ConfigError("bounding box: min must be strictly less than max on both axes");
        }
        if (min_lat < -90.0 || max_lat > 90.0 || min_lon < -180.0 || max_lon > 180.0) {
            throw ConfigError("bounding box: coordinates out of range");
        }
    }

    /// Inclusive on all edges.
    bool contains(const GeoPoint& p) const {
        return p.lat >= min_lat && p.lat <= max_lat && p.lon >= min_lon && p.lon <= max_lon;
    }
};

/// Bounding box of greater Rio de Janeiro, the default analysis area.
inline constexpr BoundingBox kRioBounds{-23.10, -22.70, -43.80, -43.10};

}  // namespace busghg
