#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gravmatch {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kSecondsPerHour = 3600.0;

/// A position or displacement in degree space. `lon` is the x axis.
struct LonLat {
    double lon = 0.0;
    double lat = 0.0;

    friend constexpr LonLat operator+(LonLat a, LonLat b) { return {a.lon + b.lon, a.lat + b.lat}; }
    friend constexpr LonLat operator-(LonLat a, LonLat b) { return {a.lon - b.lon, a.lat - b.lat}; }
    friend constexpr LonLat operator*(double s, LonLat a) { return {s * a.lon, s * a.lat}; }
    friend constexpr bool operator==(LonLat, LonLat) = default;
};

/// Velocity in degrees per hour along each axis.
struct Velocity {
    double lon = 0.0;
    double lat = 0.0;

    friend constexpr Velocity operator+(Velocity a, Velocity b) { return {a.lon + b.lon, a.lat + b.lat}; }
    friend constexpr bool operator==(Velocity, Velocity) = default;
};

/// Degree-space displacement covered in `dt_s` seconds.
constexpr LonLat displacement(Velocity v, double dt_s) {
    const double hours = dt_s / kSecondsPerHour;
    return {v.lon * hours, v.lat * hours};
}

inline double norm(LonLat d) { return std::hypot(d.lon, d.lat); }

inline double distance_deg(LonLat a, LonLat b) { return norm(a - b); }

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
inline double haversine_km(LonLat a, LonLat b) {
    constexpr double rad = std::numbers::pi / 180.0;
    const double dlat = (b.lat - a.lat) * rad;
    const double dlon = (b.lon - a.lon) * rad;
    const double s = std::sin(dlat / 2.0);
    const double c = std::sin(dlon / 2.0);
    const double h = s * s + std::cos(a.lat * rad) * std::cos(b.lat * rad) * c * c;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

}  // namespace gravmatch
