#pragma once

#include <span>
#include <vector>

namespace geostory {

// IUGG mean Earth radius.
inline constexpr double kEarthRadiusM = 6371008.8;

// WGS84 position. Coordinate order is (lon, lat) everywhere in this library,
// matching the taxi dataset's polyline encoding.
struct GeoPoint {
  double lon = 0.0;
  double lat = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(const GeoPoint& p) noexcept;

// Throws Error(InvalidArgument) when the point is outside the WGS84 range.
void require_valid(const GeoPoint& p);

struct BoundingBox {
  double min_lon = 0.0;
  double min_lat = 0.0;
  double max_lon = 0.0;
  double max_lat = 0.0;

  // Inclusive on all edges.
  bool contains(const GeoPoint& p) const noexcept {
    return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
  }
  GeoPoint center() const noexcept {
    return {(min_lon + max_lon) / 2.0, (min_lat + max_lat) / 2.0};
  }
  bool is_valid() const noexcept;

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

// Great-circle distance in meters on the mean-radius sphere.
double haversine_distance(const GeoPoint& a, const GeoPoint& b) noexcept;

// Distance from p to the closest point of the polyline. Each segment is
// projected in an equirectangular frame centered on the segment; the distance
// to the projected point is then measured on the sphere. At city scale
// (segments up to a few km, |lat| < 70) the frame error stays well below 0.1%.
// Throws Error(InvalidArgument) for an empty polyline.
double point_to_polyline_distance(const GeoPoint& p, std::span<const GeoPoint> line);

// Sum of consecutive haversine distances.
double path_length(std::span<const GeoPoint> line) noexcept;

// Distances from origin to every point, written to out (same length as points).
void distances_from(const GeoPoint& origin, std::span<const GeoPoint> points,
                    std::span<double> out);

// Tightest box around the points. Throws Error(InvalidArgument) when empty.
BoundingBox bbox_of(std::span<const GeoPoint> points);

// Local meters-per-degree scale of the equirectangular frame at a latitude.
struct LocalScale {
  double m_per_deg_lon;
  double m_per_deg_lat;
};
LocalScale local_scale(double lat_deg) noexcept;

// Haversine "a" term to distance in meters.
double central_angle_to_meters(double haversine_term) noexcept;

}  // namespace geostory
