#include "geostory/geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "geostory/error.hpp"
#include "geostory/simd/kernels.hpp"

namespace geostory {

bool is_valid(const GeoPoint& p) noexcept {
  return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180.0 && p.lon <= 180.0 &&
         p.lat >= -90.0 && p.lat <= 90.0;
}

void require_valid(const GeoPoint& p) {
  if (!is_valid(p)) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("coordinate out of WGS84 range: ({}, {})", p.lon, p.lat));
  }
}

bool BoundingBox::is_valid() const noexcept {
  return geostory::is_valid({min_lon, min_lat}) && geostory::is_valid({max_lon, max_lat}) &&
         min_lon <= max_lon && min_lat <= max_lat;
}

double central_angle_to_meters(double haversine_term) noexcept {
  const double a = std::clamp(haversine_term, 0.0, 1.0);
  return 2.0 * kEarthRadiusM * std::asin(std::sqrt(a));
}

double haversine_distance(const GeoPoint& a, const GeoPoint& b) noexcept {
  return central_angle_to_meters(simd::ref::haversine_term(a, b));
}

double point_to_polyline_distance(const GeoPoint& p, std::span<const GeoPoint> line) {
  if (line.empty()) {
    throw Error(ErrorKind::InvalidArgument, "invalid trajectory: polyline has no points");
  }
  if (line.size() == 1) return haversine_distance(p, line.front());
  const auto& k = simd::active_kernels();
  double term = k.min_segment_term(p, line.data(), line.size()).term;
  // The planar projection can miss a vertex by a few ulps; vertices bound the result.
  std::vector<double> vertex_terms(line.size());
  k.haversine_terms(p, line.data(), line.size(), vertex_terms.data());
  term = std::min(term, *std::min_element(vertex_terms.begin(), vertex_terms.end()));
  return central_angle_to_meters(term);
}

double path_length(std::span<const GeoPoint> line) noexcept {
  if (line.size() < 2) return 0.0;
  std::vector<double> terms(line.size() - 1);
  simd::active_kernels().consecutive_terms(line.data(), line.size(), terms.data());
  double total = 0.0;
  for (double t : terms) total += central_angle_to_meters(t);
  return total;
}

void distances_from(const GeoPoint& origin, std::span<const GeoPoint> points,
                    std::span<double> out) {
  if (out.size() != points.size()) {
    throw Error(ErrorKind::InvalidArgument, "distances_from: output size mismatch");
  }
  if (points.empty()) return;
  simd::active_kernels().haversine_terms(origin, points.data(), points.size(), out.data());
  for (double& d : out) d = central_angle_to_meters(d);
}

BoundingBox bbox_of(std::span<const GeoPoint> points) {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "bbox_of: empty point list");
  BoundingBox box{points[0].lon, points[0].lat, points[0].lon, points[0].lat};
  for (const auto& p : points.subspan(1)) {
    box.min_lon = std::min(box.min_lon, p.lon);
    box.min_lat = std::min(box.min_lat, p.lat);
    box.max_lon = std::max(box.max_lon, p.lon);
    box.max_lat = std::max(box.max_lat, p.lat);
  }
  return box;
}

LocalScale local_scale(double lat_deg) noexcept {
  constexpr double m_per_deg = kEarthRadiusM * std::numbers::pi / 180.0;
  return {m_per_deg * std::cos(lat_deg * std::numbers::pi / 180.0), m_per_deg};
}

}  // namespace geostory
