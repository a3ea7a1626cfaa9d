#include <algorithm>
#include <cmath>
#include <numbers>

#include "geostory/simd/kernels.hpp"

namespace geostory::simd {
namespace ref {

namespace {
constexpr double kRad = std::numbers::pi / 180.0;
}

double haversine_term(const GeoPoint& a, const GeoPoint& b) noexcept {
  const double s_lat = std::sin((b.lat - a.lat) * kRad * 0.5);
  const double s_lon = std::sin((b.lon - a.lon) * kRad * 0.5);
  const double c = std::cos(a.lat * kRad) * std::cos(b.lat * kRad);
  return s_lat * s_lat + c * (s_lon * s_lon);
}

GeoPoint project_on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) noexcept {
  // Planar frame centered on the segment: x scaled by cos(mid latitude). The
  // common meters-per-degree factor cancels out of the projection parameter.
  const double kx = std::cos((a.lat + b.lat) * 0.5 * kRad);
  const double dx = (b.lon - a.lon) * kx;
  const double dy = b.lat - a.lat;
  const double px = (p.lon - a.lon) * kx;
  const double py = p.lat - a.lat;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp((px * dx + py * dy) / len2, 0.0, 1.0);
  if (t == 1.0) return b;
  return {a.lon + t * (b.lon - a.lon), a.lat + t * (b.lat - a.lat)};
}

std::int32_t bin_point(const GridFrame& f, const GeoPoint& p) noexcept {
  if (!f.bbox.contains(p)) return -1;
  const double col = std::min(std::floor((p.lon - f.bbox.min_lon) * f.lon_cells_per_deg),
                              static_cast<double>(f.cols - 1));
  const double row = std::min(std::floor((p.lat - f.bbox.min_lat) * f.lat_cells_per_deg),
                              static_cast<double>(f.rows - 1));
  return static_cast<std::int32_t>(row * f.cols + col);
}

}  // namespace ref

namespace {

void haversine_terms(GeoPoint origin, const GeoPoint* pts, std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = ref::haversine_term(origin, pts[i]);
}

void consecutive_terms(const GeoPoint* line, std::size_t n, double* out) {
  for (std::size_t i = 0; i + 1 < n; ++i) out[i] = ref::haversine_term(line[i], line[i + 1]);
}

SegmentHit min_segment_term(GeoPoint p, const GeoPoint* line, std::size_t n) {
  SegmentHit best{INFINITY, 0};
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double term = ref::haversine_term(p, ref::project_on_segment(p, line[i], line[i + 1]));
    if (term < best.term) best = {term, i};
  }
  return best;
}

void bin_points(const GridFrame& frame, const GeoPoint* pts, std::size_t n, std::int32_t* cells) {
  for (std::size_t i = 0; i < n; ++i) cells[i] = ref::bin_point(frame, pts[i]);
}

constexpr Kernels kScalar{Isa::Scalar, haversine_terms, consecutive_terms, min_segment_term,
                          bin_points};

}  // namespace

const Kernels& scalar_kernels() noexcept { return kScalar; }

}  // namespace geostory::simd
