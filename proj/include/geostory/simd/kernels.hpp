#pragma once

// Data-parallel inner loops behind geo_core and heat_analytics.
//
// Every kernel has a scalar reference implementation and, on x86-64, an AVX2
// variant. The active table is chosen once at runtime from CPUID and can be
// forced with GEOSTORY_SIMD=scalar|avx2. The tests check each variant against
// the scalar reference.
//
// Points are read in place from arrays of GeoPoint ({lon, lat} doubles).

#include <cstddef>
#include <cstdint>
#include <string_view>

#include "geostory/geo.hpp"

namespace geostory::simd {

static_assert(sizeof(GeoPoint) == 2 * sizeof(double), "GeoPoint must be two packed doubles");

enum class Isa { Scalar, Avx2 };

std::string_view to_string(Isa isa);

// Equirectangular cell lattice over a bounding box. Cell (row, col) with row
// counted north from min_lat and col east from min_lon; index = row*cols+col.
struct GridFrame {
  BoundingBox bbox;
  double lon_cells_per_deg = 0.0;
  double lat_cells_per_deg = 0.0;
  std::int32_t rows = 0;
  std::int32_t cols = 0;
};

struct SegmentHit {
  double term = 0.0;         // haversine term to the projected point
  std::size_t segment = 0;   // index of the first vertex of the segment
};

struct Kernels {
  Isa isa;

  // out[i] = haversine term between origin and pts[i].
  void (*haversine_terms)(GeoPoint origin, const GeoPoint* pts, std::size_t n, double* out);

  // out[i] = haversine term between line[i] and line[i+1]; n-1 outputs, n >= 2.
  void (*consecutive_terms)(const GeoPoint* line, std::size_t n, double* out);

  // Smallest haversine term from p to its projection on any segment; n >= 2.
  // Ties resolve to the lowest segment index.
  SegmentHit (*min_segment_term)(GeoPoint p, const GeoPoint* line, std::size_t n);

  // cells[i] = cell index of pts[i], or -1 when outside frame.bbox.
  void (*bin_points)(const GridFrame& frame, const GeoPoint* pts, std::size_t n,
                     std::int32_t* cells);
};

const Kernels& scalar_kernels() noexcept;

// nullptr when the variant was not compiled in.
const Kernels* avx2_kernels() noexcept;

bool cpu_supports(Isa isa) noexcept;

// Throws Error(Configuration) when the ISA is unavailable on this build or CPU.
const Kernels& kernels_for(Isa isa);

// Best table for this CPU, honoring GEOSTORY_SIMD. Resolved once.
const Kernels& active_kernels();

// Reference building blocks shared by the variants' tail loops.
namespace ref {
double haversine_term(const GeoPoint& a, const GeoPoint& b) noexcept;
GeoPoint project_on_segment(const GeoPoint& p, const GeoPoint& a, const GeoPoint& b) noexcept;
std::int32_t bin_point(const GridFrame& frame, const GeoPoint& p) noexcept;
}  // namespace ref

}  // namespace geostory::simd
