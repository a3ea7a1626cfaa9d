#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geostory/geo.hpp"
#include "geostory/simd/kernels.hpp"

namespace geostory {

inline constexpr double kDefaultCellSizeM = 250.0;

// Endpoint counts on an equirectangular lattice of cell_size_m squares. The
// meters-per-degree scale is taken at the bbox center latitude. Row 0 is the
// southernmost row, column 0 the westernmost. A point on a cell's east/north
// edge belongs to the next cell, except on the bbox maximum, which closes the
// last cell.
struct HeatGrid {
  BoundingBox bbox;
  double cell_size_m = kDefaultCellSizeM;
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::vector<std::uint64_t> counts;  // row-major, rows * cols
  std::uint64_t total_in_bbox = 0;
  std::uint64_t outside_bbox = 0;

  std::uint64_t at(std::int32_t row, std::int32_t col) const {
    return counts[static_cast<std::size_t>(row) * static_cast<std::size_t>(cols) +
                  static_cast<std::size_t>(col)];
  }
  GeoPoint cell_center(std::int32_t row, std::int32_t col) const;
  simd::GridFrame frame() const;
};

struct Hotspot {
  std::int32_t cell_row = 0;
  std::int32_t cell_col = 0;
  GeoPoint center;
  std::uint64_t count = 0;
  std::size_t rank = 0;  // 1-based

  friend bool operator==(const Hotspot&, const Hotspot&) = default;
};

// Builds the lattice for a bbox without counting anything.
HeatGrid make_empty_grid(const BoundingBox& bbox, double cell_size_m);

// When bbox is omitted the tight bbox of the points is used. threads > 1
// splits the input into chunks counted independently and then merged; the
// result is identical to the sequential build.
HeatGrid build_grid(std::span<const GeoPoint> points, double cell_size_m,
                    std::optional<BoundingBox> bbox = std::nullopt, unsigned threads = 1);

// k highest-count non-empty cells, count descending, ties by (row, col).
std::vector<Hotspot> top_hotspots(const HeatGrid& grid, std::size_t k);

// Deterministic plain-text digest of the grid and its hotspots.
std::string summarize_for_story(const HeatGrid& grid, std::span<const Hotspot> hotspots);

// CSV matrix (northernmost row first) preceded by '#' sidecar header lines
// carrying bbox, cell size, and dimensions.
void write_grid_csv(std::ostream& out, const HeatGrid& grid);

}  // namespace geostory
