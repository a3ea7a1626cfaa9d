#include "geostory/heat.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include <fmt/format.h>

#include "geostory/error.hpp"

namespace geostory {

simd::GridFrame HeatGrid::frame() const {
  const auto scale = local_scale(bbox.center().lat);
  return {bbox, scale.m_per_deg_lon / cell_size_m, scale.m_per_deg_lat / cell_size_m, rows, cols};
}

GeoPoint HeatGrid::cell_center(std::int32_t row, std::int32_t col) const {
  const auto f = frame();
  return {bbox.min_lon + (col + 0.5) / f.lon_cells_per_deg,
          bbox.min_lat + (row + 0.5) / f.lat_cells_per_deg};
}

HeatGrid make_empty_grid(const BoundingBox& bbox, double cell_size_m) {
  if (!(cell_size_m > 0.0) || !std::isfinite(cell_size_m)) {
    throw Error(ErrorKind::InvalidArgument, "cell size must be a positive number of meters");
  }
  if (!bbox.is_valid()) throw Error(ErrorKind::InvalidArgument, "grid bbox is not a valid WGS84 box");

  HeatGrid grid;
  grid.bbox = bbox;
  grid.cell_size_m = cell_size_m;
  const auto f = grid.frame();
  const double cols = std::ceil((bbox.max_lon - bbox.min_lon) * f.lon_cells_per_deg);
  const double rows = std::ceil((bbox.max_lat - bbox.min_lat) * f.lat_cells_per_deg);
  if (cols * rows > 64e6) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("grid of {} x {} cells is too large; raise the cell size", rows, cols));
  }
  grid.cols = std::max<std::int32_t>(1, static_cast<std::int32_t>(cols));
  grid.rows = std::max<std::int32_t>(1, static_cast<std::int32_t>(rows));
  grid.counts.assign(static_cast<std::size_t>(grid.rows) * static_cast<std::size_t>(grid.cols), 0);
  return grid;
}

namespace {

struct PartialCounts {
  std::vector<std::uint64_t> counts;
  std::uint64_t outside = 0;
};

void count_chunk(const simd::GridFrame& frame, std::span<const GeoPoint> points,
                 PartialCounts& acc) {
  constexpr std::size_t kBlock = 4096;
  std::vector<std::int32_t> cells(std::min(kBlock, points.size()));
  const auto& kernels = simd::active_kernels();
  for (std::size_t start = 0; start < points.size(); start += kBlock) {
    const std::size_t n = std::min(kBlock, points.size() - start);
    kernels.bin_points(frame, points.data() + start, n, cells.data());
    for (std::size_t i = 0; i < n; ++i) {
      if (cells[i] < 0) {
        ++acc.outside;
      } else {
        ++acc.counts[static_cast<std::size_t>(cells[i])];
      }
    }
  }
}

}  // namespace

HeatGrid build_grid(std::span<const GeoPoint> points, double cell_size_m,
                    std::optional<BoundingBox> bbox, unsigned threads) {
  if (!bbox) {
    if (points.empty()) {
      throw Error(ErrorKind::InvalidArgument, "build_grid: no points and no bbox given");
    }
    bbox = bbox_of(points);
  }
  HeatGrid grid = make_empty_grid(*bbox, cell_size_m);
  const auto frame = grid.frame();

  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(points.size() / 4096 + 1)));
  std::vector<PartialCounts> partials(threads);
  for (auto& p : partials) p.counts.assign(grid.counts.size(), 0);

  if (threads == 1) {
    count_chunk(frame, points, partials[0]);
  } else {
    const std::size_t chunk = (points.size() + threads - 1) / threads;
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = std::min(points.size(), t * chunk);
      const std::size_t end = std::min(points.size(), begin + chunk);
      workers.emplace_back([&, t, begin, end] {
        count_chunk(frame, points.subspan(begin, end - begin), partials[t]);
      });
    }
  }

  for (const auto& p : partials) {
    for (std::size_t i = 0; i < grid.counts.size(); ++i) grid.counts[i] += p.counts[i];
    grid.outside_bbox += p.outside;
  }
  grid.total_in_bbox = points.size() - grid.outside_bbox;
  return grid;
}

std::vector<Hotspot> top_hotspots(const HeatGrid& grid, std::size_t k) {
  std::vector<std::size_t> nonzero;
  for (std::size_t i = 0; i < grid.counts.size(); ++i) {
    if (grid.counts[i] > 0) nonzero.push_back(i);
  }
  // Row-major index order equals (row, col) lexicographic order.
  const auto by_count = [&](std::size_t a, std::size_t b) {
    if (grid.counts[a] != grid.counts[b]) return grid.counts[a] > grid.counts[b];
    return a < b;
  };
  const std::size_t take = std::min(k, nonzero.size());
  std::partial_sort(nonzero.begin(), nonzero.begin() + static_cast<std::ptrdiff_t>(take),
                    nonzero.end(), by_count);

  std::vector<Hotspot> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    const std::size_t idx = nonzero[r];
    const auto row = static_cast<std::int32_t>(idx / static_cast<std::size_t>(grid.cols));
    const auto col = static_cast<std::int32_t>(idx % static_cast<std::size_t>(grid.cols));
    out.push_back({row, col, grid.cell_center(row, col), grid.counts[idx], r + 1});
  }
  return out;
}

std::string summarize_for_story(const HeatGrid& grid, std::span<const Hotspot> hotspots) {
  std::string out;
  auto it = std::back_inserter(out);
  const auto& b = grid.bbox;
  fmt::format_to(it, "bbox: lon [{:.4f}, {:.4f}] lat [{:.4f}, {:.4f}]\n", b.min_lon, b.max_lon,
                 b.min_lat, b.max_lat);
  fmt::format_to(it, "grid: {} rows x {} cols of {:.0f} m cells\n", grid.rows, grid.cols,
                 grid.cell_size_m);
  fmt::format_to(it, "trip endpoints in bbox: {}\n", grid.total_in_bbox);
  fmt::format_to(it, "trip endpoints outside bbox: {}\n", grid.outside_bbox);
  fmt::format_to(it, "hotspots: {}\n", hotspots.size());
  for (const auto& h : hotspots) {
    const double share =
        grid.total_in_bbox == 0 ? 0.0 : 100.0 * static_cast<double>(h.count) / static_cast<double>(grid.total_in_bbox);
    fmt::format_to(it, "{}. center ({:.4f}, {:.4f}) endpoints {} share {:.1f}%\n", h.rank,
                   h.center.lon, h.center.lat, h.count, share);
  }
  return out;
}

void write_grid_csv(std::ostream& out, const HeatGrid& grid) {
  const auto& b = grid.bbox;
  out << fmt::format("# bbox,{},{},{},{}\n", b.min_lon, b.min_lat, b.max_lon, b.max_lat);
  out << fmt::format("# cell_size_m,{}\n", grid.cell_size_m);
  out << fmt::format("# rows,{}\n# cols,{}\n", grid.rows, grid.cols);
  out << "# first data row is the northernmost\n";
  for (std::int32_t row = grid.rows - 1; row >= 0; --row) {
    for (std::int32_t col = 0; col < grid.cols; ++col) {
      if (col > 0) out << ',';
      out << grid.at(row, col);
    }
    out << '\n';
  }
}

}  // namespace geostory
