#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "geostory/geo.hpp"

namespace geostory {

// Input table layouts.
//   kaggle_porto: the ECML/PKDD 15 taxi export. Header row required; only
//                 TRIP_ID, TIMESTAMP, POLYLINE (and MISSING_DATA if present)
//                 are consumed. POLYLINE is a JSON list of [lon, lat] pairs.
//   point_list:   one "lon,lat" pair per line, optional header. The whole
//                 file is a single trajectory (a single source record).
enum class Schema { KagglePorto, PointList };

Schema parse_schema(std::string_view tag);
std::string_view to_string(Schema schema);

struct Trajectory {
  std::string id;
  std::optional<std::int64_t> start_time;  // unix seconds
  std::vector<GeoPoint> points;            // source order
  std::optional<double> sample_interval_s;
};

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::string source_path;
  std::size_t skipped_rows = 0;

  std::size_t total_rows() const noexcept { return trajectories.size() + skipped_rows; }
};

// Every trajectory in the result has >= 2 valid points. Bad rows (missing or
// malformed polyline, fewer than two points, MISSING_DATA=True, coordinates
// outside WGS84) are counted in skipped_rows.
Dataset parse_dataset(std::istream& in, Schema schema, std::string source_path = "<stream>");

// Throws Error(Io) naming the path when the file cannot be opened.
Dataset load_dataset(const std::filesystem::path& path, Schema schema);

// Last point of each trajectory, dataset order.
std::vector<GeoPoint> trip_endpoints(const Dataset& ds);

struct LongestByPoints {
  friend bool operator==(const LongestByPoints&, const LongestByPoints&) = default;
};
struct LongestByLength {
  friend bool operator==(const LongestByLength&, const LongestByLength&) = default;
};
struct ById {
  std::string id;
  friend bool operator==(const ById&, const ById&) = default;
};
using SelectionCriterion = std::variant<LongestByPoints, LongestByLength, ById>;

// "longest_by_points" | "longest_by_length" | "id:<trip id>"
SelectionCriterion parse_selection(std::string_view text);
std::string to_string(const SelectionCriterion& criterion);

// Ties go to the lexicographically lowest id. Throws Error(InvalidArgument) on
// an empty dataset and Error(NotFound) for an unknown id.
const Trajectory& select_trajectory(const Dataset& ds, const SelectionCriterion& criterion);

// point_list export with a "lon,lat" header; coordinates round-trip exactly.
void write_point_list(std::ostream& out, const Trajectory& trajectory);

// Plain-text digest handed to story generation in single-trajectory mode.
std::string trajectory_digest(const Trajectory& trajectory);

// About `target` evenly spaced points (every k-th), always including the last.
std::vector<GeoPoint> sample_points(const Trajectory& trajectory, std::size_t target);

}  // namespace geostory
