#include "geostory/trajectory.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "detail/text.hpp"
#include "geostory/error.hpp"

namespace geostory {

namespace {

constexpr double kPortoSampleIntervalS = 15.0;

// Parses "[[lon,lat],...]". Returns nullopt for anything malformed or with an
// out-of-range coordinate.
std::optional<std::vector<GeoPoint>> parse_polyline(std::string_view text) {
  auto doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) return std::nullopt;
  std::vector<GeoPoint> points;
  points.reserve(doc.size());
  for (const auto& pair : doc) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() || !pair[1].is_number()) {
      return std::nullopt;
    }
    GeoPoint p{pair[0].get<double>(), pair[1].get<double>()};
    if (!is_valid(p)) return std::nullopt;
    points.push_back(p);
  }
  return points;
}

bool flag_is_true(std::string_view value) {
  const auto v = detail::ascii_lower(detail::trim(value));
  return v == "true" || v == "1" || v == "t" || v == "yes";
}

Dataset parse_kaggle(std::istream& in, std::string source_path) {
  Dataset ds;
  ds.source_path = std::move(source_path);

  std::vector<std::string> fields;
  std::size_t line = 0;
  do {
    if (!detail::read_csv_record(in, fields, line)) {
      throw ParseError("kaggle_porto: missing header row", 0);
    }
  } while (detail::is_blank_record(fields));

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    column.emplace(std::string(detail::trim(fields[i])), i);
  }
  for (const char* required : {"TRIP_ID", "TIMESTAMP", "POLYLINE"}) {
    if (!column.contains(required)) {
      throw ParseError(fmt::format("kaggle_porto header is missing column {}", required), 0);
    }
  }
  const std::size_t id_col = column.at("TRIP_ID");
  const std::size_t ts_col = column.at("TIMESTAMP");
  const std::size_t poly_col = column.at("POLYLINE");
  const auto missing_it = column.find("MISSING_DATA");
  const std::size_t header_width = fields.size();

  while (detail::read_csv_record(in, fields, line)) {
    if (detail::is_blank_record(fields)) continue;
    if (fields.size() != header_width) {
      ++ds.skipped_rows;
      continue;
    }
    if (missing_it != column.end() && flag_is_true(fields[missing_it->second])) {
      ++ds.skipped_rows;
      continue;
    }
    auto points = parse_polyline(fields[poly_col]);
    if (!points || points->size() < 2) {
      ++ds.skipped_rows;
      continue;
    }
    Trajectory t;
    t.id = std::string(detail::trim(fields[id_col]));
    t.start_time = detail::parse_int<std::int64_t>(fields[ts_col]);
    t.points = std::move(*points);
    t.sample_interval_s = kPortoSampleIntervalS;
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

Dataset parse_point_list(std::istream& in, std::string source_path) {
  Dataset ds;
  ds.source_path = std::move(source_path);

  Trajectory t;
  const auto stem = std::filesystem::path(ds.source_path).stem().string();
  t.id = (stem.empty() || stem.front() == '<') ? "trajectory" : stem;

  std::size_t lon_col = 0;
  std::size_t lat_col = 1;
  bool first = true;
  bool out_of_range = false;
  std::vector<std::string> fields;
  std::size_t line = 0;
  while (detail::read_csv_record(in, fields, line)) {
    const std::size_t line_no = line;
    if (detail::is_blank_record(fields)) continue;
    if (fields.size() < 2) {
      throw ParseError(fmt::format("point_list line {}: expected lon,lat", line_no), line_no);
    }
    if (first) {
      first = false;
      if (!detail::parse_double(fields[0]) || !detail::parse_double(fields[1])) {
        // Header row; honor named columns so "lat,lon" files still work.
        for (std::size_t i = 0; i < fields.size(); ++i) {
          const auto name = detail::ascii_lower(detail::trim(fields[i]));
          if (name == "lon" || name == "lng" || name == "long" || name == "longitude") lon_col = i;
          if (name == "lat" || name == "latitude") lat_col = i;
        }
        continue;
      }
    }
    if (std::max(lon_col, lat_col) >= fields.size()) {
      throw ParseError(fmt::format("point_list line {}: missing coordinate column", line_no), line_no);
    }
    const auto lon = detail::parse_double(fields[lon_col]);
    const auto lat = detail::parse_double(fields[lat_col]);
    if (!lon || !lat) {
      throw ParseError(fmt::format("point_list line {}: non-numeric coordinate", line_no), line_no);
    }
    GeoPoint p{*lon, *lat};
    if (!is_valid(p)) out_of_range = true;
    t.points.push_back(p);
  }

  if (out_of_range || t.points.size() < 2) {
    ds.skipped_rows = 1;
  } else {
    ds.trajectories.push_back(std::move(t));
  }
  return ds;
}

}  // namespace

Schema parse_schema(std::string_view tag) {
  if (tag == "kaggle_porto") return Schema::KagglePorto;
  if (tag == "point_list") return Schema::PointList;
  throw Error(ErrorKind::Configuration,
              fmt::format("unknown dataset schema '{}' (expected kaggle_porto or point_list)", tag));
}

std::string_view to_string(Schema schema) {
  return schema == Schema::KagglePorto ? "kaggle_porto" : "point_list";
}

Dataset parse_dataset(std::istream& in, Schema schema, std::string source_path) {
  if (!in.good()) {
    throw Error(ErrorKind::Io, fmt::format("cannot read dataset stream {}", source_path));
  }
  Dataset ds = schema == Schema::KagglePorto ? parse_kaggle(in, std::move(source_path))
                                             : parse_point_list(in, std::move(source_path));
  if (in.bad()) {
    throw Error(ErrorKind::Io, fmt::format("read error in dataset {}", ds.source_path));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, Schema schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open dataset '{}'", path.string()));
  return parse_dataset(in, schema, path.string());
}

std::vector<GeoPoint> trip_endpoints(const Dataset& ds) {
  std::vector<GeoPoint> out;
  out.reserve(ds.trajectories.size());
  for (const auto& t : ds.trajectories) {
    if (t.points.size() >= 2) out.push_back(t.points.back());
  }
  return out;
}

SelectionCriterion parse_selection(std::string_view text) {
  if (text == "longest_by_points") return LongestByPoints{};
  if (text == "longest_by_length") return LongestByLength{};
  if (text.starts_with("id:") && text.size() > 3) return ById{std::string(text.substr(3))};
  throw Error(ErrorKind::Configuration,
              fmt::format("unknown trajectory selection '{}' (expected longest_by_points, "
                          "longest_by_length or id:<trip id>)",
                          text));
}

std::string to_string(const SelectionCriterion& criterion) {
  struct Visitor {
    std::string operator()(const LongestByPoints&) const { return "longest_by_points"; }
    std::string operator()(const LongestByLength&) const { return "longest_by_length"; }
    std::string operator()(const ById& by) const { return "id:" + by.id; }
  };
  return std::visit(Visitor{}, criterion);
}

const Trajectory& select_trajectory(const Dataset& ds, const SelectionCriterion& criterion) {
  if (ds.trajectories.empty()) {
    throw Error(ErrorKind::InvalidArgument, "select_trajectory: dataset has no trajectories");
  }
  if (const auto* by = std::get_if<ById>(&criterion)) {
    for (const auto& t : ds.trajectories) {
      if (t.id == by->id) return t;
    }
    throw Error(ErrorKind::NotFound, fmt::format("no trajectory with id '{}'", by->id));
  }

  const bool by_length = std::holds_alternative<LongestByLength>(criterion);
  const Trajectory* best = nullptr;
  double best_key = -1.0;
  for (const auto& t : ds.trajectories) {
    const double key = by_length ? path_length(t.points) : static_cast<double>(t.points.size());
    if (key > best_key || (key == best_key && t.id < best->id)) {
      best = &t;
      best_key = key;
    }
  }
  return *best;
}

void write_point_list(std::ostream& out, const Trajectory& trajectory) {
  out << "lon,lat\n";
  for (const auto& p : trajectory.points) out << fmt::format("{},{}\n", p.lon, p.lat);
}

std::string trajectory_digest(const Trajectory& t) {
  std::string out;
  auto it = std::back_inserter(out);
  fmt::format_to(it, "trajectory: {}\n", t.id);
  fmt::format_to(it, "points: {}\n", t.points.size());
  if (t.start_time) {
    fmt::format_to(it, "start time: {:%Y-%m-%dT%H:%M:%SZ}\n", fmt::gmtime(static_cast<std::time_t>(*t.start_time)));
  }
  if (t.sample_interval_s && t.points.size() >= 2) {
    const auto seconds = static_cast<long long>(*t.sample_interval_s * static_cast<double>(t.points.size() - 1));
    fmt::format_to(it, "duration: {} s (one sample every {:.0f} s)\n", seconds, *t.sample_interval_s);
  }
  if (!t.points.empty()) {
    fmt::format_to(it, "origin: ({:.4f}, {:.4f})\n", t.points.front().lon, t.points.front().lat);
    fmt::format_to(it, "destination: ({:.4f}, {:.4f})\n", t.points.back().lon, t.points.back().lat);
    const auto box = bbox_of(t.points);
    fmt::format_to(it, "bbox: lon [{:.4f}, {:.4f}] lat [{:.4f}, {:.4f}]\n", box.min_lon,
                   box.max_lon, box.min_lat, box.max_lat);
  }
  fmt::format_to(it, "path length: {:.0f} m\n", path_length(t.points));
  return out;
}

std::vector<GeoPoint> sample_points(const Trajectory& trajectory, std::size_t target) {
  const auto& pts = trajectory.points;
  if (pts.empty() || target == 0) return {};
  const std::size_t step = std::max<std::size_t>(1, pts.size() / target);
  std::vector<GeoPoint> out;
  for (std::size_t i = 0; i < pts.size(); i += step) out.push_back(pts[i]);
  if (!(out.back() == pts.back())) out.push_back(pts.back());
  return out;
}

}  // namespace geostory
