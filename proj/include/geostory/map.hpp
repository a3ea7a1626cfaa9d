#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "geostory/gazetteer.hpp"
#include "geostory/geo.hpp"
#include "geostory/trajectory.hpp"

namespace geostory {

inline constexpr double kDefaultClusterDistanceM = 150.0;

// Numbered marker; co-located POIs share one marker carrying all numbers.
struct Marker {
  GeoPoint center;
  std::vector<std::size_t> numbers;  // ascending
};

struct PathFeature {
  std::string id;
  std::vector<GeoPoint> points;
};

using MapFeature = std::variant<Marker, PathFeature>;

struct LegendEntry {
  std::size_t number = 0;
  std::string name;
};

// Legend numbers run 1..N in story order; each appears on exactly one marker.
struct MapDocument {
  std::vector<MapFeature> features;  // markers (by lowest number), then the path
  std::vector<LegendEntry> legend;
  BoundingBox bbox;

  std::vector<const Marker*> markers() const;
};

// POIs closer than cluster_distance_m are merged by single linkage; each
// cluster becomes one marker at its centroid. The bbox covers every feature
// plus 10% padding on each side. Throws Error(InvalidArgument) when there is
// nothing to draw.
MapDocument emit_map(std::span<const POI> pois, const Trajectory* trajectory,
                     double cluster_distance_m = kDefaultClusterDistanceM);

// RFC 7946 FeatureCollection with deterministic key order. The legend rides
// along as a foreign member.
std::string render_geojson(const MapDocument& doc);

// Static page drawing the document over OpenStreetMap tiles (Leaflet).
std::string render_html(const MapDocument& doc, const std::string& title);

}  // namespace geostory
