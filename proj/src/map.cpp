#include "geostory/map.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "geostory/error.hpp"

namespace geostory {

using nlohmann::ordered_json;

std::vector<const Marker*> MapDocument::markers() const {
  std::vector<const Marker*> out;
  for (const auto& f : features) {
    if (const auto* m = std::get_if<Marker>(&f)) out.push_back(m);
  }
  return out;
}

namespace {

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

MapDocument emit_map(std::span<const POI> pois, const Trajectory* trajectory,
                     double cluster_distance_m) {
  if (pois.empty() && (trajectory == nullptr || trajectory->points.empty())) {
    throw Error(ErrorKind::InvalidArgument, "emit_map: no POIs and no trajectory to draw");
  }
  if (!(cluster_distance_m >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "emit_map: cluster distance must be >= 0");
  }

  MapDocument doc;
  std::vector<GeoPoint> locations;
  for (std::size_t i = 0; i < pois.size(); ++i) {
    require_valid(pois[i].location);
    locations.push_back(pois[i].location);
    doc.legend.push_back({i + 1, pois[i].name});
  }

  // Single linkage: union every pair within the distance.
  std::vector<std::size_t> parent(pois.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<double> row(pois.size());
  for (std::size_t i = 0; i < pois.size(); ++i) {
    distances_from(locations[i], locations, row);
    for (std::size_t j = i + 1; j < pois.size(); ++j) {
      if (row[j] <= cluster_distance_m) {
        const auto a = find_root(parent, i);
        const auto b = find_root(parent, j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }

  // Roots are the smallest member index, so iterating i in order yields
  // markers sorted by their lowest legend number.
  std::vector<std::ptrdiff_t> marker_of(pois.size(), -1);
  std::vector<Marker> markers;
  for (std::size_t i = 0; i < pois.size(); ++i) {
    const auto root = find_root(parent, i);
    if (marker_of[root] < 0) {
      marker_of[root] = static_cast<std::ptrdiff_t>(markers.size());
      markers.emplace_back();
    }
    markers[static_cast<std::size_t>(marker_of[root])].numbers.push_back(i + 1);
  }
  for (auto& m : markers) {
    double lon = 0.0;
    double lat = 0.0;
    for (auto n : m.numbers) {
      lon += locations[n - 1].lon;
      lat += locations[n - 1].lat;
    }
    m.center = {lon / static_cast<double>(m.numbers.size()), lat / static_cast<double>(m.numbers.size())};
  }

  std::vector<GeoPoint> extent = locations;
  for (auto& m : markers) doc.features.emplace_back(std::move(m));
  if (trajectory != nullptr && !trajectory->points.empty()) {
    doc.features.emplace_back(PathFeature{trajectory->id, trajectory->points});
    extent.insert(extent.end(), trajectory->points.begin(), trajectory->points.end());
  }

  auto box = bbox_of(extent);
  const double pad_lon = std::max((box.max_lon - box.min_lon) * 0.1, 1e-3);
  const double pad_lat = std::max((box.max_lat - box.min_lat) * 0.1, 1e-3);
  doc.bbox = {std::max(-180.0, box.min_lon - pad_lon), std::max(-90.0, box.min_lat - pad_lat),
              std::min(180.0, box.max_lon + pad_lon), std::min(90.0, box.max_lat + pad_lat)};
  return doc;
}

namespace {

std::string html_escape(const std::string& in) {
  std::string out;
  for (char c : in) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

ordered_json position(const GeoPoint& p) { return ordered_json::array({p.lon, p.lat}); }

ordered_json to_geojson(const MapDocument& doc) {
  ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["bbox"] = ordered_json::array({doc.bbox.min_lon, doc.bbox.min_lat, doc.bbox.max_lon, doc.bbox.max_lat});
  fc["features"] = ordered_json::array();
  for (const auto& feature : doc.features) {
    ordered_json f;
    f["type"] = "Feature";
    if (const auto* m = std::get_if<Marker>(&feature)) {
      f["geometry"] = {{"type", "Point"}, {"coordinates", position(m->center)}};
      std::string label;
      ordered_json names = ordered_json::array();
      for (auto n : m->numbers) {
        label += (label.empty() ? "" : ",") + std::to_string(n);
        names.push_back(doc.legend[n - 1].name);
      }
      f["properties"] = {{"kind", "marker"}, {"numbers", m->numbers}, {"label", label}, {"names", names}};
    } else {
      const auto& path = std::get<PathFeature>(feature);
      ordered_json coords = ordered_json::array();
      for (const auto& p : path.points) coords.push_back(position(p));
      f["geometry"] = {{"type", "LineString"}, {"coordinates", coords}};
      f["properties"] = {{"kind", "path"}, {"id", path.id}};
    }
    fc["features"].push_back(std::move(f));
  }
  fc["legend"] = ordered_json::array();
  for (const auto& entry : doc.legend) {
    fc["legend"].push_back({{"number", entry.number}, {"name", entry.name}});
  }
  return fc;
}

}  // namespace

std::string render_geojson(const MapDocument& doc) { return to_geojson(doc).dump(2) + "\n"; }

std::string render_html(const MapDocument& doc, const std::string& title) {
  std::string legend_rows;
  for (const auto& entry : doc.legend) {
    legend_rows += fmt::format("<li value=\"{}\">{}</li>", entry.number, html_escape(entry.name));
  }
  // The GeoJSON is embedded verbatim; "</" is escaped so it cannot close the script tag.
  std::string data = to_geojson(doc).dump();
  for (std::size_t pos = 0; (pos = data.find("</", pos)) != std::string::npos; pos += 3) {
    data.replace(pos, 2, "<\\/");
  }
  return fmt::format(R"(<!DOCTYPE html>
<html>
<head>
<meta charset="utf-8">
<title>{0}</title>
<link rel="stylesheet" href="https://unpkg.com/leaflet@1.9.4/dist/leaflet.css">
<script src="https://unpkg.com/leaflet@1.9.4/dist/leaflet.js"></script>
<style>
  html, body {{ height: 100%; margin: 0; font-family: sans-serif; }}
  #map {{ position: absolute; top: 0; bottom: 0; left: 0; right: 280px; }}
  #legend {{ position: absolute; top: 0; bottom: 0; right: 0; width: 280px; overflow: auto; padding: 8px; box-sizing: border-box; }}
  .poi-label {{ background: #1f4e9c; color: #fff; border-radius: 10px; padding: 2px 6px; font-weight: bold; white-space: nowrap; }}
</style>
</head>
<body>
<div id="map"></div>
<div id="legend"><h3>{0}</h3><ol>{1}</ol></div>
<script>
const doc = {2};
const map = L.map('map');
L.tileLayer('https://tile.openstreetmap.org/{{z}}/{{x}}/{{y}}.png', {{
  maxZoom: 19, attribution: '&copy; OpenStreetMap contributors'
}}).addTo(map);
map.fitBounds([[doc.bbox[1], doc.bbox[0]], [doc.bbox[3], doc.bbox[2]]]);
for (const f of doc.features) {{
  if (f.properties.kind === 'path') {{
    L.polyline(f.geometry.coordinates.map(c => [c[1], c[0]]), {{ color: 'red', weight: 3 }}).addTo(map);
  }} else {{
    const c = f.geometry.coordinates;
    L.marker([c[1], c[0]], {{ icon: L.divIcon({{ className: '', html: '<span class="poi-label">' + f.properties.label + '</span>' }}) }})
      .bindTooltip(f.properties.names.join('<br>')).addTo(map);
  }}
}}
</script>
</body>
</html>
)",
                     html_escape(title), legend_rows, data);
}

}  // namespace geostory
