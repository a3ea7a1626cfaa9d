#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "geostory/error.hpp"
#include "geostory/gazetteer.hpp"
#include "geostory/map.hpp"
#include "support.hpp"

using geostory::GeoPoint;
using geostory::MapDocument;
using geostory::POI;
using geostory::PoiSource;

namespace {

POI poi(std::string name, GeoPoint at) { return {std::move(name), at, "", PoiSource::Fixture, ""}; }

// The 18 places of the reference paragraph, geocoded against the fixture, in story order.
std::vector<POI> story_pois() {
  geostory::GazetteerConfig cfg;
  cfg.fixture_path = support::fixture_path().string();
  geostory::Gazetteer g(cfg);
  std::vector<POI> out;
  for (const auto& name : support::reference_story_one_names()) {
    auto p = g.geocode(name);
    if (!p) throw std::runtime_error("fixture lacks " + name);
    p->name = name;
    out.push_back(*p);
  }
  return out;
}

std::vector<std::vector<std::size_t>> marker_sets(const MapDocument& doc) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto* m : doc.markers()) out.push_back(m->numbers);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("two close POIs share one marker") {
  const GeoPoint a{-8.6110, 41.1486};
  const GeoPoint b{-8.6110, 41.1486 + 50.0 / 111195.0};
  REQUIRE(geostory::haversine_distance(a, b) == doctest::Approx(50.0).epsilon(0.01));
  const std::vector<POI> pois{poi("A", a), poi("B", b)};
  const auto doc = geostory::emit_map(pois, nullptr, 150.0);
  REQUIRE(doc.markers().size() == 1);
  CHECK(doc.markers()[0]->numbers == std::vector<std::size_t>{1, 2});
  REQUIRE(doc.legend.size() == 2);
  CHECK(doc.legend[0].name == "A");
  CHECK(doc.legend[1].number == 2);
  CHECK(doc.markers()[0]->center.lat == doctest::Approx((a.lat + b.lat) / 2));
}

TEST_CASE("path-only document") {
  geostory::Trajectory t;
  t.id = "trip";
  t.points = {{-8.61, 41.14}, {-8.62, 41.15}};
  const auto doc = geostory::emit_map({}, &t, 150.0);
  CHECK(doc.markers().empty());
  CHECK(doc.legend.empty());
  REQUIRE(doc.features.size() == 1);
  CHECK(std::holds_alternative<geostory::PathFeature>(doc.features[0]));
  CHECK(doc.bbox.contains({-8.61, 41.14}));
  CHECK(doc.bbox.contains({-8.62, 41.15}));
  CHECK_THROWS_AS(geostory::emit_map({}, nullptr, 150.0), geostory::Error);
}

TEST_CASE("reference places: legend, clusters and bbox") {
  const auto pois = story_pois();
  REQUIRE(pois.size() == 18);
  std::vector<GeoPoint> locations;
  for (const auto& p : pois) locations.push_back(p.location);
  for (double threshold : {0.0, 150.0, 400.0, 1000.0}) {
    const auto doc = geostory::emit_map(pois, nullptr, threshold);
    CHECK(doc.legend.size() == 18);
    for (std::size_t i = 0; i < 18; ++i) {
      CHECK(doc.legend[i].number == i + 1);
      CHECK(doc.legend[i].name == pois[i].name);
    }
    auto expected = support::oracle::single_linkage(locations, threshold);
    std::sort(expected.begin(), expected.end());
    CAPTURE(threshold);
    CHECK(marker_sets(doc) == expected);
    std::vector<std::size_t> seen;
    for (const auto* m : doc.markers()) {
      CHECK(doc.bbox.contains(m->center));
      seen.insert(seen.end(), m->numbers.begin(), m->numbers.end());
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen.size() == 18);
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
  }
  // "Aliados Avenue" is an alias of the first place: at threshold 0 the two still merge.
  CHECK(geostory::emit_map(pois, nullptr, 0.0).markers().size() == 17);
}

TEST_CASE("random clustering matches the brute-force oracle") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> lon(-8.64, -8.58);
  std::uniform_real_distribution<double> lat(41.13, 41.17);
  for (int round = 0; round < 20; ++round) {
    std::vector<POI> pois;
    std::vector<GeoPoint> locations;
    for (int i = 0; i < 40; ++i) {
      locations.push_back({lon(rng), lat(rng)});
      pois.push_back(poi("p" + std::to_string(i), locations.back()));
    }
    auto expected = support::oracle::single_linkage(locations, 300.0);
    std::sort(expected.begin(), expected.end());
    CHECK(marker_sets(geostory::emit_map(pois, nullptr, 300.0)) == expected);
  }
}

TEST_CASE("bbox padding") {
  const std::vector<POI> pois{poi("A", {0.0, 0.0}), poi("B", {1.0, 2.0})};
  const auto doc = geostory::emit_map(pois, nullptr, 150.0);
  CHECK(doc.bbox.min_lon == doctest::Approx(-0.1));
  CHECK(doc.bbox.max_lon == doctest::Approx(1.1));
  CHECK(doc.bbox.min_lat == doctest::Approx(-0.2));
  CHECK(doc.bbox.max_lat == doctest::Approx(2.2));
  const auto single = geostory::emit_map(std::vector<POI>{poi("A", {5, 5})}, nullptr, 150.0);
  CHECK(single.bbox.min_lon < 5.0);
  CHECK(single.bbox.max_lat > 5.0);
}

TEST_CASE("GeoJSON rendering") {
  MapDocument empty;
  const auto e = nlohmann::json::parse(geostory::render_geojson(empty));
  CHECK(e["type"] == "FeatureCollection");
  CHECK(e["features"].is_array());
  CHECK(e["features"].empty());

  geostory::Trajectory t;
  t.id = "trip";
  t.points = {{-8.61, 41.14}, {-8.62, 41.15}};
  const std::vector<POI> pois{poi("Casa & <Música>", {-8.63059, 41.15892})};
  const auto doc = geostory::emit_map(pois, &t, 150.0);
  const auto text = geostory::render_geojson(doc);
  const auto j = nlohmann::json::parse(text);
  REQUIRE(j["features"].size() == 2);
  CHECK(j["features"][0]["geometry"]["type"] == "Point");
  CHECK(j["features"][0]["geometry"]["coordinates"][0] == -8.63059);
  CHECK(j["features"][0]["properties"]["numbers"] == nlohmann::json::array({1}));
  CHECK(j["features"][0]["properties"]["label"] == "1");
  CHECK(j["features"][1]["geometry"]["type"] == "LineString");
  CHECK(j["features"][1]["geometry"]["coordinates"].size() == 2);
  CHECK(j["legend"][0]["name"] == "Casa & <Música>");
  CHECK(text == geostory::render_geojson(geostory::emit_map(pois, &t, 150.0)));
  // Key order is fixed: type, geometry, properties.
  CHECK(text.find("\"type\": \"Feature\"") < text.find("\"geometry\""));

  const auto html = geostory::render_html(doc, "Story <map>");
  CHECK(html.find("Casa &amp; &lt;Música&gt;") != std::string::npos);
  CHECK(html.find("<title>Story &lt;map&gt;</title>") != std::string::npos);
  CHECK(html.find("tile.openstreetmap.org") != std::string::npos);
}

TEST_CASE("reference places GeoJSON golden") {
  const auto doc = geostory::emit_map(story_pois(), nullptr, 150.0);
  const auto text = geostory::render_geojson(doc);
  CHECK(text == geostory::render_geojson(geostory::emit_map(story_pois(), nullptr, 150.0)));
  CHECK(support::matches_golden("porto_story_map.geojson", text));
}
