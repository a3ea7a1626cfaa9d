#include <doctest.h>

#include <random>

#include "geostory/error.hpp"
#include "geostory/geo.hpp"
#include "support.hpp"

using geostory::BoundingBox;
using geostory::GeoPoint;
namespace oracle = support::oracle;

namespace {

std::vector<GeoPoint> random_points(std::mt19937_64& rng, std::size_t n, const BoundingBox& box) {
  std::uniform_real_distribution<double> lon(box.min_lon, box.max_lon);
  std::uniform_real_distribution<double> lat(box.min_lat, box.max_lat);
  std::vector<GeoPoint> pts(n);
  for (auto& p : pts) p = {lon(rng), lat(rng)};
  return pts;
}

constexpr BoundingBox kBox{-8.70, 41.05, -8.50, 41.25};

}  // namespace

TEST_CASE("haversine identity and symmetry") {
  const GeoPoint a{-8.6107, 41.1452};
  const GeoPoint b{-8.6308, 41.1588};
  CHECK(geostory::haversine_distance(a, a) == 0.0);
  CHECK(geostory::haversine_distance(a, b) == geostory::haversine_distance(b, a));
  CHECK(geostory::haversine_distance(a, b) > 0.0);
}

TEST_CASE("haversine golden value") {
  // Fixed with a chord-based great-circle calculation on the 6,371,008.8 m sphere.
  constexpr double kGolden = 2262.531356327341;
  const double d = geostory::haversine_distance({-8.6107, 41.1452}, {-8.6308, 41.1588});
  CHECK(d == doctest::Approx(kGolden).epsilon(0.001));
  CHECK(d == doctest::Approx(oracle::distance({-8.6107, 41.1452}, {-8.6308, 41.1588})).epsilon(1e-9));
}

TEST_CASE("haversine agrees with the chord oracle over long and short ranges") {
  std::mt19937_64 rng(11);
  const auto pts = random_points(rng, 400, {-179.0, -80.0, 179.0, 80.0});
  for (std::size_t i = 0; i + 1 < pts.size(); i += 2) {
    const double expected = oracle::distance(pts[i], pts[i + 1]);
    CHECK(geostory::haversine_distance(pts[i], pts[i + 1]) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("haversine triangle inequality") {
  std::mt19937_64 rng(12);
  const auto pts = random_points(rng, 3000, {-30.0, -60.0, 30.0, 60.0});
  for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
    const double ab = geostory::haversine_distance(pts[i], pts[i + 1]);
    const double bc = geostory::haversine_distance(pts[i + 1], pts[i + 2]);
    const double ac = geostory::haversine_distance(pts[i], pts[i + 2]);
    CHECK(ac <= ab + bc + 1e-6);
  }
}

TEST_CASE("point on a vertex is at zero distance") {
  std::mt19937_64 rng(13);
  const auto line = random_points(rng, 12, kBox);
  for (const auto& v : line) CHECK(geostory::point_to_polyline_distance(v, line) == 0.0);
}

TEST_CASE("single-point polyline degenerates to haversine") {
  const GeoPoint p{-8.61, 41.14};
  const GeoPoint q{-8.63, 41.16};
  const std::vector<GeoPoint> line{q};
  CHECK(geostory::point_to_polyline_distance(p, line) == geostory::haversine_distance(p, q));
}

TEST_CASE("empty polyline is rejected") {
  const std::vector<GeoPoint> empty;
  try {
    geostory::point_to_polyline_distance({0, 0}, empty);
    FAIL("expected an error");
  } catch (const geostory::Error& e) {
    CHECK(e.kind() == geostory::ErrorKind::InvalidArgument);
  }
}

TEST_CASE("polyline distance matches dense sampling on 100 random cases") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<std::size_t> len(2, 8);
  for (int i = 0; i < 100; ++i) {
    const auto line = random_points(rng, len(rng), kBox);
    const auto p = random_points(rng, 1, kBox).front();
    const double got = geostory::point_to_polyline_distance(p, line);
    const double want = oracle::polyline_distance(p, line);
    CAPTURE(i);
    CHECK((std::abs(got - want) <= 1.0 || std::abs(got - want) <= 0.005 * want));
  }
}

TEST_CASE("polyline distance never exceeds the nearest vertex") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 200; ++i) {
    const auto line = random_points(rng, 6, kBox);
    const auto p = random_points(rng, 1, kBox).front();
    // Same kernel on both sides: vertex distances from the active variant.
    std::vector<double> d(line.size());
    geostory::distances_from(p, line, d);
    const double nearest = *std::min_element(d.begin(), d.end());
    CHECK(geostory::point_to_polyline_distance(p, line) <= nearest);
    double libm_nearest = 1e300;
    for (const auto& v : line) libm_nearest = std::min(libm_nearest, geostory::haversine_distance(p, v));
    CHECK(geostory::point_to_polyline_distance(p, line) <= libm_nearest + 1e-6);
  }
}

TEST_CASE("polyline distance to a long line exercises the vector loop and tail") {
  std::mt19937_64 rng(16);
  for (std::size_t n : {2u, 3u, 4u, 5u, 6u, 9u, 17u, 64u, 257u}) {
    const auto line = random_points(rng, n, kBox);
    for (int k = 0; k < 5; ++k) {
      const auto p = random_points(rng, 1, kBox).front();
      const double want = oracle::polyline_distance(p, line);
      const double got = geostory::point_to_polyline_distance(p, line);
      CAPTURE(n);
      CHECK((std::abs(got - want) <= 1.0 || std::abs(got - want) <= 0.005 * want));
    }
  }
}

TEST_CASE("path length and distances_from") {
  std::mt19937_64 rng(17);
  const auto pts = random_points(rng, 37, kBox);
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) sum += oracle::distance(pts[i], pts[i + 1]);
  CHECK(geostory::path_length(pts) == doctest::Approx(sum).epsilon(1e-9));
  const std::vector<GeoPoint> one{pts[0]};
  CHECK(geostory::path_length(one) == 0.0);

  std::vector<double> out(pts.size());
  geostory::distances_from(pts[3], pts, out);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(out[i] == doctest::Approx(oracle::distance(pts[3], pts[i])).epsilon(1e-9));
  }
  CHECK(out[3] == 0.0);
}

TEST_CASE("bbox_of examples") {
  const std::vector<GeoPoint> single{{0, 0}};
  CHECK(geostory::bbox_of(single) == BoundingBox{0, 0, 0, 0});
  const std::vector<GeoPoint> two{{-1, 2}, {3, -4}};
  CHECK(geostory::bbox_of(two) == BoundingBox{-1, -4, 3, 2});
  CHECK_THROWS_AS(geostory::bbox_of(std::vector<GeoPoint>{}), geostory::Error);
}

TEST_CASE("bbox_of contains every point and ignores order") {
  std::mt19937_64 rng(18);
  auto pts = random_points(rng, 10000, {-170, -80, 170, 80});
  const auto box = geostory::bbox_of(pts);
  for (const auto& p : pts) REQUIRE(box.contains(p));
  std::shuffle(pts.begin(), pts.end(), rng);
  CHECK(geostory::bbox_of(pts) == box);
}

TEST_CASE("coordinate validity") {
  CHECK(geostory::is_valid({180, 90}));
  CHECK(geostory::is_valid({-180, -90}));
  CHECK_FALSE(geostory::is_valid({180.0001, 0}));
  CHECK_FALSE(geostory::is_valid({0, -90.5}));
  CHECK_FALSE(geostory::is_valid({std::nan(""), 0}));
  CHECK_THROWS_AS(geostory::require_valid({0, 91}), geostory::Error);
  CHECK(BoundingBox{-1, -1, 1, 1}.contains({1, -1}));
  CHECK_FALSE(BoundingBox{1, 0, -1, 0}.is_valid());
}
