#include <doctest.h>

#include <sstream>

#include "geostory/config.hpp"
#include "support.hpp"

namespace gs = geostory;

namespace {

gs::KeyValues parse(const std::string& text, const std::filesystem::path& base = {}) {
  std::istringstream in(text);
  return gs::parse_key_values(in, base);
}

std::string config_error(const gs::KeyValues& kv) {
  try {
    gs::to_run_config(kv);
  } catch (const gs::Error& e) {
    CHECK(e.kind() == gs::ErrorKind::Configuration);
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("key/value parsing") {
  const auto kv = parse("# comment\n\nmode = single_trajectory\n  tone=  calm and warm  \nmode=heatmap\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv.at("mode").value == "heatmap");
  CHECK(kv.at("tone").value == "calm and warm");

  try {
    parse("mode = heatmap\nthis line has no equals\n");
    FAIL("expected a parse error");
  } catch (const gs::ParseError& e) {
    CHECK(e.offset() == 15);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse(" = value\n"), gs::ParseError);
}

TEST_CASE("defaults") {
  const auto rc = gs::to_run_config({});
  CHECK(rc.backend == gs::BackendKind::Template);
  CHECK(rc.request.spec.mode == gs::StoryMode::Heatmap);
  CHECK(rc.request.hotspot_k == std::optional<std::size_t>(5));
  CHECK_FALSE(rc.request.selection.has_value());
  CHECK(rc.request.spec.max_words == 150);
  CHECK(rc.request.spec.min_pois == 15);
  CHECK(rc.request.policy.trajectory_threshold_m == 500.0);
  CHECK(rc.request.policy.hotspot_threshold_m == 1000.0);
  CHECK(rc.request.max_retries == 3);
  CHECK(rc.request.gazetteer.offline_only);
  CHECK(std::filesystem::exists(rc.request.gazetteer.fixture_path));

  const auto single = gs::to_run_config(parse("mode = single_trajectory\n"));
  CHECK_FALSE(single.request.hotspot_k.has_value());
  REQUIRE(single.request.selection.has_value());
  CHECK(gs::to_string(*single.request.selection) == "longest_by_points");
}

TEST_CASE("every key is applied") {
  const auto base = std::filesystem::path("/data/runs");
  const auto rc = gs::to_run_config(parse(
      "dataset = trips.csv\nschema = point_list\nmode = single_trajectory\nselection = id:T000042\n"
      "cell_size_m = 100\nthreads = 4\nmax_retries = 5\ndiscovery_radius_m = 300\ntrajectory_samples = 12\n"
      "cluster_distance_m = 80\nregion_name = Lisbon\nmax_words = 200\nmin_pois = 4\naudience = tourists\n"
      "tone = playful\ninclude_blurbs = yes\ntrajectory_threshold_m = 250\nhotspot_threshold_m = 800\n"
      "require_geocode = false\nmin_grounded_fraction = 0.9\ngazetteer.offline = false\n"
      "gazetteer.fixture = /abs/pois.csv\ngazetteer.cache = cache/journal.jsonl\n"
      "gazetteer.base_url = http://localhost:8080\ngazetteer.region_bias = -8.7,41.1,-8.5,41.25\n"
      "gazetteer.rate_limit = 2\ngazetteer.max_concurrency = 8\ngazetteer.timeout_s = 3\nbackend = http\n"
      "backend.endpoint = http://localhost:9000/complete\nbackend.token_env = MY_TOKEN\n"
      "backend.temperature = 0.2\nbackend.timeout_s = 30\noutput_dir = ../out\nverbose = on\n",
      base));
  const auto& r = rc.request;
  CHECK(r.dataset_path == "/data/runs/trips.csv");
  CHECK(r.schema == gs::Schema::PointList);
  CHECK(r.spec.mode == gs::StoryMode::SingleTrajectory);
  CHECK(gs::to_string(*r.selection) == "id:T000042");
  CHECK(r.cell_size_m == 100.0);
  CHECK(r.threads == 4);
  CHECK(r.max_retries == 5);
  CHECK(r.discovery_radius_m == std::optional<double>(300.0));
  CHECK(r.trajectory_samples == 12);
  CHECK(r.cluster_distance_m == 80.0);
  CHECK(r.region_name == "Lisbon");
  CHECK(r.spec.max_words == 200);
  CHECK(r.spec.min_pois == 4);
  CHECK(r.spec.audience == "tourists");
  CHECK(r.spec.tone == "playful");
  CHECK(r.spec.include_blurbs);
  CHECK(r.policy.trajectory_threshold_m == 250.0);
  CHECK(r.policy.hotspot_threshold_m == 800.0);
  CHECK_FALSE(r.policy.require_geocode);
  CHECK(r.policy.min_grounded_fraction == 0.9);
  CHECK_FALSE(r.gazetteer.offline_only);
  CHECK(r.gazetteer.fixture_path == "/abs/pois.csv");
  CHECK(r.gazetteer.cache_path == "/data/runs/cache/journal.jsonl");
  CHECK(r.gazetteer.base_url == "http://localhost:8080");
  REQUIRE(r.gazetteer.region_bias.has_value());
  CHECK(r.gazetteer.region_bias->max_lat == 41.25);
  CHECK(r.gazetteer.rate_limit == 2.0);
  CHECK(r.gazetteer.max_concurrency == 8);
  CHECK(r.gazetteer.timeout_s == 3);
  CHECK(rc.backend == gs::BackendKind::Http);
  CHECK(rc.http.endpoint == "http://localhost:9000/complete");
  CHECK(rc.http.token_env == "MY_TOKEN");
  CHECK(rc.http.temperature == 0.2);
  CHECK(rc.http.timeout_s == 30);
  CHECK(rc.output_dir == "/data/out");
  CHECK(rc.verbose);
  CHECK(gs::config_keys().size() == 38);
}

TEST_CASE("configuration errors are collected") {
  const auto msg = config_error(parse("colour = blue\nmax_words = many\nbackend = scripted\nbbox = 1,2\n"));
  CHECK(msg.find("unknown key 'colour'") != std::string::npos);
  CHECK(msg.find("max_words") != std::string::npos);
  CHECK(msg.find("backend.script") != std::string::npos);
  CHECK(msg.find("bbox") != std::string::npos);
  CHECK(config_error(parse("backend = http\n")).find("backend.endpoint") != std::string::npos);
  CHECK(config_error(parse("include_blurbs = maybe\n")).find("boolean") != std::string::npos);
  CHECK_FALSE(config_error(parse("mode = sideways\n")).empty());
}

TEST_CASE("overrides and files") {
  auto kv = parse("max_words = 100\n");
  gs::apply_override(kv, "max_words=90");
  gs::apply_override(kv, "tone = dry");
  CHECK(kv.at("max_words").value == "90");
  CHECK(kv.at("tone").value == "dry");
  CHECK_THROWS_AS(gs::apply_override(kv, "novalue"), gs::Error);

  const auto dir = support::scratch_dir("config");
  support::write_file(dir / "run.conf", "dataset = trips.csv\n");
  const auto loaded = gs::load_key_values(dir / "run.conf");
  CHECK(gs::to_run_config(loaded).request.dataset_path == (dir / "trips.csv").string());
  try {
    gs::load_key_values(dir / "absent.conf");
    FAIL("expected an io error");
  } catch (const gs::Error& e) {
    CHECK(e.kind() == gs::ErrorKind::Io);
  }
}

TEST_CASE("shipped configs are valid") {
  for (const char* name : {"heatmap.conf", "trajectory.conf"}) {
    const auto path = support::source_dir() / "configs" / name;
    REQUIRE_MESSAGE(std::filesystem::exists(path), name);
    const auto rc = gs::to_run_config(gs::load_key_values(path));
    CHECK_NOTHROW(gs::validate(rc.request));
    CHECK(std::filesystem::exists(rc.request.dataset_path));
  }
}
