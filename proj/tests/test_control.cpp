#include <doctest.h>

#include <fstream>

#include "geostory/control.hpp"
#include "geostory/testing/harness.hpp"
#include "support.hpp"

namespace gs = geostory;
using gs::testing::ScriptedBackend;

namespace {

const std::vector<gs::GeoPoint> kDowntown{
    {-8.62910, 41.15790}, {-8.61963, 41.14739}, {-8.61103, 41.14859}, {-8.61058, 41.14557}, {-8.61363, 41.14062}};

std::string write_trip(const std::string& tag) {
  const auto dir = support::scratch_dir(tag);
  const auto path = dir / "trip.csv";
  std::ofstream out(path);
  gs::write_point_list(out, gs::testing::trajectory_through("downtown", kDowntown, 8));
  return path.string();
}

gs::StoryRequest trajectory_request(const std::string& tag) {
  gs::StoryRequest req;
  req.dataset_path = write_trip(tag);
  req.schema = gs::Schema::PointList;
  req.spec.mode = gs::StoryMode::SingleTrajectory;
  req.spec.min_pois = 3;
  req.spec.max_words = 120;
  req.selection = gs::LongestByPoints{};
  req.gazetteer.fixture_path = support::fixture_path().string();
  return req;
}

gs::StoryRequest heatmap_request() {
  gs::StoryRequest req;
  req.dataset_path = (support::source_dir() / "data" / "porto_demo_trips.csv").string();
  req.hotspot_k = 5;
  req.gazetteer.fixture_path = support::fixture_path().string();
  return req;
}

const std::string kClean =
    "The trip leaves [[POI: Rotunda da Boavista]], rolls down to [[POI: Avenida dos Aliados]] and ends by "
    "the river in the [[POI: Ribeira district]].";
const std::string kHallucinated = kClean + " Later it detours to [[POI: Matosinhos Beach]].";
const std::string kGhost = kClean + " It passes [[POI: Atlantis Harbour]].";

std::vector<gs::TraceEntry> entries(const std::vector<gs::TraceEntry>& trace, const std::string& step) {
  std::vector<gs::TraceEntry> out;
  for (const auto& t : trace) {
    if (t.step == step) out.push_back(t);
  }
  return out;
}

}  // namespace

TEST_CASE("plan shape") {
  const auto heat = gs::plan(heatmap_request());
  REQUIRE(heat.steps.size() == 6);
  const std::vector<gs::StepKind> order{gs::StepKind::Ingest,   gs::StepKind::Analytics, gs::StepKind::Discovery,
                                        gs::StepKind::Generate, gs::StepKind::Validate,  gs::StepKind::Emit};
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(heat.steps[i].kind == order[i]);
  CHECK(heat.steps[1].operations.front() == "trip_endpoints");
  CHECK(heat.steps[4].params["threshold_m"] == 1000.0);

  const auto req = trajectory_request("plan");
  const auto single = gs::plan(req);
  REQUIRE(single.steps.size() == 6);
  CHECK(single.steps[1].operations.front() == "select_trajectory");
  CHECK(single.steps[2].params["radius_m"] == 500.0);
  CHECK(gs::plan_to_json(single).dump() == gs::plan_to_json(gs::plan(req)).dump());
}

TEST_CASE("request validation lists every problem") {
  gs::StoryRequest req;
  req.max_retries = 0;
  req.cell_size_m = -1;
  try {
    gs::validate(req);
    FAIL("expected a configuration error");
  } catch (const gs::Error& e) {
    CHECK(e.kind() == gs::ErrorKind::Configuration);
    const std::string msg = e.what();
    CHECK(msg.find("dataset_path") != std::string::npos);
    CHECK(msg.find("max_retries") != std::string::npos);
    CHECK(msg.find("cell_size_m") != std::string::npos);
    CHECK(msg.find("hotspot_k") != std::string::npos);
  }
  auto single = trajectory_request("validate");
  single.hotspot_k = 3;
  CHECK_THROWS_AS(gs::validate(single), gs::Error);
  gs::TemplateBackend backend;
  CHECK_THROWS_AS(gs::execute(single, backend), gs::Error);
}

TEST_CASE("template heatmap run passes first time") {
  gs::TemplateBackend backend;
  const auto result = gs::execute(heatmap_request(), backend);
  CHECK(result.attempts == 1);
  CHECK(result.report.overall);
  CHECK(result.prompts.size() == 1);
  CHECK(result.story.mentions.size() >= 15);
  CHECK(result.story.word_count <= 150);
  CHECK(entries(result.trace, "feedback").empty());
  CHECK(result.map.legend.size() == result.report.per_poi.size());
  const std::vector<std::string> steps{"ingest", "analytics", "discovery", "generate", "validate", "emit"};
  REQUIRE(result.trace.size() == steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) CHECK(result.trace[i].step == steps[i]);
}

TEST_CASE("validation feedback drives the retry loop") {
  const auto req = trajectory_request("retry");
  ScriptedBackend backend({kHallucinated, kHallucinated, kClean});
  const auto result = gs::execute(req, backend);
  CHECK(backend.call_count() == 3);
  CHECK(result.attempts == 3);
  CHECK(result.report.overall);
  CHECK(result.story.text == kClean);

  const auto feedback = entries(result.trace, "feedback");
  REQUIRE(feedback.size() == 2);
  CHECK(feedback[0].attempt == 1);
  CHECK(feedback[1].attempt == 2);
  CHECK(feedback[0].detail.find("Matosinhos Beach") != std::string::npos);

  REQUIRE(backend.prompts().size() == 3);
  CHECK(backend.prompts() == result.prompts);
  CHECK(result.prompts[0].find(feedback[0].detail) == std::string::npos);
  const auto first = result.prompts[2].find(feedback[0].detail);
  const auto second = result.prompts[2].find(feedback[1].detail, first + 1);
  CHECK(result.prompts[1].find(feedback[0].detail) != std::string::npos);
  CHECK(first != std::string::npos);
  CHECK(second != std::string::npos);
  CHECK(first < second);

  const auto validations = entries(result.trace, "validate");
  REQUIRE(validations.size() == 3);
  CHECK(validations[0].detail.rfind("fail", 0) == 0);
  CHECK(validations[2].detail.rfind("pass", 0) == 0);
  CHECK(result.map.legend.size() == 3);
}

TEST_CASE("an ungeocodable place is flagged like a far one") {
  auto req = trajectory_request("ghost");
  ScriptedBackend backend({kGhost, kClean});
  const auto result = gs::execute(req, backend);
  CHECK(result.attempts == 2);
  REQUIRE(entries(result.trace, "feedback").size() == 1);
  CHECK(entries(result.trace, "feedback")[0].detail.find("Atlantis Harbour") != std::string::npos);
}

TEST_CASE("retries exhausted carries the last attempt") {
  auto req = trajectory_request("exhausted");
  req.max_retries = 2;
  ScriptedBackend backend({kHallucinated, kHallucinated, kClean});
  try {
    gs::execute(req, backend);
    FAIL("expected RetriesExhausted");
  } catch (const gs::RetriesExhausted& e) {
    CHECK(e.kind() == gs::ErrorKind::RetriesExhausted);
    CHECK(e.attempts == 2);
    CHECK(backend.call_count() == 2);
    REQUIRE(e.story.has_value());
    CHECK(e.story->text == kHallucinated);
    CHECK_FALSE(e.report.overall);
    CHECK(e.report.flagged() == std::vector<std::string>{"Matosinhos Beach"});
    CHECK(e.prompts.size() == 2);
    CHECK(entries(e.trace, "feedback").size() == 1);
    CHECK(entries(e.trace, "emit").empty());
  }
}

TEST_CASE("unparseable answers count as failed attempts") {
  auto req = trajectory_request("malformed");
  ScriptedBackend backend({"no markup at all", "broken [[POI: Ribeira", kClean});
  const auto result = gs::execute(req, backend);
  CHECK(result.attempts == 3);
  CHECK(entries(result.trace, "feedback").size() == 2);
}

TEST_CASE("replaying a script gives the same run") {
  const auto req = trajectory_request("replay");
  ScriptedBackend a({kHallucinated, kClean});
  ScriptedBackend b({kHallucinated, kClean});
  const auto ra = gs::execute(req, a);
  const auto rb = gs::execute(req, b);
  CHECK(gs::trace_to_json(ra.trace, false).dump() == gs::trace_to_json(rb.trace, false).dump());
  CHECK(ra.prompts == rb.prompts);
  CHECK(gs::render_geojson(ra.map) == gs::render_geojson(rb.map));
  CHECK(gs::report_to_json(ra.report).dump() == gs::report_to_json(rb.report).dump());
  CHECK(gs::trace_to_json(ra.trace, true)[0].contains("duration_ms"));
  CHECK_FALSE(gs::trace_to_json(ra.trace, false)[0].contains("duration_ms"));
}

namespace {

class FailingBackend final : public gs::StoryBackend {
 public:
  std::string id() const override { return "down"; }
  bool shareable() const override { return true; }
  std::string complete(const gs::GenerationRequest&) override {
    throw gs::Error(gs::ErrorKind::Transport, "connection refused");
  }
};

}  // namespace

TEST_CASE("infrastructure errors name their step") {
  FailingBackend down;
  try {
    gs::execute(trajectory_request("down"), down);
    FAIL("expected a transport error");
  } catch (const gs::RetriesExhausted&) {
    FAIL("transport errors are not validation failures");
  } catch (const gs::Error& e) {
    CHECK(e.kind() == gs::ErrorKind::Transport);
    CHECK(std::string(e.what()).rfind("generate: ", 0) == 0);
  }

  auto missing = trajectory_request("missing");
  missing.dataset_path += ".absent";
  gs::TemplateBackend backend;
  try {
    gs::execute(missing, backend);
    FAIL("expected an ingest error");
  } catch (const gs::Error& e) {
    CHECK(std::string(e.what()).rfind("ingest: ", 0) == 0);
  }
}

TEST_CASE("bundles") {
  const auto req = trajectory_request("bundle");
  ScriptedBackend backend({kClean});
  const auto result = gs::execute(req, backend);
  const auto dir = support::scratch_dir("bundle_out");
  gs::write_bundle(dir, result);
  for (const char* name : {"story.txt", "story.json", "report.json", "report.txt", "map.geojson", "map.html",
                           "trace.json", "plan.json", "prompts.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / name), name);
  }
  CHECK(support::read_file(dir / "story.txt").find(kClean) == 0);
  const auto report = nlohmann::json::parse(support::read_file(dir / "report.json"));
  CHECK(report["overall"] == "pass");

  auto failing = req;
  failing.max_retries = 1;
  ScriptedBackend bad({kHallucinated});
  try {
    gs::execute(failing, bad);
    FAIL("expected RetriesExhausted");
  } catch (const gs::RetriesExhausted& e) {
    const auto fdir = support::scratch_dir("bundle_fail");
    gs::write_failure_bundle(fdir, e);
    CHECK(std::filesystem::exists(fdir / "report.json"));
    CHECK(std::filesystem::exists(fdir / "story.txt"));
    CHECK_FALSE(std::filesystem::exists(fdir / "map.geojson"));
  }
}
