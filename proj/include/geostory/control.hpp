#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geostory/error.hpp"
#include "geostory/gazetteer.hpp"
#include "geostory/heat.hpp"
#include "geostory/map.hpp"
#include "geostory/story.hpp"
#include "geostory/trajectory.hpp"
#include "geostory/validation.hpp"

namespace geostory {

struct StoryRequest {
  std::string dataset_path;
  Schema schema = Schema::KagglePorto;
  NarrativeSpec spec;  // spec.mode selects the workflow
  GroundingPolicy policy;
  GazetteerConfig gazetteer;
  std::optional<SelectionCriterion> selection;  // single-trajectory mode
  std::optional<std::size_t> hotspot_k;         // heat-map mode
  std::optional<BoundingBox> bbox;              // heat-map grid extent; tight bbox when unset
  double cell_size_m = kDefaultCellSizeM;
  std::size_t max_retries = 3;
  std::optional<double> discovery_radius_m;  // defaults to the grounding threshold of the mode
  std::size_t trajectory_samples = 20;
  double cluster_distance_m = kDefaultClusterDistanceM;
  std::string region_name = "Porto";
  unsigned threads = 1;
};

// Throws Error(Configuration) listing every violation.
void validate(const StoryRequest& req);

enum class StepKind { Ingest, Analytics, Discovery, Generate, Validate, Emit };
std::string_view to_string(StepKind kind);

struct PlanStep {
  StepKind kind;
  std::vector<std::string> operations;
  nlohmann::ordered_json params;
};

struct AgentPlan {
  std::vector<PlanStep> steps;
};

AgentPlan plan(const StoryRequest& req);
nlohmann::ordered_json plan_to_json(const AgentPlan& plan);

// Output of the analytics step: story context without candidates, the
// grounding anchors and the discovery centers.
struct Analysis {
  StoryContext ctx;
  GroundingContext grounding;
  std::vector<GeoPoint> discovery_centers;
  std::optional<Trajectory> trajectory;  // single-trajectory mode
  std::string detail;
};

// Throws Error(InvalidArgument) when the dataset yields nothing to narrate.
Analysis analyze(const StoryRequest& req, const Dataset& dataset);

struct TraceEntry {
  std::string step;  // step name, or "feedback"
  std::size_t attempt = 0;  // generation attempt, 0 outside the loop
  std::string detail;
  double duration_ms = 0.0;
};

struct StoryResult {
  Story story;
  ValidationReport report;
  MapDocument map;
  std::size_t attempts = 0;
  std::vector<TraceEntry> trace;
  std::vector<std::string> prompts;  // one per generation attempt
  AgentPlan plan;
};

// Carries the last attempt when the generate/validate loop gives up.
class RetriesExhausted : public Error {
 public:
  RetriesExhausted(std::string message, std::optional<Story> story, ValidationReport report,
                   std::vector<TraceEntry> trace, std::vector<std::string> prompts,
                   std::size_t attempts)
      : Error(ErrorKind::RetriesExhausted, message),
        story(std::move(story)),
        report(std::move(report)),
        trace(std::move(trace)),
        prompts(std::move(prompts)),
        attempts(attempts) {}

  std::optional<Story> story;  // empty when the last answer was unparseable
  ValidationReport report;
  std::vector<TraceEntry> trace;
  std::vector<std::string> prompts;
  std::size_t attempts;
};

// Runs the plan. Validation failures feed back into the next prompt; after
// max_retries generations RetriesExhausted is thrown. Infrastructure errors
// from any step are rethrown with the step name prefixed and their kind kept.
StoryResult execute(const StoryRequest& req, StoryBackend& backend);
StoryResult execute(const StoryRequest& req, StoryBackend& backend, Gazetteer& gazetteer);

nlohmann::ordered_json trace_to_json(const std::vector<TraceEntry>& trace, bool with_timings = true);

// story.txt, story.json, report.json, report.txt, map.geojson, map.html,
// trace.json, plan.json.
void write_bundle(const std::filesystem::path& dir, const StoryResult& result);

// Partial bundle for a failed run: report, trace and the last story if any.
void write_failure_bundle(const std::filesystem::path& dir, const RetriesExhausted& failure);

}  // namespace geostory
