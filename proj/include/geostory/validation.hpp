#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "geostory/gazetteer.hpp"
#include "geostory/geo.hpp"
#include "geostory/story.hpp"

namespace geostory {

// Makes "irrelevant to the data" precise: a POI is grounded when it lies
// within the threshold of the trajectory (single-trajectory stories) or of
// the nearest hotspot center (heat-map stories).
struct GroundingPolicy {
  double trajectory_threshold_m = 500.0;
  double hotspot_threshold_m = 1000.0;
  bool require_geocode = true;
  double min_grounded_fraction = 1.0;
};

void validate(const GroundingPolicy& policy);

enum class Verdict { Grounded, Ungeocodable, SpatialHallucination };
std::string_view to_string(Verdict verdict);

struct PoiVerdict {
  std::string display_name;
  Verdict verdict = Verdict::Grounded;
  std::optional<double> distance_m;
  std::optional<GeoPoint> location;
};

struct StructuralCheck {
  std::string name;  // "min_pois", "max_words", "markup"
  bool passed = false;
  std::string detail;
  std::size_t limit = 0;   // required minimum / allowed maximum, when numeric
  std::size_t actual = 0;
};

struct ValidationReport {
  std::vector<PoiVerdict> per_poi;  // one per distinct mention, story order
  std::vector<StructuralCheck> structural;
  double grounded_fraction = 1.0;
  double threshold_m = 0.0;
  std::string grounding_target;  // "trajectory" or "nearest hotspot"
  bool overall = false;

  std::vector<std::string> flagged() const;  // names not grounded, story order
};

struct TrajectoryGrounding {
  std::vector<GeoPoint> path;
};
struct HotspotGrounding {
  std::vector<GeoPoint> centers;
};
using GroundingContext = std::variant<TrajectoryGrounding, HotspotGrounding>;

// Deduplicates mentions by normalized name, geocodes them in bulk, measures
// each against the grounding context and runs the structural checks.
// Throws Error(Transport) when the gazetteer cannot be reached: that is an
// infrastructure failure, not a failing report. Throws
// Error(InvalidArgument) when the context does not match story.spec.mode.
ValidationReport validate_story(const Story& story, const GroundingContext& ctx,
                                const GroundingPolicy& policy, Gazetteer& gazetteer);

// Report for a backend answer that could not be parsed into a story at all.
ValidationReport malformed_story_report(const NarrativeSpec& spec, const std::string& problem);

// Revision instructions for the next generation attempt. Throws
// Error(InvalidArgument) for a passing report.
std::string feedback_text(const ValidationReport& report);

nlohmann::ordered_json report_to_json(const ValidationReport& report);
std::string report_summary(const ValidationReport& report);

}  // namespace geostory
