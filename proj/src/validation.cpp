#include "geostory/validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include <fmt/format.h>

#include "geostory/error.hpp"

namespace geostory {

using nlohmann::ordered_json;

void validate(const GroundingPolicy& policy) {
  std::vector<std::string> problems;
  if (!(policy.trajectory_threshold_m >= 0.0)) problems.emplace_back("trajectory_threshold_m must be >= 0");
  if (!(policy.hotspot_threshold_m >= 0.0)) problems.emplace_back("hotspot_threshold_m must be >= 0");
  if (!(policy.min_grounded_fraction >= 0.0 && policy.min_grounded_fraction <= 1.0)) {
    problems.emplace_back("min_grounded_fraction must be in [0, 1]");
  }
  if (!problems.empty()) {
    std::string msg = "invalid grounding policy:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorKind::Configuration, msg);
  }
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::Grounded: return "grounded";
    case Verdict::Ungeocodable: return "ungeocodable";
    case Verdict::SpatialHallucination: return "spatial_hallucination";
  }
  return "unknown";
}

std::vector<std::string> ValidationReport::flagged() const {
  std::vector<std::string> out;
  for (const auto& v : per_poi) {
    if (v.verdict != Verdict::Grounded) out.push_back(v.display_name);
  }
  return out;
}

namespace {

std::vector<StructuralCheck> structural_checks(const Story& story, std::size_t distinct) {
  std::vector<StructuralCheck> checks;
  checks.push_back({"min_pois", distinct >= story.spec.min_pois,
                    fmt::format("{} distinct POIs, at least {} required", distinct, story.spec.min_pois),
                    story.spec.min_pois, distinct});
  checks.push_back({"max_words", story.word_count <= story.spec.max_words,
                    fmt::format("{} words, at most {} allowed", story.word_count, story.spec.max_words),
                    story.spec.max_words, story.word_count});

  StructuralCheck markup_check{"markup", true, "all POI markup well-formed", 0, story.mentions.size()};
  try {
    if (extract_mentions(story.text) != story.mentions) {
      markup_check = {"markup", false, "mention list does not match the markup in the text", 0,
                      story.mentions.size()};
    }
  } catch (const ParseError& e) {
    markup_check = {"markup", false, e.what(), 0, story.mentions.size()};
  }
  checks.push_back(std::move(markup_check));
  return checks;
}

void finish(ValidationReport& report, const GroundingPolicy& policy) {
  std::size_t counted = 0;
  std::size_t grounded = 0;
  for (const auto& v : report.per_poi) {
    if (v.verdict == Verdict::Ungeocodable && !policy.require_geocode) continue;
    ++counted;
    if (v.verdict == Verdict::Grounded) ++grounded;
  }
  report.grounded_fraction = counted == 0 ? 1.0 : static_cast<double>(grounded) / static_cast<double>(counted);
  const bool structural_ok = std::all_of(report.structural.begin(), report.structural.end(),
                                         [](const auto& c) { return c.passed; });
  report.overall = structural_ok && report.grounded_fraction >= policy.min_grounded_fraction;
}

}  // namespace

ValidationReport validate_story(const Story& story, const GroundingContext& ctx,
                                const GroundingPolicy& policy, Gazetteer& gazetteer) {
  validate(policy);
  const bool trajectory_ctx = std::holds_alternative<TrajectoryGrounding>(ctx);
  if (trajectory_ctx != (story.spec.mode == StoryMode::SingleTrajectory)) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("grounding context does not match story mode {}", to_string(story.spec.mode)));
  }
  const auto& anchors = trajectory_ctx ? std::get<TrajectoryGrounding>(ctx).path
                                       : std::get<HotspotGrounding>(ctx).centers;
  if (anchors.empty()) {
    throw Error(ErrorKind::InvalidArgument,
                trajectory_ctx ? "grounding trajectory has no points" : "grounding needs at least one hotspot");
  }

  ValidationReport report;
  report.threshold_m = trajectory_ctx ? policy.trajectory_threshold_m : policy.hotspot_threshold_m;
  report.grounding_target = trajectory_ctx ? "trajectory" : "nearest hotspot";

  std::vector<std::string> names;
  std::unordered_set<std::string> seen;
  for (const auto& m : story.mentions) {
    if (seen.insert(normalize_name(m.display_name)).second) names.push_back(m.display_name);
  }

  const auto outcomes = gazetteer.bulk_geocode(names);
  for (const auto& name : names) {
    const auto& outcome = outcomes.at(name);
    if (outcome.status == GeocodeOutcome::Status::Failed) {
      throw Error(ErrorKind::Transport,
                  fmt::format("validation could not geocode '{}': {}", name, outcome.error->what()));
    }
    PoiVerdict v{name, Verdict::Ungeocodable, std::nullopt, std::nullopt};
    if (outcome.poi) {
      const GeoPoint loc = outcome.poi->location;
      double distance = std::numeric_limits<double>::infinity();
      if (trajectory_ctx) {
        distance = point_to_polyline_distance(loc, anchors);
      } else {
        std::vector<double> d(anchors.size());
        distances_from(loc, anchors, d);
        distance = *std::min_element(d.begin(), d.end());
      }
      v.location = loc;
      v.distance_m = distance;
      v.verdict = distance > report.threshold_m ? Verdict::SpatialHallucination : Verdict::Grounded;
    }
    report.per_poi.push_back(std::move(v));
  }

  report.structural = structural_checks(story, names.size());
  finish(report, policy);
  return report;
}

ValidationReport malformed_story_report(const NarrativeSpec& spec, const std::string& problem) {
  ValidationReport report;
  report.structural.push_back({"min_pois", spec.min_pois == 0,
                               fmt::format("0 distinct POIs, at least {} required", spec.min_pois),
                               spec.min_pois, 0});
  report.structural.push_back({"markup", false, problem, 0, 0});
  report.grounded_fraction = 1.0;
  report.overall = false;
  return report;
}

std::string feedback_text(const ValidationReport& report) {
  if (report.overall) throw Error(ErrorKind::InvalidArgument, "feedback_text called on a passing report");
  std::string out = "The previous draft failed validation. Revise it as follows:";
  auto it = std::back_inserter(out);
  for (const auto& v : report.per_poi) {
    if (v.verdict == Verdict::SpatialHallucination) {
      fmt::format_to(it,
                     "\n- Remove \"{}\": it lies {:.0f} m from the {}, beyond the {:.0f} m limit. "
                     "Use a place close to the data instead.",
                     v.display_name, *v.distance_m, report.grounding_target, report.threshold_m);
    } else if (v.verdict == Verdict::Ungeocodable) {
      fmt::format_to(it, "\n- Remove \"{}\": it could not be located in the gazetteer.", v.display_name);
    }
  }
  for (const auto& c : report.structural) {
    if (c.passed) continue;
    if (c.name == "min_pois") {
      fmt::format_to(it, "\n- Include at least {} distinct POIs (the draft had {}).", c.limit, c.actual);
    } else if (c.name == "max_words") {
      fmt::format_to(it, "\n- Use at most {} words (the draft had {}).", c.limit, c.actual);
    } else if (c.name == "markup") {
      fmt::format_to(it, "\n- Write every POI exactly as {} ({}).", markup("name"), c.detail);
    } else {
      fmt::format_to(it, "\n- Fix {}: {}.", c.name, c.detail);
    }
  }
  return out;
}

ordered_json report_to_json(const ValidationReport& report) {
  ordered_json j;
  j["overall"] = report.overall ? "pass" : "fail";
  j["grounded_fraction"] = report.grounded_fraction;
  j["grounding_target"] = report.grounding_target;
  j["threshold_m"] = report.threshold_m;
  j["per_poi"] = ordered_json::array();
  for (const auto& v : report.per_poi) {
    ordered_json row;
    row["name"] = v.display_name;
    row["verdict"] = to_string(v.verdict);
    row["distance_m"] = v.distance_m ? ordered_json(std::round(*v.distance_m * 10.0) / 10.0) : ordered_json(nullptr);
    if (v.location) {
      row["lon"] = v.location->lon;
      row["lat"] = v.location->lat;
    }
    j["per_poi"].push_back(std::move(row));
  }
  j["structural"] = ordered_json::array();
  for (const auto& c : report.structural) {
    j["structural"].push_back({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  }
  return j;
}

std::string report_summary(const ValidationReport& report) {
  std::string out = fmt::format("validation: {}\n", report.overall ? "PASS" : "FAIL");
  auto it = std::back_inserter(out);
  fmt::format_to(it, "grounded fraction: {:.3f} (threshold {:.0f} m to the {})\n",
                 report.grounded_fraction, report.threshold_m, report.grounding_target);
  for (const auto& v : report.per_poi) {
    if (v.distance_m) {
      fmt::format_to(it, "  [{}] {} ({:.0f} m)\n", to_string(v.verdict), v.display_name, *v.distance_m);
    } else {
      fmt::format_to(it, "  [{}] {}\n", to_string(v.verdict), v.display_name);
    }
  }
  for (const auto& c : report.structural) {
    fmt::format_to(it, "  check {}: {} - {}\n", c.name, c.passed ? "pass" : "fail", c.detail);
  }
  return out;
}

}  // namespace geostory
