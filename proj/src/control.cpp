#include "geostory/control.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

namespace geostory {

using nlohmann::ordered_json;

void validate(const StoryRequest& req) {
  std::vector<std::string> problems;
  if (req.dataset_path.empty()) problems.emplace_back("dataset_path is required");
  if (req.max_retries < 1) problems.emplace_back("max_retries must be >= 1");
  if (!(req.cell_size_m > 0.0)) problems.emplace_back("cell_size_m must be > 0");
  if (req.discovery_radius_m && !(*req.discovery_radius_m > 0.0)) {
    problems.emplace_back("discovery_radius_m must be > 0");
  }
  if (!(req.cluster_distance_m >= 0.0)) problems.emplace_back("cluster_distance_m must be >= 0");
  if (req.threads < 1) problems.emplace_back("threads must be >= 1");
  if (req.spec.mode == StoryMode::Heatmap) {
    if (!req.hotspot_k) {
      problems.emplace_back("hotspot_k is required in heatmap mode");
    } else if (*req.hotspot_k < 1) {
      problems.emplace_back("hotspot_k must be >= 1");
    }
    if (req.selection) problems.emplace_back("selection only applies to single_trajectory mode");
    if (req.bbox && !req.bbox->is_valid()) problems.emplace_back("bbox is not a valid WGS84 box");
  } else {
    if (!req.selection) problems.emplace_back("selection is required in single_trajectory mode");
    if (req.hotspot_k) problems.emplace_back("hotspot_k only applies to heatmap mode");
    if (req.trajectory_samples < 1) problems.emplace_back("trajectory_samples must be >= 1");
  }
  auto nested = [&](auto&& check) {
    try {
      check();
    } catch (const Error& e) {
      problems.emplace_back(e.what());
    }
  };
  nested([&] { validate(req.spec); });
  nested([&] { validate(req.policy); });
  nested([&] { validate(req.gazetteer); });
  if (!problems.empty()) {
    std::string msg = "invalid story request:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorKind::Configuration, msg);
  }
}

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::Ingest: return "ingest";
    case StepKind::Analytics: return "analytics";
    case StepKind::Discovery: return "discovery";
    case StepKind::Generate: return "generate";
    case StepKind::Validate: return "validate";
    case StepKind::Emit: return "emit";
  }
  return "?";
}

namespace {

double discovery_radius(const StoryRequest& req) {
  if (req.discovery_radius_m) return *req.discovery_radius_m;
  return req.spec.mode == StoryMode::Heatmap ? req.policy.hotspot_threshold_m
                                             : req.policy.trajectory_threshold_m;
}

}  // namespace

AgentPlan plan(const StoryRequest& req) {
  validate(req);
  const bool heat = req.spec.mode == StoryMode::Heatmap;
  AgentPlan p;
  p.steps.push_back({StepKind::Ingest,
                     {"parse_dataset"},
                     {{"dataset_path", req.dataset_path}, {"schema", to_string(req.schema)}}});
  if (heat) {
    ordered_json params = {{"cell_size_m", req.cell_size_m}, {"hotspot_k", *req.hotspot_k}};
    if (req.bbox) {
      params["bbox"] = {req.bbox->min_lon, req.bbox->min_lat, req.bbox->max_lon, req.bbox->max_lat};
    }
    p.steps.push_back({StepKind::Analytics, {"trip_endpoints", "build_grid", "top_hotspots", "summarize"},
                       std::move(params)});
    p.steps.push_back({StepKind::Discovery,
                       {"pois_near"},
                       {{"centers", "hotspots"}, {"radius_m", discovery_radius(req)}}});
  } else {
    p.steps.push_back({StepKind::Analytics,
                       {"select_trajectory", "digest"},
                       {{"selection", to_string(*req.selection)}}});
    p.steps.push_back({StepKind::Discovery,
                       {"sample_points", "pois_near"},
                       {{"centers", "trajectory_samples"},
                        {"samples", req.trajectory_samples},
                        {"radius_m", discovery_radius(req)}}});
  }
  p.steps.push_back({StepKind::Generate,
                     {"build_prompt", "complete"},
                     {{"min_pois", req.spec.min_pois}, {"max_words", req.spec.max_words}}});
  p.steps.push_back({StepKind::Validate,
                     {"validate_story"},
                     {{"threshold_m", heat ? req.policy.hotspot_threshold_m : req.policy.trajectory_threshold_m},
                      {"max_retries", req.max_retries}}});
  p.steps.push_back({StepKind::Emit,
                     {"emit_map", "render_geojson"},
                     {{"cluster_distance_m", req.cluster_distance_m}}});
  return p;
}

ordered_json plan_to_json(const AgentPlan& p) {
  ordered_json out = ordered_json::array();
  for (const auto& step : p.steps) {
    out.push_back({{"step", to_string(step.kind)}, {"operations", step.operations}, {"params", step.params}});
  }
  return out;
}

namespace {

class Tracer {
 public:
  explicit Tracer(std::vector<TraceEntry>& trace) : trace_(trace) {}

  // Runs fn, records its duration, and tags escaping errors with the step
  // name. fn returns the trace detail.
  template <typename Fn>
  void run(std::string_view step, std::size_t attempt, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = fn();
    } catch (const RetriesExhausted&) {
      throw;
    } catch (const Error& e) {
      record(step, attempt, std::string("error: ") + e.what(), start);
      throw Error(e.kind(), fmt::format("{}: {}", step, e.what()));
    }
    record(step, attempt, std::move(detail), start);
  }

  void note(std::string step, std::size_t attempt, std::string detail) {
    trace_.push_back({std::move(step), attempt, std::move(detail), 0.0});
  }

 private:
  void record(std::string_view step, std::size_t attempt, std::string detail,
              std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double, std::milli> took = std::chrono::steady_clock::now() - start;
    trace_.push_back({std::string(step), attempt, std::move(detail), took.count()});
  }

  std::vector<TraceEntry>& trace_;
};

}  // namespace

Analysis analyze(const StoryRequest& req, const Dataset& dataset) {
  Analysis a;
  a.ctx.region_name = req.region_name;
  if (req.spec.mode == StoryMode::Heatmap) {
    const auto endpoints = trip_endpoints(dataset);
    if (endpoints.empty()) throw Error(ErrorKind::InvalidArgument, "dataset has no trajectories");
    const auto grid = build_grid(endpoints, req.cell_size_m, req.bbox, req.threads);
    const auto hotspots = top_hotspots(grid, req.hotspot_k.value_or(1));
    if (hotspots.empty()) throw Error(ErrorKind::InvalidArgument, "no trip endpoints inside the grid bbox");
    a.ctx.data_summary = summarize_for_story(grid, hotspots);
    a.ctx.hero_description = "the busiest trip-endpoint cell";
    a.ctx.hero_location = hotspots.front().center;
    HotspotGrounding g;
    for (const auto& h : hotspots) g.centers.push_back(h.center);
    a.discovery_centers = g.centers;
    a.grounding = std::move(g);
    a.detail = fmt::format("{}x{} grid, {} hotspots, top count {}", grid.rows, grid.cols, hotspots.size(),
                           hotspots.front().count);
    return a;
  }
  const auto& chosen = select_trajectory(dataset, req.selection.value_or(LongestByPoints{}));
  a.ctx.data_summary = trajectory_digest(chosen);
  a.ctx.hero_description = fmt::format("taxi trip {}", chosen.id);
  a.ctx.hero_location = chosen.points.front();
  a.ctx.finale_location = chosen.points.back();
  a.discovery_centers = sample_points(chosen, req.trajectory_samples);
  a.grounding = TrajectoryGrounding{chosen.points};
  a.trajectory = chosen;
  a.detail = fmt::format("trajectory {} with {} points", chosen.id, chosen.points.size());
  return a;
}

StoryResult execute(const StoryRequest& req, StoryBackend& backend) {
  validate(req);
  Gazetteer gazetteer(req.gazetteer);
  return execute(req, backend, gazetteer);
}

StoryResult execute(const StoryRequest& req, StoryBackend& backend, Gazetteer& gazetteer) {
  StoryResult result;
  result.plan = plan(req);
  Tracer tracer(result.trace);

  Dataset dataset;
  tracer.run("ingest", 0, [&] {
    dataset = load_dataset(req.dataset_path, req.schema);
    return fmt::format("{} trajectories, {} skipped rows", dataset.trajectories.size(), dataset.skipped_rows);
  });

  Analysis analysis;
  tracer.run("analytics", 0, [&] {
    analysis = analyze(req, dataset);
    return analysis.detail;
  });
  StoryContext& ctx = analysis.ctx;
  const auto& discovery_centers = analysis.discovery_centers;
  const auto& grounding = analysis.grounding;
  const Trajectory* chosen = analysis.trajectory ? &*analysis.trajectory : nullptr;

  tracer.run("discovery", 0, [&] {
    const double radius = discovery_radius(req);
    std::set<std::string> seen;
    for (const auto& center : discovery_centers) {
      for (auto& poi : gazetteer.pois_near(center, radius)) {
        if (seen.insert(normalize_name(poi.name)).second) ctx.candidate_pois.push_back(std::move(poi));
      }
    }
    return fmt::format("{} candidate POIs from {} centers within {} m", ctx.candidate_pois.size(),
                       discovery_centers.size(), radius);
  });

  NarrativeSpec spec = req.spec;
  std::optional<Story> story;
  ValidationReport report;
  for (std::size_t attempt = 1; attempt <= req.max_retries; ++attempt) {
    result.attempts = attempt;
    story.reset();
    std::string malformed;
    tracer.run("generate", attempt, [&] {
      const std::string prompt = build_prompt(spec, ctx);
      result.prompts.push_back(prompt);
      try {
        story = generate_story(GenerationRequest{prompt, spec, ctx}, backend);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::MalformedStory && e.kind() != ErrorKind::Parse) throw;
        malformed = e.what();
        return fmt::format("backend {} returned an unusable story: {}", backend.id(), malformed);
      }
      return fmt::format("backend {}: {} words, {} mentions", backend.id(), story->word_count,
                         story->mentions.size());
    });

    tracer.run("validate", attempt, [&] {
      report = story ? validate_story(*story, grounding, req.policy, gazetteer)
                     : malformed_story_report(spec, malformed);
      return fmt::format("{}: grounded fraction {:.3f}, {} flagged", report.overall ? "pass" : "fail",
                         report.grounded_fraction, report.flagged().size());
    });
    if (report.overall) break;

    if (attempt < req.max_retries) {
      auto feedback = feedback_text(report);
      tracer.note("feedback", attempt, feedback);
      spec.extra_instructions.push_back(std::move(feedback));
    }
  }

  if (!report.overall) {
    throw RetriesExhausted(fmt::format("story failed validation after {} attempts", result.attempts),
                           std::move(story), std::move(report), std::move(result.trace),
                           std::move(result.prompts), result.attempts);
  }

  tracer.run("emit", 0, [&] {
    std::vector<POI> grounded;
    for (const auto& v : report.per_poi) {
      if (v.verdict == Verdict::Grounded && v.location) {
        grounded.push_back(POI{v.display_name, *v.location, {}, PoiSource::Fixture, {}});
      }
    }
    result.map = emit_map(grounded, chosen, req.cluster_distance_m);
    return fmt::format("{} markers for {} POIs", result.map.markers().size(), result.map.legend.size());
  });

  result.story = std::move(*story);
  result.report = std::move(report);
  return result;
}

ordered_json trace_to_json(const std::vector<TraceEntry>& trace, bool with_timings) {
  ordered_json out = ordered_json::array();
  for (const auto& t : trace) {
    ordered_json e = {{"step", t.step}, {"attempt", t.attempt}, {"detail", t.detail}};
    if (with_timings) e["duration_ms"] = t.duration_ms;
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, fmt::format("cannot write {}", path.string()));
  out << content;
  out.flush();
  if (!out) throw Error(ErrorKind::Io, fmt::format("write failed: {}", path.string()));
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

std::string prompts_json(const std::vector<std::string>& prompts) {
  return ordered_json(prompts).dump(2) + "\n";
}

}  // namespace

void write_bundle(const std::filesystem::path& dir, const StoryResult& result) {
  prepare_dir(dir);
  write_text(dir / "story.txt", result.story.text + "\n");
  write_text(dir / "story.json", story_sidecar(result.story).dump(2) + "\n");
  write_text(dir / "report.json", report_to_json(result.report).dump(2) + "\n");
  write_text(dir / "report.txt", report_summary(result.report) + "\n");
  write_text(dir / "map.geojson", render_geojson(result.map));
  write_text(dir / "map.html", render_html(result.map, result.story.spec.mode == StoryMode::Heatmap
                                                           ? "Trip endpoint story"
                                                           : "Trajectory story"));
  write_text(dir / "trace.json", trace_to_json(result.trace).dump(2) + "\n");
  write_text(dir / "plan.json", plan_to_json(result.plan).dump(2) + "\n");
  write_text(dir / "prompts.json", prompts_json(result.prompts));
}

void write_failure_bundle(const std::filesystem::path& dir, const RetriesExhausted& failure) {
  prepare_dir(dir);
  if (failure.story) {
    write_text(dir / "story.txt", failure.story->text + "\n");
    write_text(dir / "story.json", story_sidecar(*failure.story).dump(2) + "\n");
  }
  write_text(dir / "report.json", report_to_json(failure.report).dump(2) + "\n");
  write_text(dir / "report.txt", report_summary(failure.report) + "\n");
  write_text(dir / "trace.json", trace_to_json(failure.trace).dump(2) + "\n");
  write_text(dir / "prompts.json", prompts_json(failure.prompts));
}

}  // namespace geostory
