#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "geostory/config.hpp"
#include "geostory/control.hpp"
#include "geostory/error.hpp"
#include "geostory/simd/kernels.hpp"
#include "geostory/testing/harness.hpp"

namespace gs = geostory;

namespace {

enum Exit : int {
  kOk = 0,
  kUnexpected = 1,
  kConfiguration = 2,
  kParse = 3,
  kInfrastructure = 4,
  kValidationFailed = 5,
};

int exit_code(gs::ErrorKind kind) {
  switch (kind) {
    case gs::ErrorKind::InvalidArgument:
    case gs::ErrorKind::Configuration:
    case gs::ErrorKind::NotFound:
      return kConfiguration;
    case gs::ErrorKind::Parse:
    case gs::ErrorKind::MalformedStory:
      return kParse;
    case gs::ErrorKind::Io:
    case gs::ErrorKind::Transport:
    case gs::ErrorKind::Protocol:
      return kInfrastructure;
    case gs::ErrorKind::RetriesExhausted:
      return kValidationFailed;
  }
  return kUnexpected;
}

struct Globals {
  std::string config;
  std::vector<std::string> overrides;
  std::string output_dir;
  bool offline = false;
  bool verbose = false;
};

// Options shared by the commands that need a run configuration. Each flag is
// sugar for one --set override.
struct RunFlags {
  std::string dataset, schema, mode, selection, backend, script, fixture, bbox;
  std::size_t hotspot_k = 0;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--dataset", f.dataset, "Trajectory file");
  cmd->add_option("--schema", f.schema, "kaggle_porto | point_list");
  cmd->add_option("--mode", f.mode, "heatmap | single_trajectory");
  cmd->add_option("--selection", f.selection, "longest_by_points | longest_by_length | id:<trip id>");
  cmd->add_option("--hotspots", f.hotspot_k, "Number of hotspots (heatmap mode)");
  cmd->add_option("--bbox", f.bbox, "min_lon,min_lat,max_lon,max_lat");
  cmd->add_option("--fixture", f.fixture, "Gazetteer fixture CSV");
}

gs::RunConfig load_run_config(const Globals& g, const RunFlags& f) {
  gs::KeyValues kv;
  if (!g.config.empty()) kv = gs::load_key_values(g.config);
  auto set = [&](const std::string& key, const std::string& value) {
    if (!value.empty()) gs::apply_override(kv, key + "=" + value);
  };
  set("dataset", f.dataset);
  set("schema", f.schema);
  set("mode", f.mode);
  set("selection", f.selection);
  set("bbox", f.bbox);
  set("gazetteer.fixture", f.fixture);
  set("backend", f.backend);
  set("backend.script", f.script);
  if (f.hotspot_k > 0) set("hotspot_k", std::to_string(f.hotspot_k));
  for (const auto& o : g.overrides) gs::apply_override(kv, o);
  if (!g.output_dir.empty()) set("output_dir", g.output_dir);
  if (g.offline) set("gazetteer.offline", "true");
  if (g.verbose) set("verbose", "true");
  return gs::to_run_config(kv);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw gs::Error(gs::ErrorKind::Io, fmt::format("cannot open {}", path));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << content)) throw gs::Error(gs::ErrorKind::Io, fmt::format("cannot write {}", path.string()));
}

std::unique_ptr<gs::StoryBackend> make_backend(const gs::RunConfig& rc) {
  switch (rc.backend) {
    case gs::BackendKind::Template: return std::make_unique<gs::TemplateBackend>();
    case gs::BackendKind::Http: return std::make_unique<gs::HttpStoryBackend>(rc.http);
    case gs::BackendKind::Scripted:
      return std::make_unique<gs::testing::ScriptedBackend>(gs::testing::load_script(rc.script_path));
  }
  return nullptr;
}

void log(const gs::RunConfig& rc, const std::string& line) {
  if (rc.verbose) std::cerr << line << '\n';
}

int cmd_ingest(const std::string& dataset, const std::string& schema, const std::string& export_path,
               const std::string& selection) {
  const auto ds = gs::load_dataset(dataset, gs::parse_schema(schema));
  fmt::print("dataset: {}\n", ds.source_path);
  fmt::print("rows: {}\n", ds.total_rows());
  fmt::print("trajectories: {}\n", ds.trajectories.size());
  fmt::print("skipped_rows: {}\n", ds.skipped_rows);
  fmt::print("endpoints: {}\n", gs::trip_endpoints(ds).size());
  if (!export_path.empty()) {
    const auto& t = gs::select_trajectory(ds, gs::parse_selection(selection));
    std::ofstream out(export_path, std::ios::binary | std::ios::trunc);
    if (!out) throw gs::Error(gs::ErrorKind::Io, fmt::format("cannot write {}", export_path));
    gs::write_point_list(out, t);
    fmt::print("exported: {} ({} points) -> {}\n", t.id, t.points.size(), export_path);
  }
  return kOk;
}

int cmd_heatmap(const gs::RunConfig& rc) {
  const auto& req = rc.request;
  const auto ds = gs::load_dataset(req.dataset_path, req.schema);
  const auto endpoints = gs::trip_endpoints(ds);
  if (endpoints.empty()) throw gs::Error(gs::ErrorKind::InvalidArgument, "dataset has no trajectories");
  const auto grid = gs::build_grid(endpoints, req.cell_size_m, req.bbox, req.threads);
  const auto hotspots = gs::top_hotspots(grid, req.hotspot_k.value_or(5));
  const auto summary = gs::summarize_for_story(grid, hotspots);
  const std::filesystem::path dir = rc.output_dir;
  std::ostringstream csv;
  gs::write_grid_csv(csv, grid);
  write_file(dir / "heat.csv", csv.str());
  write_file(dir / "hotspots.txt", summary + "\n");
  fmt::print("{}\n", summary);
  log(rc, fmt::format("wrote {} and {}", (dir / "heat.csv").string(), (dir / "hotspots.txt").string()));
  return kOk;
}

int cmd_story(const gs::RunConfig& rc) {
  auto backend = make_backend(rc);
  log(rc, fmt::format("kernels: {}", gs::simd::to_string(gs::simd::active_kernels().isa)));
  try {
    const auto result = gs::execute(rc.request, *backend);
    gs::write_bundle(rc.output_dir, result);
    fmt::print("{}\n", gs::report_summary(result.report));
    fmt::print("attempts: {}\nbundle: {}\n", result.attempts, rc.output_dir);
    if (rc.verbose) {
      for (const auto& t : result.trace) {
        std::cerr << fmt::format("[{}#{}] {:.1f} ms  {}\n", t.step, t.attempt, t.duration_ms, t.detail);
      }
    }
    return kOk;
  } catch (const gs::RetriesExhausted& failure) {
    gs::write_failure_bundle(rc.output_dir, failure);
    fmt::print("{}\n", gs::report_summary(failure.report));
    std::cerr << "geostory: " << failure.what() << " (report in " << rc.output_dir << ")\n";
    return kValidationFailed;
  }
}

gs::Dataset load_for(const gs::RunConfig& rc) {
  if (rc.request.dataset_path.empty()) throw gs::Error(gs::ErrorKind::Configuration, "dataset is required");
  return gs::load_dataset(rc.request.dataset_path, rc.request.schema);
}

gs::Story read_story(const std::string& path, const gs::NarrativeSpec& spec) {
  auto text = read_file(path);
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw gs::ParseError(fmt::format("story file {} is empty", path), 0);
  return gs::parse_story(std::move(text), spec, "file:" + path);
}

int cmd_validate(const gs::RunConfig& rc, const std::string& story_path) {
  const auto story = read_story(story_path, rc.request.spec);
  const auto analysis = gs::analyze(rc.request, load_for(rc));
  gs::Gazetteer gazetteer(rc.request.gazetteer);
  const auto report = gs::validate_story(story, analysis.grounding, rc.request.policy, gazetteer);
  const std::filesystem::path dir = rc.output_dir;
  write_file(dir / "report.json", gs::report_to_json(report).dump(2) + "\n");
  write_file(dir / "report.txt", gs::report_summary(report) + "\n");
  fmt::print("{}\n", gs::report_summary(report));
  return report.overall ? kOk : kValidationFailed;
}

int cmd_map(const gs::RunConfig& rc, const std::string& story_path) {
  const auto story = read_story(story_path, rc.request.spec);
  std::optional<gs::Trajectory> trajectory;
  if (rc.request.spec.mode == gs::StoryMode::SingleTrajectory && !rc.request.dataset_path.empty()) {
    trajectory = gs::analyze(rc.request, load_for(rc)).trajectory;
  }
  gs::Gazetteer gazetteer(rc.request.gazetteer);
  std::vector<gs::POI> pois;
  std::set<std::string> seen;
  for (const auto& m : story.mentions) {
    if (!seen.insert(gs::normalize_name(m.display_name)).second) continue;
    if (auto poi = gazetteer.geocode(m.display_name)) {
      poi->name = m.display_name;
      pois.push_back(std::move(*poi));
    } else {
      std::cerr << "geostory: no location for \"" << m.display_name << "\", left off the map\n";
    }
  }
  const auto doc = gs::emit_map(pois, trajectory ? &*trajectory : nullptr, rc.request.cluster_distance_m);
  const std::filesystem::path dir = rc.output_dir;
  write_file(dir / "map.geojson", gs::render_geojson(doc));
  write_file(dir / "map.html", gs::render_html(doc, rc.request.region_name + " story map"));
  fmt::print("markers: {}\nlegend: {}\nbundle: {}\n", doc.markers().size(), doc.legend.size(), rc.output_dir);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data stories from taxi trajectories, grounded against a gazetteer"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "Key/value run configuration file");
  app.add_option("--set", g.overrides, "Override a configuration key (key=value), repeatable");
  app.add_option("--output-dir", g.output_dir, "Result directory");
  app.add_flag("--offline", g.offline, "Never contact the remote gazetteer");
  app.add_flag("--verbose", g.verbose, "Log steps to stderr");

  std::string ingest_dataset, ingest_schema = "kaggle_porto", export_path, export_selection = "longest_by_points";
  auto* ingest = app.add_subcommand("ingest", "Parse a dataset and print its statistics");
  ingest->add_option("--dataset", ingest_dataset, "Trajectory file")->required();
  ingest->add_option("--schema", ingest_schema, "kaggle_porto | point_list");
  ingest->add_option("--export-point-list", export_path, "Write one selected trajectory as point_list CSV");
  ingest->add_option("--selection", export_selection, "Trajectory to export");

  RunFlags heat_flags;
  auto* heatmap = app.add_subcommand("heatmap", "Build the endpoint grid and print the hotspots");
  add_run_flags(heatmap, heat_flags);

  RunFlags story_flags;
  auto* story = app.add_subcommand("story", "Run the full plan and write a result bundle");
  add_run_flags(story, story_flags);
  story->add_option("--backend", story_flags.backend, "template | http | scripted");
  story->add_option("--script", story_flags.script, "Scripted backend responses");

  RunFlags validate_flags;
  std::string validate_story_path;
  auto* validate = app.add_subcommand("validate", "Check a story file against a dataset");
  add_run_flags(validate, validate_flags);
  validate->add_option("story", validate_story_path, "Story text with [[POI: name]] markup")->required();

  RunFlags map_flags;
  std::string map_story_path;
  auto* map = app.add_subcommand("map", "Draw the POIs mentioned in a story file");
  add_run_flags(map, map_flags);
  map->add_option("story", map_story_path, "Story text with [[POI: name]] markup")->required();

  bool list_keys = false;
  auto* keys = app.add_subcommand("keys", "List configuration keys");
  keys->callback([&] { list_keys = true; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfiguration;
  }

  try {
    if (list_keys) {
      for (const auto& [key, help] : gs::config_keys()) fmt::print("{:<28} {}\n", key, help);
      return kOk;
    }
    if (*ingest) return cmd_ingest(ingest_dataset, ingest_schema, export_path, export_selection);
    if (*heatmap) return cmd_heatmap(load_run_config(g, heat_flags));
    if (*story) return cmd_story(load_run_config(g, story_flags));
    if (*validate) return cmd_validate(load_run_config(g, validate_flags), validate_story_path);
    if (*map) return cmd_map(load_run_config(g, map_flags), map_story_path);
  } catch (const gs::Error& e) {
    std::cerr << "geostory: " << gs::to_string(e.kind()) << " error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "geostory: unexpected error: " << e.what() << '\n';
    return kUnexpected;
  }
  return kUnexpected;
}
