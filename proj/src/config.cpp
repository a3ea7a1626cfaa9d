#include "geostory/config.hpp"

#include <fstream>
#include <functional>
#include <istream>

#include <fmt/format.h>

#include "detail/text.hpp"
#include "geostory/error.hpp"

namespace geostory {

KeyValues parse_key_values(std::istream& in, const std::filesystem::path& base_dir) {
  KeyValues kv;
  std::string line;
  std::size_t offset = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(fmt::format("config line {}: expected 'key = value'", line_no), line_offset);
    }
    const auto key = detail::trim(body.substr(0, eq));
    if (key.empty()) throw ParseError(fmt::format("config line {}: empty key", line_no), line_offset);
    kv[std::string(key)] = {std::string(detail::trim(body.substr(eq + 1))), base_dir};
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open config file {}", path.string()));
  return parse_key_values(in, path.parent_path());
}

void apply_override(KeyValues& kv, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto key = eq == std::string::npos ? std::string_view{} : detail::trim(std::string_view(assignment).substr(0, eq));
  if (key.empty()) {
    throw Error(ErrorKind::Configuration, fmt::format("override '{}' is not key=value", assignment));
  }
  kv[std::string(key)] = {std::string(detail::trim(std::string_view(assignment).substr(eq + 1))), {}};
}

BackendKind parse_backend(std::string_view tag) {
  if (tag == "template") return BackendKind::Template;
  if (tag == "http") return BackendKind::Http;
  if (tag == "scripted") return BackendKind::Scripted;
  throw Error(ErrorKind::Configuration,
              fmt::format("unknown backend '{}' (expected template, http or scripted)", tag));
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::Template: return "template";
    case BackendKind::Http: return "http";
    case BackendKind::Scripted: return "scripted";
  }
  return "?";
}

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"dataset", "trajectory file (path)"},
      {"schema", "kaggle_porto | point_list"},
      {"mode", "heatmap | single_trajectory"},
      {"selection", "longest_by_points | longest_by_length | id:<trip id> (single_trajectory)"},
      {"hotspot_k", "number of hotspots (heatmap)"},
      {"bbox", "min_lon,min_lat,max_lon,max_lat grid extent (heatmap)"},
      {"cell_size_m", "heat grid cell size in meters"},
      {"threads", "worker threads for grid counting"},
      {"max_retries", "generation attempts before giving up"},
      {"discovery_radius_m", "POI search radius around each discovery center"},
      {"trajectory_samples", "discovery centers sampled along the trajectory"},
      {"cluster_distance_m", "map marker merge distance"},
      {"region_name", "place name used in the story"},
      {"max_words", "word cap"},
      {"min_pois", "minimum distinct POI mentions"},
      {"audience", "target audience phrase"},
      {"tone", "tone phrase"},
      {"include_blurbs", "true | false"},
      {"trajectory_threshold_m", "grounding distance to the trajectory"},
      {"hotspot_threshold_m", "grounding distance to the nearest hotspot"},
      {"require_geocode", "true | false"},
      {"min_grounded_fraction", "0..1"},
      {"gazetteer.offline", "true | false"},
      {"gazetteer.fixture", "fixture CSV (path)"},
      {"gazetteer.cache", "cache journal (path)"},
      {"gazetteer.base_url", "remote gazetteer root URL"},
      {"gazetteer.region_bias", "min_lon,min_lat,max_lon,max_lat"},
      {"gazetteer.rate_limit", "remote requests per second"},
      {"gazetteer.max_concurrency", "parallel remote lookups"},
      {"gazetteer.timeout_s", "remote timeout in seconds"},
      {"backend", "template | http | scripted"},
      {"backend.endpoint", "HTTP completion endpoint URL"},
      {"backend.token_env", "environment variable holding the bearer token"},
      {"backend.temperature", "sampling temperature sent to the endpoint"},
      {"backend.timeout_s", "endpoint timeout in seconds"},
      {"backend.script", "scripted responses file (path)"},
      {"output_dir", "result bundle directory (path)"},
      {"verbose", "true | false"},
  };
  return keys;
}

namespace {

bool parse_bool(std::string_view s) {
  const auto v = detail::ascii_lower(s);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw Error(ErrorKind::Configuration, fmt::format("'{}' is not a boolean", s));
}

double parse_number(std::string_view s) {
  const auto v = detail::parse_double(s);
  if (!v) throw Error(ErrorKind::Configuration, fmt::format("'{}' is not a number", s));
  return *v;
}

std::size_t parse_count(std::string_view s) {
  const auto v = detail::parse_int<std::size_t>(s);
  if (!v) throw Error(ErrorKind::Configuration, fmt::format("'{}' is not a non-negative integer", s));
  return *v;
}

BoundingBox parse_bbox(std::string_view s) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto piece = s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    parts.push_back(parse_number(detail::trim(piece)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (parts.size() != 4) {
    throw Error(ErrorKind::Configuration, fmt::format("'{}' is not min_lon,min_lat,max_lon,max_lat", s));
  }
  BoundingBox box{parts[0], parts[1], parts[2], parts[3]};
  if (!box.is_valid()) throw Error(ErrorKind::Configuration, fmt::format("'{}' is not a valid bbox", s));
  return box;
}

std::string resolve(const ConfigValue& v) {
  if (v.value.empty()) return v.value;
  std::filesystem::path p(v.value);
  if (p.is_absolute() || v.base_dir.empty()) return p.string();
  return (v.base_dir / p).lexically_normal().string();
}

}  // namespace

RunConfig to_run_config(const KeyValues& kv) {
  RunConfig rc;
  auto& req = rc.request;
  req.gazetteer.fixture_path = GEOSTORY_DEFAULT_FIXTURE;
  std::optional<std::size_t> hotspot_k;

  using Setter = std::function<void(const ConfigValue&)>;
  const std::map<std::string, Setter> setters = {
      {"dataset", [&](const ConfigValue& v) { req.dataset_path = resolve(v); }},
      {"schema", [&](const ConfigValue& v) { req.schema = parse_schema(v.value); }},
      {"mode", [&](const ConfigValue& v) { req.spec.mode = parse_mode(v.value); }},
      {"selection", [&](const ConfigValue& v) { req.selection = parse_selection(v.value); }},
      {"hotspot_k", [&](const ConfigValue& v) { hotspot_k = parse_count(v.value); }},
      {"bbox", [&](const ConfigValue& v) { req.bbox = parse_bbox(v.value); }},
      {"cell_size_m", [&](const ConfigValue& v) { req.cell_size_m = parse_number(v.value); }},
      {"threads", [&](const ConfigValue& v) { req.threads = static_cast<unsigned>(parse_count(v.value)); }},
      {"max_retries", [&](const ConfigValue& v) { req.max_retries = parse_count(v.value); }},
      {"discovery_radius_m", [&](const ConfigValue& v) { req.discovery_radius_m = parse_number(v.value); }},
      {"trajectory_samples", [&](const ConfigValue& v) { req.trajectory_samples = parse_count(v.value); }},
      {"cluster_distance_m", [&](const ConfigValue& v) { req.cluster_distance_m = parse_number(v.value); }},
      {"region_name", [&](const ConfigValue& v) { req.region_name = v.value; }},
      {"max_words", [&](const ConfigValue& v) { req.spec.max_words = parse_count(v.value); }},
      {"min_pois", [&](const ConfigValue& v) { req.spec.min_pois = parse_count(v.value); }},
      {"audience", [&](const ConfigValue& v) { req.spec.audience = v.value; }},
      {"tone", [&](const ConfigValue& v) { req.spec.tone = v.value; }},
      {"include_blurbs", [&](const ConfigValue& v) { req.spec.include_blurbs = parse_bool(v.value); }},
      {"trajectory_threshold_m", [&](const ConfigValue& v) { req.policy.trajectory_threshold_m = parse_number(v.value); }},
      {"hotspot_threshold_m", [&](const ConfigValue& v) { req.policy.hotspot_threshold_m = parse_number(v.value); }},
      {"require_geocode", [&](const ConfigValue& v) { req.policy.require_geocode = parse_bool(v.value); }},
      {"min_grounded_fraction", [&](const ConfigValue& v) { req.policy.min_grounded_fraction = parse_number(v.value); }},
      {"gazetteer.offline", [&](const ConfigValue& v) { req.gazetteer.offline_only = parse_bool(v.value); }},
      {"gazetteer.fixture", [&](const ConfigValue& v) { req.gazetteer.fixture_path = resolve(v); }},
      {"gazetteer.cache", [&](const ConfigValue& v) { req.gazetteer.cache_path = resolve(v); }},
      {"gazetteer.base_url", [&](const ConfigValue& v) { req.gazetteer.base_url = v.value; }},
      {"gazetteer.region_bias", [&](const ConfigValue& v) { req.gazetteer.region_bias = parse_bbox(v.value); }},
      {"gazetteer.rate_limit", [&](const ConfigValue& v) { req.gazetteer.rate_limit = parse_number(v.value); }},
      {"gazetteer.max_concurrency", [&](const ConfigValue& v) { req.gazetteer.max_concurrency = static_cast<unsigned>(parse_count(v.value)); }},
      {"gazetteer.timeout_s", [&](const ConfigValue& v) { req.gazetteer.timeout_s = static_cast<int>(parse_count(v.value)); }},
      {"backend", [&](const ConfigValue& v) { rc.backend = parse_backend(v.value); }},
      {"backend.endpoint", [&](const ConfigValue& v) { rc.http.endpoint = v.value; }},
      {"backend.token_env", [&](const ConfigValue& v) { rc.http.token_env = v.value; }},
      {"backend.temperature", [&](const ConfigValue& v) { rc.http.temperature = parse_number(v.value); }},
      {"backend.timeout_s", [&](const ConfigValue& v) { rc.http.timeout_s = static_cast<int>(parse_count(v.value)); }},
      {"backend.script", [&](const ConfigValue& v) { rc.script_path = resolve(v); }},
      {"output_dir", [&](const ConfigValue& v) { rc.output_dir = resolve(v); }},
      {"verbose", [&](const ConfigValue& v) { rc.verbose = parse_bool(v.value); }},
  };

  std::vector<std::string> problems;
  for (const auto& [key, value] : kv) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      problems.push_back(fmt::format("unknown key '{}'", key));
      continue;
    }
    try {
      it->second(value);
    } catch (const Error& e) {
      problems.push_back(fmt::format("{}: {}", key, e.what()));
    }
  }
  if (req.spec.mode == StoryMode::Heatmap) {
    req.hotspot_k = hotspot_k.value_or(5);
  } else {
    req.hotspot_k = hotspot_k;
    if (!req.selection) req.selection = LongestByPoints{};
  }
  if (rc.backend == BackendKind::Http && rc.http.endpoint.empty()) {
    problems.emplace_back("backend.endpoint is required for the http backend");
  }
  if (rc.backend == BackendKind::Scripted && rc.script_path.empty()) {
    problems.emplace_back("backend.script is required for the scripted backend");
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorKind::Configuration, msg);
  }
  return rc;
}

}  // namespace geostory
