#include "geostory/gazetteer.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "detail/http.hpp"
#include "detail/text.hpp"

namespace geostory {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(PoiSource source) {
  switch (source) {
    case PoiSource::Remote: return "remote";
    case PoiSource::Fixture: return "fixture";
    case PoiSource::Cache: return "cache";
  }
  return "unknown";
}

void validate(const GazetteerConfig& cfg) {
  std::vector<std::string> problems;
  if (cfg.offline_only && cfg.fixture_path.empty()) {
    problems.emplace_back("offline gazetteer needs a fixture path");
  }
  if (!cfg.offline_only && cfg.base_url.empty()) {
    problems.emplace_back("online gazetteer needs a base URL");
  }
  if (!(cfg.rate_limit > 0.0)) problems.emplace_back("gazetteer rate limit must be > 0");
  if (cfg.max_concurrency == 0) problems.emplace_back("gazetteer concurrency must be >= 1");
  if (cfg.region_bias && !cfg.region_bias->is_valid()) {
    problems.emplace_back("gazetteer region bias is not a valid bbox");
  }
  if (!problems.empty()) {
    std::string msg = "invalid gazetteer configuration:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw Error(ErrorKind::Configuration, msg);
  }
}

// ---------------------------------------------------------------------------
// Name normalization

namespace {

// Base letters for U+0100..U+017F. '*' marks U+0132/0133 (ij), '#' U+0152/0153 (oe).
constexpr std::string_view kLatinExtendedA =
    "aaaaaa" "cccccccc" "dddd" "eeeeeeeeee" "gggggggg" "hhhh" "iiiiiiiiii" "**" "jj" "kkk"
    "llllllllll" "nnnnnnnnn" "oooooo" "##" "rrrrrr" "ssssssss" "tttttt" "uuuuuuuuuuuu" "ww"
    "yyy" "zzzzzz" "s";
static_assert(kLatinExtendedA.size() == 0x80);

void append_folded(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    char c = static_cast<char>(cp);
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    out.push_back(c);
    return;
  }
  if (cp >= 0xC0 && cp <= 0xFF) {
    static constexpr std::string_view kLatin1 =
        "aaaaaa#ceeeeiiiidnooooo*ouuuuy$saaaaaa#ceeeeiiiidnooooo/ouuuuy$y";
    const char base = kLatin1[cp - 0xC0];
    switch (base) {
      case '#': out += "ae"; return;
      case '$': out += "th"; return;
      case '*': out.push_back('x'); return;  // multiplication sign
      case '/': out.push_back('/'); return;  // division sign
      default: break;
    }
    if (cp == 0xDF) {
      out += "ss";
      return;
    }
    out.push_back(base);
    return;
  }
  if (cp >= 0x100 && cp <= 0x17F) {
    const char base = kLatinExtendedA[cp - 0x100];
    if (base == '*') {
      out += "ij";
    } else if (base == '#') {
      out += "oe";
    } else {
      out.push_back(base);
    }
    return;
  }
  // Combining diacritical marks are dropped; everything else is kept as UTF-8.
  if (cp >= 0x300 && cp <= 0x36F) return;
  if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::string normalize_name(std::string_view name) {
  std::string folded;
  folded.reserve(name.size());
  for (std::size_t i = 0; i < name.size();) {
    const auto b0 = static_cast<unsigned char>(name[i]);
    char32_t cp = b0;
    std::size_t len = 1;
    if (b0 >= 0xF0 && i + 3 < name.size()) {
      cp = ((b0 & 0x07u) << 18) | ((name[i + 1] & 0x3Fu) << 12) | ((name[i + 2] & 0x3Fu) << 6) |
           (name[i + 3] & 0x3Fu);
      len = 4;
    } else if (b0 >= 0xE0 && i + 2 < name.size()) {
      cp = ((b0 & 0x0Fu) << 12) | ((name[i + 1] & 0x3Fu) << 6) | (name[i + 2] & 0x3Fu);
      len = 3;
    } else if (b0 >= 0xC0 && i + 1 < name.size()) {
      cp = ((b0 & 0x1Fu) << 6) | (name[i + 1] & 0x3Fu);
      len = 2;
    }
    append_folded(folded, cp);
    i += len;
  }

  std::string out;
  bool pending_space = false;
  for (char c : folded) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fixture store

void FixtureStore::index(std::size_t entry, std::string_view name) {
  const auto key = normalize_name(name);
  if (key.empty()) return;
  const auto [it, inserted] = by_key_.emplace(key, entry);
  if (!inserted && it->second != entry) {
    throw Error(ErrorKind::Parse, fmt::format("fixture name '{}' is declared for two places ('{}' and '{}')",
                                              name, entries_[it->second].name, entries_[entry].name));
  }
}

FixtureStore FixtureStore::from_entries(std::vector<POI> entries,
                                        const std::vector<std::vector<std::string>>& aliases) {
  FixtureStore store;
  store.entries_ = std::move(entries);
  for (std::size_t i = 0; i < store.entries_.size(); ++i) {
    auto& poi = store.entries_[i];
    poi.source = PoiSource::Fixture;
    require_valid(poi.location);
    store.locations_.push_back(poi.location);
    store.index(i, poi.name);
    if (i < aliases.size()) {
      for (const auto& alias : aliases[i]) store.index(i, alias);
    }
  }
  return store;
}

FixtureStore FixtureStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open POI fixture '{}'", path.string()));

  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!detail::read_csv_record(in, fields, line)) {
    throw ParseError(fmt::format("POI fixture '{}' is empty", path.string()), 0);
  }
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    column.emplace(detail::ascii_lower(detail::trim(fields[i])), i);
  }
  for (const char* required : {"name", "aliases", "lon", "lat", "category", "blurb"}) {
    if (!column.contains(required)) {
      throw ParseError(fmt::format("POI fixture '{}' is missing column {}", path.string(), required), 0);
    }
  }

  std::vector<POI> entries;
  std::vector<std::vector<std::string>> aliases;
  while (detail::read_csv_record(in, fields, line)) {
    if (detail::is_blank_record(fields)) continue;
    if (fields.size() != column.size()) {
      throw ParseError(fmt::format("POI fixture '{}' line {}: expected {} fields, got {}",
                                   path.string(), line, column.size(), fields.size()),
                       line);
    }
    const auto lon = detail::parse_double(fields[column["lon"]]);
    const auto lat = detail::parse_double(fields[column["lat"]]);
    const auto name = detail::trim(fields[column["name"]]);
    if (!lon || !lat || name.empty() || !is_valid({*lon, *lat})) {
      throw ParseError(fmt::format("POI fixture '{}' line {}: bad name or coordinates",
                                   path.string(), line),
                       line);
    }
    POI poi;
    poi.name = std::string(name);
    poi.location = {*lon, *lat};
    poi.category = std::string(detail::trim(fields[column["category"]]));
    poi.blurb = std::string(detail::trim(fields[column["blurb"]]));
    entries.push_back(std::move(poi));

    std::vector<std::string> names;
    std::string_view rest = fields[column["aliases"]];
    while (!rest.empty()) {
      const auto bar = rest.find('|');
      const auto alias = detail::trim(rest.substr(0, bar));
      if (!alias.empty()) names.emplace_back(alias);
      if (bar == std::string_view::npos) break;
      rest.remove_prefix(bar + 1);
    }
    aliases.push_back(std::move(names));
  }
  return from_entries(std::move(entries), aliases);
}

const POI* FixtureStore::find(std::string_view name) const {
  const auto it = by_key_.find(normalize_name(name));
  return it == by_key_.end() ? nullptr : &entries_[it->second];
}

// ---------------------------------------------------------------------------
// Cache journal

namespace {

std::optional<std::pair<std::string, POI>> parse_cache_line(const std::string& line) {
  auto doc = json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
  try {
    POI poi;
    poi.name = doc.at("name").get<std::string>();
    poi.location = {doc.at("lon").get<double>(), doc.at("lat").get<double>()};
    poi.category = doc.value("category", "");
    poi.blurb = doc.value("blurb", "");
    poi.source = PoiSource::Cache;
    if (poi.name.empty() || !is_valid(poi.location)) return std::nullopt;
    return std::make_pair(doc.at("key").get<std::string>(), std::move(poi));
  } catch (const json::exception&) {
    return std::nullopt;
  }
}

}  // namespace

CacheJournal::CacheJournal(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_);
  std::string line;
  while (std::getline(in, line)) {
    if (auto entry = parse_cache_line(line)) entries_[entry->first] = std::move(entry->second);
  }
}

std::optional<POI> CacheJournal::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<POI> CacheJournal::all() const {
  std::lock_guard lock(mutex_);
  std::vector<POI> out;
  for (const auto& [key, poi] : entries_) out.push_back(poi);
  return out;
}

void CacheJournal::append(const std::string& key, const POI& poi) {
  POI stored = poi;
  stored.source = PoiSource::Cache;

  ordered_json record;
  record["key"] = key;
  record["name"] = poi.name;
  record["lon"] = poi.location.lon;
  record["lat"] = poi.location.lat;
  record["category"] = poi.category;
  record["blurb"] = poi.blurb;
  record["resolved_at"] = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                                      fmt::gmtime(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now())));
  const std::string line = record.dump() + "\n";

  std::lock_guard lock(mutex_);
  entries_[key] = std::move(stored);
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw Error(ErrorKind::Io, fmt::format("cannot open gazetteer cache '{}'", path_.string()));
  const auto written = ::write(fd, line.data(), line.size());
  ::close(fd);
  if (written != static_cast<ssize_t>(line.size())) {
    throw Error(ErrorKind::Io, fmt::format("short write to gazetteer cache '{}'", path_.string()));
  }
}

// ---------------------------------------------------------------------------
// Rate limiter

RateLimiter::RateLimiter(double rate)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / rate))),
      next_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

// ---------------------------------------------------------------------------
// Gazetteer

namespace {

GazetteerConfig validated(GazetteerConfig cfg) {
  validate(cfg);
  return cfg;
}

}  // namespace

Gazetteer::Gazetteer(GazetteerConfig cfg)
    : cfg_(validated(std::move(cfg))),
      fixture_(cfg_.fixture_path.empty() ? FixtureStore{} : FixtureStore::load(cfg_.fixture_path)),
      cache_(cfg_.cache_path),
      limiter_(std::make_unique<RateLimiter>(cfg_.rate_limit)) {}

std::string Gazetteer::cache_key(std::string_view name) const {
  std::string key = normalize_name(name) + "|";
  if (cfg_.region_bias) {
    const auto& b = *cfg_.region_bias;
    key += fmt::format("{},{},{},{}", b.min_lon, b.min_lat, b.max_lon, b.max_lat);
  }
  return key;
}

std::optional<POI> Gazetteer::geocode(std::string_view name) {
  const auto trimmed = detail::trim(name);
  if (trimmed.empty()) throw Error(ErrorKind::InvalidArgument, "geocode: empty name");
  const auto key = cache_key(trimmed);
  if (auto hit = cache_.lookup(key)) return hit;
  if (const POI* hit = fixture_.find(trimmed)) return *hit;
  if (cfg_.offline_only) return std::nullopt;
  auto remote = remote_search(trimmed);
  if (remote) cache_.append(key, *remote);
  return remote;
}

std::string Gazetteer::http_get(const std::string& path_and_query) {
  limiter_->acquire();
  ++remote_requests_;
  const auto res = detail::http_get(cfg_.base_url, path_and_query, {}, cfg_.timeout_s);
  if (res.status == 429 || res.status >= 500) {
    throw Error(ErrorKind::Transport,
                fmt::format("gazetteer answered HTTP {} for {}", res.status, path_and_query));
  }
  if (res.status != 200) {
    throw Error(ErrorKind::Protocol,
                fmt::format("gazetteer answered HTTP {} for {}", res.status, path_and_query));
  }
  return res.body;
}

namespace {

double coordinate(const json& v, const char* field) {
  const auto& c = v.at(field);
  if (c.is_number()) return c.get<double>();
  if (c.is_string()) {
    if (auto d = detail::parse_double(c.get<std::string>())) return *d;
  }
  throw Error(ErrorKind::Protocol, fmt::format("gazetteer candidate has a non-numeric {}", field));
}

// Parses the candidate array shared by /search and /nearby.
std::vector<POI> parse_candidates(const std::string& body) {
  const auto doc = json::parse(body, nullptr, false);
  if (doc.is_discarded() || !doc.is_array()) {
    throw Error(ErrorKind::Protocol, "gazetteer payload is not a JSON array");
  }
  std::vector<POI> out;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("lon") || !item.contains("lat")) {
      throw Error(ErrorKind::Protocol, "gazetteer candidate lacks lon/lat");
    }
    POI poi;
    poi.location = {coordinate(item, "lon"), coordinate(item, "lat")};
    if (!is_valid(poi.location)) throw Error(ErrorKind::Protocol, "gazetteer candidate out of range");
    if (item.contains("name") && item["name"].is_string()) {
      poi.name = item["name"].get<std::string>();
    } else if (item.contains("display_name") && item["display_name"].is_string()) {
      const auto display = item["display_name"].get<std::string>();
      poi.name = display.substr(0, display.find(','));
    }
    for (const char* field : {"type", "category", "class"}) {
      if (item.contains(field) && item[field].is_string()) {
        poi.category = item[field].get<std::string>();
        break;
      }
    }
    poi.source = PoiSource::Remote;
    out.push_back(std::move(poi));
  }
  return out;
}

}  // namespace

std::optional<POI> Gazetteer::remote_search(std::string_view name) {
  std::string query = fmt::format("/search?q={}&format=jsonv2&limit=5", detail::percent_encode(name));
  if (cfg_.region_bias) {
    const auto& b = *cfg_.region_bias;
    query += fmt::format("&viewbox={},{},{},{}&bounded=1", b.min_lon, b.max_lat, b.max_lon, b.min_lat);
  }
  for (auto& candidate : parse_candidates(http_get(query))) {
    if (cfg_.region_bias && !cfg_.region_bias->contains(candidate.location)) continue;
    candidate.name = std::string(name);
    return candidate;
  }
  return std::nullopt;
}

std::vector<POI> Gazetteer::remote_nearby(const GeoPoint& center, double radius_m) {
  const auto query =
      fmt::format("/nearby?lon={}&lat={}&radius={}&format=jsonv2", center.lon, center.lat, radius_m);
  std::vector<POI> out;
  for (auto& candidate : parse_candidates(http_get(query))) {
    if (candidate.name.empty()) continue;
    if (cfg_.region_bias && !cfg_.region_bias->contains(candidate.location)) continue;
    cache_.append(cache_key(candidate.name), candidate);
    out.push_back(std::move(candidate));
  }
  return out;
}

std::vector<POI> Gazetteer::pois_near(const GeoPoint& center, double radius_m) {
  if (!(radius_m >= 0.0)) throw Error(ErrorKind::InvalidArgument, "pois_near: radius must be >= 0");
  require_valid(center);

  // Fixture first, then cache, then remote; the first source to name a place wins.
  std::vector<POI> pool(fixture_.entries().begin(), fixture_.entries().end());
  for (auto& poi : cache_.all()) pool.push_back(std::move(poi));
  if (!cfg_.offline_only) {
    for (auto& poi : remote_nearby(center, radius_m)) pool.push_back(std::move(poi));
  }

  std::vector<GeoPoint> locations;
  locations.reserve(pool.size());
  for (const auto& poi : pool) locations.push_back(poi.location);
  std::vector<double> distance(pool.size());
  distances_from(center, locations, distance);

  std::vector<std::pair<double, std::size_t>> hits;
  std::unordered_map<std::string, bool> seen;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!seen.emplace(normalize_name(pool[i].name), true).second) continue;
    if (distance[i] <= radius_m) hits.emplace_back(distance[i], i);
  }
  std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return pool[a.second].name < pool[b.second].name;
  });
  std::vector<POI> out;
  out.reserve(hits.size());
  for (const auto& [d, i] : hits) out.push_back(pool[i]);
  return out;
}

std::map<std::string, GeocodeOutcome> Gazetteer::bulk_geocode(std::span<const std::string> names) {
  std::vector<std::string> unique(names.begin(), names.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());

  std::vector<GeocodeOutcome> outcomes(unique.size());
  auto resolve = [&](std::size_t i) {
    auto& out = outcomes[i];
    try {
      out.poi = geocode(unique[i]);
      out.status = out.poi ? GeocodeOutcome::Status::Found : GeocodeOutcome::Status::NotFound;
    } catch (const Error& e) {
      out.status = GeocodeOutcome::Status::Failed;
      out.error = e;
    }
  };

  const unsigned workers = cfg_.offline_only ? 1u : std::min<unsigned>(cfg_.max_concurrency, static_cast<unsigned>(unique.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < unique.size(); ++i) resolve(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < unique.size(); i = next++) resolve(i);
      });
    }
  }

  std::map<std::string, GeocodeOutcome> result;
  for (std::size_t i = 0; i < unique.size(); ++i) result.emplace(unique[i], std::move(outcomes[i]));
  return result;
}

}  // namespace geostory
