#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geostory/error.hpp"
#include "geostory/geo.hpp"

namespace geostory {

enum class PoiSource { Remote, Fixture, Cache };
std::string_view to_string(PoiSource source);

struct POI {
  std::string name;  // canonical display form
  GeoPoint location;
  std::string category;
  PoiSource source = PoiSource::Fixture;
  std::string blurb;

  friend bool operator==(const POI&, const POI&) = default;
};

struct GazetteerConfig {
  std::string base_url;                    // e.g. http://localhost:8080
  std::optional<BoundingBox> region_bias;  // restricts remote results
  double rate_limit = 1.0;                 // remote requests per second
  bool offline_only = true;
  std::string fixture_path;
  std::string cache_path;                  // empty: no persistent cache
  unsigned max_concurrency = 4;            // parallel remote lookups in bulk_geocode
  int timeout_s = 10;
};

// Throws Error(Configuration) listing every violated invariant.
void validate(const GazetteerConfig& cfg);

// Matching key: case-folded, trimmed, whitespace collapsed, Latin diacritics
// stripped ("São Bento" and "sao  bento" collide). Display forms are kept
// separately by the callers.
std::string normalize_name(std::string_view name);

// Offline source of truth: UTF-8 CSV with columns
// name,aliases,lon,lat,category,blurb where aliases are '|'-separated.
class FixtureStore {
 public:
  static FixtureStore load(const std::filesystem::path& path);
  static FixtureStore from_entries(std::vector<POI> entries,
                                   const std::vector<std::vector<std::string>>& aliases = {});

  const POI* find(std::string_view name) const;
  std::span<const POI> entries() const { return entries_; }
  std::span<const GeoPoint> locations() const { return locations_; }

 private:
  void index(std::size_t entry, std::string_view name);

  std::vector<POI> entries_;
  std::vector<GeoPoint> locations_;
  std::unordered_map<std::string, std::size_t> by_key_;
};

// Append-only JSON-lines journal of remote answers. Each record is written
// with a single O_APPEND write so concurrent processes never interleave
// partial lines; on load, torn or malformed lines are ignored and the last
// record for a key wins.
class CacheJournal {
 public:
  CacheJournal() = default;
  explicit CacheJournal(std::filesystem::path path);

  std::optional<POI> lookup(const std::string& key) const;
  void append(const std::string& key, const POI& poi);
  std::vector<POI> all() const;

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::map<std::string, POI> entries_;
};

// Serializes remote calls to at most `rate` per second across threads.
class RateLimiter {
 public:
  explicit RateLimiter(double rate);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_;
  std::chrono::steady_clock::time_point next_;
};

struct GeocodeOutcome {
  enum class Status { Found, NotFound, Failed };
  Status status = Status::NotFound;
  std::optional<POI> poi;
  std::optional<Error> error;  // set when Failed
};

// The discovery agent. Lookup order: cache, fixture, remote (skipped when
// offline_only). Remote answers are appended to the cache.
//
// Remote protocol (Nominatim-style, see docs/protocols.md):
//   GET {base_url}/search?q=<name>&format=jsonv2&limit=5[&viewbox=..&bounded=1]
//   GET {base_url}/nearby?lon=<x>&lat=<y>&radius=<m>&format=jsonv2
// Both answer a JSON array of {name?, display_name?, lon, lat, category?, type?}.
//
// All methods are safe to call concurrently.
class Gazetteer {
 public:
  explicit Gazetteer(GazetteerConfig cfg);

  const GazetteerConfig& config() const { return cfg_; }

  // nullopt when no source knows the name. Throws Error(Transport) on
  // network failure and Error(Protocol) on an unusable remote payload.
  std::optional<POI> geocode(std::string_view name);

  // Every known POI within radius_m of center, nearest first, name breaking
  // ties.
  std::vector<POI> pois_near(const GeoPoint& center, double radius_m);

  // One outcome per input name; errors are captured per name.
  std::map<std::string, GeocodeOutcome> bulk_geocode(std::span<const std::string> names);

  std::size_t remote_requests() const { return remote_requests_.load(); }

 private:
  std::string cache_key(std::string_view name) const;
  std::optional<POI> remote_search(std::string_view name);
  std::vector<POI> remote_nearby(const GeoPoint& center, double radius_m);
  std::string http_get(const std::string& path_and_query);

  GazetteerConfig cfg_;
  FixtureStore fixture_;
  CacheJournal cache_;
  std::unique_ptr<RateLimiter> limiter_;
  std::atomic<std::size_t> remote_requests_{0};
};

}  // namespace geostory
