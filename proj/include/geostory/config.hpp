#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "geostory/control.hpp"
#include "geostory/story.hpp"

namespace geostory {

// One `key = value` entry. Paths in values are resolved against base_dir.
struct ConfigValue {
  std::string value;
  std::filesystem::path base_dir;
};

using KeyValues = std::map<std::string, ConfigValue>;

// Flat key/value document: one `key = value` per line, '#' starts a comment
// line, blank lines ignored, later keys replace earlier ones. Throws
// ParseError pointing at the offending line.
KeyValues parse_key_values(std::istream& in, const std::filesystem::path& base_dir = {});
KeyValues load_key_values(const std::filesystem::path& path);

// "key=value" override from the command line; paths resolve against the
// working directory.
void apply_override(KeyValues& kv, const std::string& assignment);

enum class BackendKind { Template, Http, Scripted };
BackendKind parse_backend(std::string_view tag);
std::string_view to_string(BackendKind kind);

// Everything `geostory story` needs. Secrets never come from here: the HTTP
// backend token is read from the environment variable named by token_env.
struct RunConfig {
  StoryRequest request;
  BackendKind backend = BackendKind::Template;
  HttpBackendConfig http;
  std::string script_path;  // scripted backend: responses separated by "%%" lines
  std::string output_dir = "out";
  bool verbose = false;
};

// Throws Error(Configuration) for unknown keys or bad values (all listed).
RunConfig to_run_config(const KeyValues& kv);

// Keys understood by to_run_config, with a one-line description each.
const std::vector<std::pair<std::string, std::string>>& config_keys();

}  // namespace geostory
