#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "geostory/gazetteer.hpp"
#include "geostory/geo.hpp"

namespace geostory {

enum class StoryMode { Heatmap, SingleTrajectory };

StoryMode parse_mode(std::string_view tag);
std::string_view to_string(StoryMode mode);

// The constraint contract handed to story generation.
struct NarrativeSpec {
  StoryMode mode = StoryMode::Heatmap;
  std::string audience = "a professional analyst";
  std::size_t max_words = 150;
  std::size_t min_pois = 15;
  std::string tone = "neutral professional";
  bool include_blurbs = false;
  std::vector<std::string> extra_instructions;  // validation feedback lands here

  friend bool operator==(const NarrativeSpec&, const NarrativeSpec&) = default;
};

// Throws Error(Configuration) when max_words is zero.
void validate(const NarrativeSpec& spec);

// Byte offsets into the story text, half-open.
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Mention {
  std::string display_name;
  CharSpan span;  // covers the whole "[[POI: name]]" markup
  friend bool operator==(const Mention&, const Mention&) = default;
};

struct Story {
  std::string text;
  std::vector<Mention> mentions;
  std::size_t word_count = 0;
  NarrativeSpec spec;
  std::string backend_id;
};

struct StoryContext {
  std::string data_summary;
  std::vector<POI> candidate_pois;
  std::string region_name;
  std::string hero_description;           // e.g. "the busiest endpoint cell"
  std::optional<GeoPoint> hero_location;  // top hotspot or trip origin
  std::optional<GeoPoint> finale_location;  // trip destination
};

// POI markup replacing colored highlighting.
inline constexpr std::string_view kMarkupOpen = "[[POI:";
inline constexpr std::string_view kMarkupClose = "]]";
std::string markup(std::string_view name);

// Every [[POI: name]] span in document order, names trimmed. Throws ParseError
// (with the byte offset) for unclosed, nested, empty, or non-POI "[[...]]"
// spans and for a stray "]]".
std::vector<Mention> extract_mentions(std::string_view text);

// Markup delimiters removed, then whitespace-separated tokens counted.
std::size_t count_words(std::string_view text);

struct PlainText {
  std::string text;
  std::vector<Mention> mentions;  // spans cover the bare name in `text`
};

PlainText strip_markup(std::string_view text);

// Inverse of strip_markup for canonical "[[POI: name]]" markup.
std::string apply_markup(const PlainText& plain);

std::string build_prompt(const NarrativeSpec& spec, const StoryContext& ctx);

struct GenerationRequest {
  std::string prompt;
  const NarrativeSpec& spec;
  const StoryContext& ctx;
};

class StoryBackend {
 public:
  virtual ~StoryBackend() = default;

  virtual std::string id() const = 0;

  // True when one instance may serve concurrent requests.
  virtual bool shareable() const = 0;

  // Raw story text with markup. Throws Error(Transport) on network failure.
  virtual std::string complete(const GenerationRequest& request) = 0;
};

// Deterministic three-act story built only from the context.
// Preconditions: ctx.candidate_pois has at least spec.min_pois distinct
// names, and spec.max_words fits the names of min_pois POIs plus the act
// scaffolding. Throws Error(InvalidArgument) otherwise; the message for too
// few candidates asks for a wider discovery radius.
std::string template_backend(const StoryContext& ctx, const NarrativeSpec& spec);

class TemplateBackend final : public StoryBackend {
 public:
  std::string id() const override { return "template"; }
  bool shareable() const override { return true; }
  std::string complete(const GenerationRequest& request) override {
    return template_backend(request.ctx, request.spec);
  }
};

// Generic text-completion endpoint:
//   POST {endpoint} {"prompt": ..., "max_tokens": n, "temperature": t}
//   -> {"text": "..."}  (or {"choices": [{"text": "..."}]})
// The bearer token is read from the environment variable named token_env.
struct HttpBackendConfig {
  std::string endpoint;
  std::string token_env = "GEOSTORY_BACKEND_TOKEN";
  double temperature = 0.7;
  int timeout_s = 60;
};

class HttpStoryBackend final : public StoryBackend {
 public:
  explicit HttpStoryBackend(HttpBackendConfig cfg);
  std::string id() const override { return "http:" + cfg_.endpoint; }
  bool shareable() const override { return true; }
  std::string complete(const GenerationRequest& request) override;

 private:
  HttpBackendConfig cfg_;
};

// Calls the backend and parses its output. Throws Error(MalformedStory) when
// the text carries no markup while spec.min_pois > 0, and ParseError for
// broken markup.
Story generate_story(const GenerationRequest& request, StoryBackend& backend);

// Builds a Story from existing text (e.g. a file pasted from a hosted model).
Story parse_story(std::string text, const NarrativeSpec& spec, std::string backend_id);

// Sidecar written next to story.txt: mentions with spans, word count, spec.
nlohmann::ordered_json story_sidecar(const Story& story);
nlohmann::ordered_json spec_to_json(const NarrativeSpec& spec);

}  // namespace geostory
