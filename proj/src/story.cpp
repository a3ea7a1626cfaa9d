#include "geostory/story.hpp"

#include <algorithm>
#include <cstdlib>
#include <unordered_set>

#include <fmt/format.h>

#include "detail/http.hpp"
#include "detail/text.hpp"
#include "geostory/error.hpp"

namespace geostory {

using nlohmann::json;
using nlohmann::ordered_json;

StoryMode parse_mode(std::string_view tag) {
  if (tag == "heatmap") return StoryMode::Heatmap;
  if (tag == "single_trajectory") return StoryMode::SingleTrajectory;
  throw Error(ErrorKind::Configuration,
              fmt::format("unknown story mode '{}' (expected heatmap or single_trajectory)", tag));
}

std::string_view to_string(StoryMode mode) {
  return mode == StoryMode::Heatmap ? "heatmap" : "single_trajectory";
}

void validate(const NarrativeSpec& spec) {
  if (spec.max_words == 0) throw Error(ErrorKind::Configuration, "max_words must be > 0");
}

std::string markup(std::string_view name) {
  return fmt::format("{} {}{}", kMarkupOpen, name, kMarkupClose);
}

// ---------------------------------------------------------------------------
// Markup parsing

std::vector<Mention> extract_mentions(std::string_view text) {
  std::vector<Mention> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("[[", pos);
    const auto stray = text.find(kMarkupClose, pos);
    if (stray != std::string_view::npos && stray < open) {
      throw ParseError("']]' without a matching '[[POI:'", stray);
    }
    if (open == std::string_view::npos) break;
    if (text.substr(open, kMarkupOpen.size()) != kMarkupOpen) {
      throw ParseError("markup must have the form [[POI: name]]", open);
    }
    const auto body = open + kMarkupOpen.size();
    const auto close = text.find(kMarkupClose, body);
    if (close == std::string_view::npos) throw ParseError("unclosed POI markup", open);
    const auto nested = text.find("[[", body);
    if (nested < close) throw ParseError("nested POI markup", nested);
    const auto name = detail::trim(text.substr(body, close - body));
    if (name.empty()) throw ParseError("POI markup without a name", open);
    out.push_back({std::string(name), {open, close + kMarkupClose.size()}});
    pos = close + kMarkupClose.size();
  }
  return out;
}

std::size_t count_words(std::string_view text) {
  // Same tokens as strip_markup(text): the padding inside the delimiters goes
  // with them, so "x[[POI: a]]y" is one word.
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
  std::size_t words = 0;
  bool in_word = false;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.substr(i, kMarkupOpen.size()) == kMarkupOpen) {
      i += kMarkupOpen.size();
      while (i < text.size() && space(text[i])) ++i;
      continue;
    }
    if (text.substr(i, kMarkupClose.size()) == kMarkupClose) {
      i += kMarkupClose.size();
      continue;
    }
    if (space(text[i])) {
      std::size_t j = i;
      while (j < text.size() && space(text[j])) ++j;
      if (text.substr(j, kMarkupClose.size()) != kMarkupClose) in_word = false;
      i = j;
      continue;
    }
    if (!in_word) {
      in_word = true;
      ++words;
    }
    ++i;
  }
  return words;
}

PlainText strip_markup(std::string_view text) {
  PlainText plain;
  std::size_t last = 0;
  for (const auto& m : extract_mentions(text)) {
    plain.text.append(text.substr(last, m.span.begin - last));
    const std::size_t begin = plain.text.size();
    plain.text += m.display_name;
    plain.mentions.push_back({m.display_name, {begin, plain.text.size()}});
    last = m.span.end;
  }
  plain.text.append(text.substr(last));
  return plain;
}

std::string apply_markup(const PlainText& plain) {
  std::string out;
  std::size_t last = 0;
  for (const auto& m : plain.mentions) {
    out.append(plain.text, last, m.span.begin - last);
    out += markup(m.display_name);
    last = m.span.end;
  }
  out.append(plain.text, last);
  return out;
}

// ---------------------------------------------------------------------------
// Prompt

std::string build_prompt(const NarrativeSpec& spec, const StoryContext& ctx) {
  const std::string region = ctx.region_name.empty() ? "the study area" : ctx.region_name;
  std::string out;
  auto it = std::back_inserter(out);

  if (spec.mode == StoryMode::Heatmap) {
    fmt::format_to(it,
                   "Input: counts of taxi trip end points in {}, binned on a regular grid. "
                   "The densest cells are summarized below.\n",
                   region);
  } else {
    fmt::format_to(it,
                   "Input: one taxi trip in {}, recorded as GPS fixes in (lon, lat) order. "
                   "Refer to the streets and places the route really comes close to.\n",
                   region);
  }
  fmt::format_to(it, "\nData summary:\n{}", ctx.data_summary);
  if (!ctx.data_summary.empty() && ctx.data_summary.back() != '\n') out.push_back('\n');

  fmt::format_to(it, "\nCandidate points of interest near the data (name | lon, lat | category | note):\n");
  if (ctx.candidate_pois.empty()) fmt::format_to(it, "(none discovered)\n");
  for (const auto& poi : ctx.candidate_pois) {
    fmt::format_to(it, "- {} | {:.4f}, {:.4f} | {} | {}\n", poi.name, poi.location.lon,
                   poi.location.lat, poi.category, poi.blurb);
  }

  fmt::format_to(it, "\nNarrate the data in a cinematic style.\n");
  fmt::format_to(it, "Write for {}.\n", spec.audience);
  fmt::format_to(it, "Tone: {}.\n", spec.tone);
  fmt::format_to(it,
                 "Cast places from the data as characters: one hero that carries the story, "
                 "sidekicks that support it, antagonists that work against it.\n");
  fmt::format_to(it, "Structure the story in three acts: setup, confrontation, resolution.\n");
  fmt::format_to(it, "Name at least {} POIs, each wrapped as {}.\n", spec.min_pois, markup("name"));
  if (spec.include_blurbs) fmt::format_to(it, "Add a short fact about each POI.\n");
  fmt::format_to(it, "Only name places that the data supports; do not invent distant landmarks.\n");
  fmt::format_to(it, "Keep it to at most {} words.\n", spec.max_words);

  if (!spec.extra_instructions.empty()) {
    fmt::format_to(it, "\nAdditional instructions:\n");
    for (const auto& extra : spec.extra_instructions) fmt::format_to(it, "{}\n", extra);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Template backend

namespace {

struct Cast {
  const POI* hero = nullptr;
  std::vector<const POI*> middle;
  const POI* finale = nullptr;
};

std::string join_names(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += (i + 1 == items.size()) ? " and " : ", ";
    out += items[i];
  }
  return out;
}

class TemplateWriter {
 public:
  TemplateWriter(const StoryContext& ctx, const NarrativeSpec& spec) : ctx_(ctx), spec_(spec) {
    region_ = ctx.region_name.empty() ? "the city" : ctx.region_name;
    const bool heat = spec.mode == StoryMode::Heatmap;
    hero_ = !ctx.hero_description.empty() ? ctx.hero_description
            : heat                         ? "the busiest cluster of trip endpoints"
                                           : "a taxi trip";
  }

  std::string render(const Cast& cast, const std::vector<std::string>& blurbs) const {
    const bool heat = spec_.mode == StoryMode::Heatmap;
    std::size_t slot = 0;
    auto named = [&](const POI* poi) {
      std::string s = markup(poi->name);
      if (!blurbs[slot].empty()) s += " (" + blurbs[slot] + ")";
      ++slot;
      return s;
    };

    std::string out;
    if (cast.hero == nullptr) {
      out = fmt::format("Act I. In {}, the data introduces its hero: {}.", region_, hero_);
    } else if (heat) {
      out = fmt::format("Act I. In {}, the hero is {} around {}.", region_, hero_, named(cast.hero));
    } else {
      out = fmt::format("Act I. In {}, {} sets out from {}.", region_, hero_, named(cast.hero));
    }

    if (cast.middle.empty()) {
      out += heat ? " Act II. The challenges play out between the busy cells."
                  : " Act II. The route winds on through the streets.";
    } else {
      std::vector<std::string> items;
      for (const POI* poi : cast.middle) items.push_back(named(poi));
      out += fmt::format(fmt::runtime(heat ? " Act II. Demand spreads to {}." : " Act II. The route passes {}."),
                         join_names(items));
    }

    if (cast.finale == nullptr) {
      out += heat ? " Act III. The pattern resolves around its hero."
                  : " Act III. The ride comes to an end.";
    } else {
      out += fmt::format(fmt::runtime(heat ? " Act III. The story resolves at {}, the far edge of the pattern."
                              : " Act III. The ride ends at {}."),
                         named(cast.finale));
    }
    return out;
  }

 private:
  const StoryContext& ctx_;
  const NarrativeSpec& spec_;
  std::string region_;
  std::string hero_;
};

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

std::string template_backend(const StoryContext& ctx, const NarrativeSpec& spec) {
  validate(spec);

  std::vector<const POI*> pois;
  std::unordered_set<std::string> seen;
  for (const auto& poi : ctx.candidate_pois) {
    if (seen.insert(normalize_name(poi.name)).second) pois.push_back(&poi);
  }
  if (pois.size() < spec.min_pois) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("template story needs at least {} candidate POIs but only {} were "
                            "discovered; widen the discovery radius",
                            spec.min_pois, pois.size()));
  }

  if (!pois.empty()) {
    const GeoPoint anchor = ctx.hero_location.value_or(pois.front()->location);
    std::vector<std::pair<double, const POI*>> keyed;
    for (const POI* poi : pois) keyed.emplace_back(haversine_distance(anchor, poi->location), poi);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return a.second->name < b.second->name;
    });
    for (std::size_t i = 0; i < keyed.size(); ++i) pois[i] = keyed[i].second;
  }

  // Cast of the first m POIs: hero, finale, then the middle in distance order.
  auto cast_of = [&](std::size_t m) {
    Cast cast;
    if (m == 0) return cast;
    cast.hero = pois[0];
    std::vector<const POI*> rest(pois.begin() + 1, pois.begin() + static_cast<std::ptrdiff_t>(m));
    if (rest.empty()) return cast;
    auto finale_it = std::prev(rest.end());
    if (ctx.finale_location) {
      finale_it = std::min_element(rest.begin(), rest.end(), [&](const POI* a, const POI* b) {
        return haversine_distance(*ctx.finale_location, a->location) <
               haversine_distance(*ctx.finale_location, b->location);
      });
    }
    cast.finale = *finale_it;
    rest.erase(finale_it);
    cast.middle = std::move(rest);
    return cast;
  };

  const TemplateWriter writer(ctx, spec);
  std::size_t m = pois.size();
  std::vector<std::string> blurbs(m);
  std::string text = writer.render(cast_of(m), blurbs);
  while (count_words(text) > spec.max_words && m > spec.min_pois) {
    --m;
    blurbs.assign(m, "");
    text = writer.render(cast_of(m), blurbs);
  }
  if (count_words(text) > spec.max_words) {
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("a {}-word budget cannot fit {} POIs; raise max_words or lower min_pois",
                            spec.max_words, spec.min_pois));
  }

  if (spec.include_blurbs) {
    const Cast cast = cast_of(m);
    std::vector<const POI*> order;
    if (cast.hero) order.push_back(cast.hero);
    order.insert(order.end(), cast.middle.begin(), cast.middle.end());
    if (cast.finale) order.push_back(cast.finale);
    for (std::size_t slot = 0; slot < order.size(); ++slot) {
      const auto words = split_words(order[slot]->blurb);
      if (words.empty()) continue;
      const std::size_t room = spec.max_words - count_words(text);
      if (room < 3) break;
      std::string blurb;
      const std::size_t take = std::min(room, words.size());
      for (std::size_t w = 0; w < take; ++w) blurb += (w ? " " : "") + words[w];
      if (take < words.size()) blurb += "...";
      blurbs[slot] = blurb;
      text = writer.render(cast, blurbs);
    }
  }
  return text;
}

// ---------------------------------------------------------------------------
// HTTP backend

HttpStoryBackend::HttpStoryBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.endpoint.empty()) throw Error(ErrorKind::Configuration, "HTTP story backend needs an endpoint");
}

std::string HttpStoryBackend::complete(const GenerationRequest& request) {
  ordered_json body;
  body["prompt"] = request.prompt;
  body["max_tokens"] = request.spec.max_words * 4;
  body["temperature"] = cfg_.temperature;

  detail::HttpHeaders headers;
  if (const char* token = std::getenv(cfg_.token_env.c_str()); token && *token) {
    headers.emplace_back("Authorization", std::string("Bearer ") + token);
  }
  const auto res = detail::http_post(cfg_.endpoint, "", body.dump(), "application/json", headers,
                                     cfg_.timeout_s);
  if (res.status == 429 || res.status >= 500) {
    throw Error(ErrorKind::Transport, fmt::format("story backend answered HTTP {}", res.status));
  }
  if (res.status != 200) {
    throw Error(ErrorKind::Protocol, fmt::format("story backend answered HTTP {}", res.status));
  }
  const auto doc = json::parse(res.body, nullptr, false);
  if (doc.is_object()) {
    if (doc.contains("text") && doc["text"].is_string()) return doc["text"].get<std::string>();
    if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty()) {
      const auto& choice = doc["choices"][0];
      if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
      if (choice.contains("message") && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        return choice["message"]["content"].get<std::string>();
      }
    }
  }
  throw Error(ErrorKind::Protocol, "story backend response has no text field");
}

// ---------------------------------------------------------------------------

Story parse_story(std::string text, const NarrativeSpec& spec, std::string backend_id) {
  Story story;
  story.mentions = extract_mentions(text);
  story.word_count = count_words(text);
  story.text = std::move(text);
  story.spec = spec;
  story.backend_id = std::move(backend_id);
  return story;
}

Story generate_story(const GenerationRequest& request, StoryBackend& backend) {
  Story story = parse_story(backend.complete(request), request.spec, backend.id());
  if (story.mentions.empty() && request.spec.min_pois > 0) {
    throw Error(ErrorKind::MalformedStory, "backend story contains no [[POI: name]] markup");
  }
  return story;
}

ordered_json spec_to_json(const NarrativeSpec& spec) {
  ordered_json j;
  j["mode"] = to_string(spec.mode);
  j["audience"] = spec.audience;
  j["max_words"] = spec.max_words;
  j["min_pois"] = spec.min_pois;
  j["tone"] = spec.tone;
  j["include_blurbs"] = spec.include_blurbs;
  j["extra_instructions"] = spec.extra_instructions;
  return j;
}

ordered_json story_sidecar(const Story& story) {
  ordered_json j;
  j["backend"] = story.backend_id;
  j["word_count"] = story.word_count;
  j["mention_count"] = story.mentions.size();
  j["mentions"] = ordered_json::array();
  for (const auto& m : story.mentions) {
    j["mentions"].push_back({{"name", m.display_name}, {"begin", m.span.begin}, {"end", m.span.end}});
  }
  j["spec"] = spec_to_json(story.spec);
  return j;
}

}  // namespace geostory
