#pragma once

// Shared helpers and independent oracles for the test binaries. The oracles
// deliberately avoid the library's kernels: distances go through 3-D chord
// geometry, polylines through dense sampling, clustering through BFS.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "geostory/geo.hpp"
#include "geostory/heat.hpp"

namespace support {

inline std::filesystem::path source_dir() { return GEOSTORY_SOURCE_DIR; }
inline std::filesystem::path fixture_path() { return source_dir() / "data" / "porto_pois.csv"; }
inline std::filesystem::path golden_dir() { return source_dir() / "tests" / "golden"; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << content;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::mt19937_64 rng(std::random_device{}());
  auto dir = std::filesystem::temp_directory_path() /
             ("geostory-" + tag + "-" + std::to_string(rng() % 1000000000ULL));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Compares against a checked-in golden file. GEOSTORY_UPDATE_GOLDEN=1
// rewrites the file instead.
inline bool matches_golden(const std::string& name, const std::string& actual) {
  const auto path = golden_dir() / name;
  if (const char* update = std::getenv("GEOSTORY_UPDATE_GOLDEN"); update && std::string(update) == "1") {
    write_file(path, actual);
    return true;
  }
  return std::filesystem::exists(path) && read_file(path) == actual;
}

// The first labelled narrative paragraph of the reference text, with
// every colour-highlighted place name rewritten as [[POI: name]].
inline std::string reference_story_one() {
  std::istringstream in(read_file(GEOSTORY_REFERENCE_TEXT));
  std::string line;
  const std::string label = "\\textbf{Story 1:}";
  while (std::getline(in, line)) {
    if (line.rfind(label, 0) != 0) continue;
    std::string body = line.substr(label.size());
    body = std::regex_replace(body, std::regex(R"(\\textcolor\{Blue\}\{([^}]*)\})"), "[[POI: $1]]");
    const auto first = body.find_first_not_of(' ');
    const auto last = body.find_last_not_of(" \r");
    return body.substr(first, last - first + 1);
  }
  throw std::runtime_error("reference story not found");
}

inline std::string reference_prompt(const std::string& number) {
  std::istringstream in(read_file(GEOSTORY_REFERENCE_TEXT));
  std::string line;
  const std::string label = "\\textbf{Prompt " + number + ":}";
  while (std::getline(in, line)) {
    if (line.rfind(label, 0) == 0) return line.substr(label.size());
  }
  throw std::runtime_error("reference prompt not found");
}

inline std::vector<std::string> reference_story_one_names() {
  std::vector<std::string> names;
  const auto text = reference_story_one();
  const std::regex re(R"(\[\[POI: ([^\]]*)\]\])");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    names.push_back((*it)[1].str());
  }
  return names;
}

namespace oracle {

constexpr double kRadius = 6371008.8;

// Great-circle distance from the chord between unit vectors.
inline double distance(const geostory::GeoPoint& a, const geostory::GeoPoint& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  auto unit = [&](const geostory::GeoPoint& p) {
    return std::array<double, 3>{std::cos(p.lat * rad) * std::cos(p.lon * rad),
                                 std::cos(p.lat * rad) * std::sin(p.lon * rad), std::sin(p.lat * rad)};
  };
  const auto u = unit(a);
  const auto v = unit(b);
  const double chord = std::sqrt((u[0] - v[0]) * (u[0] - v[0]) + (u[1] - v[1]) * (u[1] - v[1]) +
                                 (u[2] - v[2]) * (u[2] - v[2]));
  return 2.0 * kRadius * std::asin(std::min(1.0, chord / 2.0));
}

// Each segment sampled at 1,000 evenly spaced interior points plus both ends.
inline double polyline_distance(const geostory::GeoPoint& p, const std::vector<geostory::GeoPoint>& line) {
  double best = distance(p, line.front());
  for (std::size_t s = 0; s + 1 < line.size(); ++s) {
    const auto& a = line[s];
    const auto& b = line[s + 1];
    for (int k = 0; k <= 1001; ++k) {
      const double t = k / 1001.0;
      best = std::min(best, distance(p, {a.lon + (b.lon - a.lon) * t, a.lat + (b.lat - a.lat) * t}));
    }
  }
  return best;
}

inline std::size_t count_inside(const geostory::BoundingBox& box, const std::vector<geostory::GeoPoint>& pts) {
  std::size_t n = 0;
  for (const auto& p : pts) {
    if (p.lon >= box.min_lon && p.lon <= box.max_lon && p.lat >= box.min_lat && p.lat <= box.max_lat) ++n;
  }
  return n;
}

struct Cell {
  std::int32_t row, col;
  std::uint64_t count;
};

// Every non-empty cell, fully sorted by count desc, then (row, col).
inline std::vector<Cell> sorted_cells(const geostory::HeatGrid& grid) {
  std::vector<Cell> cells;
  for (std::int32_t r = 0; r < grid.rows; ++r) {
    for (std::int32_t c = 0; c < grid.cols; ++c) {
      if (grid.at(r, c) > 0) cells.push_back({r, c, grid.at(r, c)});
    }
  }
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (a.count != b.count) return a.count > b.count;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  return cells;
}

// Connected components of the "within threshold" graph, each as a sorted
// list of 1-based positions, ordered by smallest member.
inline std::vector<std::vector<std::size_t>> single_linkage(const std::vector<geostory::GeoPoint>& pts,
                                                            double threshold) {
  std::vector<int> comp(pts.size(), -1);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < pts.size(); ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<std::size_t> stack{s};
    comp[s] = id;
    while (!stack.empty()) {
      const auto i = stack.back();
      stack.pop_back();
      out.back().push_back(i + 1);
      for (std::size_t j = 0; j < pts.size(); ++j) {
        if (comp[j] < 0 && distance(pts[i], pts[j]) <= threshold) {
          comp[j] = id;
          stack.push_back(j);
        }
      }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

}  // namespace oracle
}  // namespace support
