#ifndef DISPLACER_HARNESS_CONFIG_HPP
#define DISPLACER_HARNESS_CONFIG_HPP

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "displacer/analogy.hpp"
#include "displacer/displace.hpp"
#include "displacer/error.hpp"

namespace displacer::harness {

/// Flat `key = value` settings; `#` comments, blank lines ignored.
using Settings = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline Settings parse_settings(std::string_view text) {
  Settings out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error::at_line(ErrorCode::BadConfig, lineno, "expected key=value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw Error::at_line(ErrorCode::BadConfig, lineno, "empty key");
    out[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::BadConfig, "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str());
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || p != value.data() + value.size())
    throw Error(ErrorCode::BadConfig, key + ": not a number: \"" + value + "\"");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorCode::BadConfig, key + ": expected true/false, got \"" + value + "\"");
}

/// Applies every recognized pipeline key; unknown keys are rejected.
inline void apply_settings(const Settings& s, PipelineConfig& cfg, AnalogyConfig& analogy) {
  for (const auto& [key, value] : s) {
    if (key == "n_neighbors") {
      cfg.n_neighbors = parse_number<std::size_t>(key, value);
    } else if (key == "max_senses") {
      cfg.max_senses = parse_number<std::size_t>(key, value);
      analogy.max_senses = cfg.max_senses;
    } else if (key == "k_clusters") {
      if (value == "auto")
        cfg.k_clusters.reset();
      else
        cfg.k_clusters = parse_number<std::size_t>(key, value);
    } else if (key == "classify_mode") {
      if (value == "majority")
        cfg.classify_mode = ClassifyMode::Majority;
      else if (value == "label-vector")
        cfg.classify_mode = ClassifyMode::LabelVector;
      else
        throw Error(ErrorCode::BadConfig, "classify_mode must be majority or label-vector");
    } else if (key == "answers_returned") {
      cfg.answers_returned = parse_number<std::size_t>(key, value);
    } else if (key == "search_cap") {
      cfg.search_cap = parse_number<std::size_t>(key, value);
    } else if (key == "knn_mode") {
      if (value == "exact")
        cfg.knn_mode = KnnMode::Exact;
      else if (value == "approximate")
        cfg.knn_mode = KnnMode::Approximate;
      else
        throw Error(ErrorCode::BadConfig, "knn_mode must be exact or approximate");
      analogy.knn_mode = cfg.knn_mode;
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "kmeans_restarts") {
      cfg.kmeans_restarts = parse_number<std::size_t>(key, value);
    } else if (key == "analogy_candidates") {
      analogy.candidates = parse_number<std::size_t>(key, value);
    } else {
      throw Error(ErrorCode::BadConfig, "unknown config key \"" + key + "\"");
    }
  }
  cfg.validate();
}

/// Snapshot of a configuration for report headers.
inline Settings snapshot(const PipelineConfig& cfg, const AnalogyConfig& analogy) {
  return {
      {"n_neighbors", std::to_string(cfg.n_neighbors)},
      {"max_senses", std::to_string(cfg.max_senses)},
      {"k_clusters", cfg.k_clusters ? std::to_string(*cfg.k_clusters) : "auto"},
      {"classify_mode", cfg.classify_mode == ClassifyMode::Majority ? "majority" : "label-vector"},
      {"answers_returned", std::to_string(cfg.answers_returned)},
      {"search_cap", std::to_string(cfg.search_cap)},
      {"knn_mode", std::string(to_string(cfg.knn_mode))},
      {"seed", std::to_string(cfg.seed)},
      {"kmeans_restarts", std::to_string(cfg.kmeans_restarts)},
      {"analogy_candidates", std::to_string(analogy.candidates)},
  };
}

}  // namespace displacer::harness

#endif  // DISPLACER_HARNESS_CONFIG_HPP
