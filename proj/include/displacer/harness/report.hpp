#ifndef DISPLACER_HARNESS_REPORT_HPP
#define DISPLACER_HARNESS_REPORT_HPP

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "displacer/displace.hpp"
#include "displacer/harness/config.hpp"

namespace displacer::harness {

/// One evaluated item. `group` partitions the items for aggregation
/// (category, mode, neighbor count, ...).
struct ItemRecord {
  std::size_t index = 0;
  std::string group;
  std::string input;
  std::vector<std::string> gold;
  std::string predicted;
  std::optional<std::size_t> rank;  // 1-based rank of the first gold answer
  bool covered = false;
  bool correct = false;
  double score = 0.0;  // item metric, e.g. top-3 precision
  std::string note;
};

using Aggregates = std::map<std::string, double>;

struct ExperimentReport {
  std::string experiment;
  std::string data_source;  // "synthetic" or "user"
  Settings config;
  std::vector<ItemRecord> items;
  Aggregates aggregates;
  bool confusion = false;  // add gold -> predicted counts
  double wall_time_s = 0.0;
};

/// Aggregates are a pure function of the item records. For every group
/// and for "all": items, covered, correct, accuracy, coverage, mean_score,
/// rank1..rank4 and missed (rank probabilities over all items).
inline Aggregates compute_aggregates(const std::vector<ItemRecord>& items, bool confusion) {
  struct Acc {
    double n = 0, covered = 0, correct = 0, score = 0;
    std::array<double, kTrackedRanks> ranks{};
  };
  std::map<std::string, Acc> acc;
  Aggregates out;
  for (const auto& r : items)
    for (const std::string& g : {r.group, std::string("all")}) {
      auto& a = acc[g];
      a.n += 1;
      a.covered += r.covered ? 1 : 0;
      a.correct += r.correct ? 1 : 0;
      a.score += r.score;
      if (r.rank && *r.rank >= 1 && *r.rank <= kTrackedRanks) a.ranks[*r.rank - 1] += 1;
      if (g == "all") continue;
      if (confusion && r.gold.size() == 1)
        out["confusion." + r.gold.front() + "." + (r.predicted.empty() ? "none" : r.predicted)] += 1;
    }
  for (const auto& [g, a] : acc) {
    out[g + ".items"] = a.n;
    out[g + ".covered"] = a.covered;
    out[g + ".correct"] = a.correct;
    out[g + ".accuracy"] = a.correct / a.n;
    out[g + ".coverage"] = a.covered / a.n;
    out[g + ".mean_score"] = a.score / a.n;
    double found = 0;
    for (std::size_t i = 0; i < kTrackedRanks; ++i) {
      out[g + ".rank" + std::to_string(i + 1)] = a.ranks[i] / a.n;
      found += a.ranks[i];
    }
    out[g + ".missed"] = (a.n - found) / a.n;
  }
  return out;
}

inline void finalize(ExperimentReport& r) {
  std::stable_sort(r.items.begin(), r.items.end(),
                   [](const ItemRecord& a, const ItemRecord& b) { return a.index < b.index; });
  r.aggregates = compute_aggregates(r.items, r.confusion);
}

inline nlohmann::json to_json(const ItemRecord& r) {
  nlohmann::json j;
  j["type"] = "item";
  j["index"] = r.index;
  j["group"] = r.group;
  j["input"] = r.input;
  j["gold"] = r.gold;
  j["predicted"] = r.predicted;
  j["rank"] = r.rank ? nlohmann::json(*r.rank) : nlohmann::json(nullptr);
  j["covered"] = r.covered;
  j["correct"] = r.correct;
  j["score"] = r.score;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline ItemRecord item_from_json(const nlohmann::json& j) {
  ItemRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.group = j.at("group").get<std::string>();
  r.input = j.at("input").get<std::string>();
  r.gold = j.at("gold").get<std::vector<std::string>>();
  r.predicted = j.at("predicted").get<std::string>();
  if (!j.at("rank").is_null()) r.rank = j.at("rank").get<std::size_t>();
  r.covered = j.at("covered").get<bool>();
  r.correct = j.at("correct").get<bool>();
  r.score = j.at("score").get<double>();
  if (j.contains("note")) r.note = j.at("note").get<std::string>();
  return r;
}

inline nlohmann::json summary_json(const ExperimentReport& r, bool with_time = true) {
  nlohmann::json j;
  j["type"] = "summary";
  j["experiment"] = r.experiment;
  j["data_source"] = r.data_source;
  j["config"] = r.config;
  j["aggregates"] = r.aggregates;
  j["confusion"] = r.confusion;
  if (with_time) j["wall_time_s"] = r.wall_time_s;
  return j;
}

/// Line-delimited records: one per item, then the summary.
inline void write_jsonl(std::ostream& out, const ExperimentReport& r, bool with_time = true) {
  for (const auto& item : r.items) out << to_json(item).dump() << '\n';
  out << summary_json(r, with_time).dump() << '\n';
}

/// Human-readable table of the per-group aggregates.
inline void write_table(std::ostream& out, const ExperimentReport& r) {
  out << "experiment: " << r.experiment << "  (data: " << r.data_source;
  if (auto it = r.config.find("knn_mode"); it != r.config.end()) out << ", knn: " << it->second;
  out << ")\n";
  std::set<std::string> groups;
  for (const auto& it : r.items) groups.insert(it.group);
  groups.insert("all");
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-28s %7s %8s %8s %9s %9s %7s %7s %7s %7s\n", "group", "items",
                "covered", "correct", "accuracy", "score", "r1", "r2", "r3", "r4");
  out << buf;
  for (const auto& g : groups) {
    auto v = [&](const char* k) {
      auto it = r.aggregates.find(g + "." + k);
      return it == r.aggregates.end() ? 0.0 : it->second;
    };
    std::snprintf(buf, sizeof buf, "%-28s %7.0f %8.0f %8.0f %9.3f %9.3f %7.3f %7.3f %7.3f %7.3f\n",
                  g.c_str(), v("items"), v("covered"), v("correct"), v("accuracy"), v("mean_score"),
                  v("rank1"), v("rank2"), v("rank3"), v("rank4"));
    out << buf;
  }
  bool any = false;
  for (const auto& [k, val] : r.aggregates)
    if (k.rfind("confusion.", 0) == 0) {
      if (!any) out << "confusion (gold.predicted: count)\n";
      any = true;
      out << "  " << k.substr(10) << ": " << val << '\n';
    }
  std::snprintf(buf, sizeof buf, "wall time: %.3f s\n", r.wall_time_s);
  out << buf;
}

}  // namespace displacer::harness

#endif  // DISPLACER_HARNESS_REPORT_HPP
