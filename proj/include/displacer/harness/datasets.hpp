#ifndef DISPLACER_HARNESS_DATASETS_HPP
#define DISPLACER_HARNESS_DATASETS_HPP

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "displacer/error.hpp"
#include "displacer/harness/config.hpp"
#include "displacer/lexicon.hpp"

namespace displacer::harness {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// ---- names: two-column CSV (name, gender) ----

struct NameRecord {
  std::string name;
  std::string gender;
  std::size_t line = 0;
};

/// A first line reading `name,gender` (any case) is taken as a header.
inline std::vector<NameRecord> parse_names_csv(std::string_view text) {
  std::vector<NameRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    if (out.empty() && fold_case(t) == "name,gender") continue;
    const auto comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
      throw Error::at_line(ErrorCode::BadRow, lineno, "expected two comma-separated columns");
    NameRecord r{trim(std::string_view(t).substr(0, comma)),
                 fold_case(trim(std::string_view(t).substr(comma + 1))), lineno};
    if (r.name.empty() || r.gender.empty())
      throw Error::at_line(ErrorCode::BadRow, lineno, "empty name or gender");
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyDataset, "names file has no rows");
  return out;
}

// ---- SSWR: ": category" headers and four-term lines ----

struct SswrItem {
  std::string category;
  std::string a, b, c, d;
  std::size_t line = 0;
};

inline std::vector<SswrItem> parse_sswr(std::string_view text) {
  std::vector<SswrItem> out;
  std::istringstream in{std::string(text)};
  std::string line, category = "default";
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t.front() == ':') {
      category = trim(std::string_view(t).substr(1));
      if (category.empty()) throw Error::at_line(ErrorCode::BadRow, lineno, "empty category name");
      continue;
    }
    const auto tok = split_ws(t);
    if (tok.size() != 4) throw Error::at_line(ErrorCode::BadRow, lineno, "expected four terms");
    out.push_back({category, tok[0], tok[1], tok[2], tok[3], lineno});
  }
  if (out.empty()) throw Error(ErrorCode::EmptyDataset, "analogy file has no items");
  return out;
}

// ---- SAT-style items ----
//
// Blocks separated by blank lines:
//   stem pair
//   choice pairs (one per line)
//   gold letter
//   optional "alt: term term ..." listing acceptable fourth terms

struct SatItem {
  std::string stem_a, stem_b;
  std::vector<std::pair<std::string, std::string>> choices;
  std::size_t gold = 0;
  std::vector<std::string> alternates;
  std::size_t line = 0;

  const std::string& c() const { return choices[gold].first; }
  const std::string& d() const { return choices[gold].second; }
};

inline std::vector<SatItem> parse_sat(std::string_view text) {
  std::vector<SatItem> out;
  std::vector<std::pair<std::string, std::size_t>> block;
  auto flush = [&] {
    if (block.empty()) return;
    SatItem item;
    item.line = block.front().second;
    std::size_t end = block.size();
    if (block.back().first.rfind("alt:", 0) == 0) {
      item.alternates = split_ws(std::string_view(block.back().first).substr(4));
      --end;
    }
    if (end < 3)
      throw Error::at_line(ErrorCode::BadRow, item.line, "item needs a stem, choices and a gold letter");
    const std::string& letter = block[end - 1].first;
    if (letter.size() != 1 || letter[0] < 'a' || letter[0] > 'z')
      throw Error::at_line(ErrorCode::BadRow, block[end - 1].second, "expected a gold letter");
    for (std::size_t i = 0; i + 1 < end; ++i) {
      const auto tok = split_ws(block[i].first);
      if (tok.size() != 2) throw Error::at_line(ErrorCode::BadRow, block[i].second, "expected a pair");
      if (i == 0) {
        item.stem_a = tok[0];
        item.stem_b = tok[1];
      } else {
        item.choices.emplace_back(tok[0], tok[1]);
      }
    }
    item.gold = static_cast<std::size_t>(letter[0] - 'a');
    if (item.gold >= item.choices.size())
      throw Error::at_line(ErrorCode::BadRow, block[end - 1].second, "gold letter out of range");
    out.push_back(std::move(item));
    block.clear();
  };
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (!t.empty() && t.front() == '#') continue;
    if (t.empty()) {
      flush();
      continue;
    }
    block.emplace_back(fold_case(t), lineno);
  }
  flush();
  if (out.empty()) throw Error(ErrorCode::EmptyDataset, "SAT file has no items");
  return out;
}

// ---- machine list: term[<TAB>gold1|gold2|...] ----

struct MachineItem {
  std::string term;
  std::vector<std::string> gold;
  std::size_t line = 0;
};

inline std::vector<MachineItem> parse_machine_list(std::string_view text) {
  std::vector<MachineItem> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || trim(line).front() == '#') continue;
    MachineItem item;
    item.line = lineno;
    const auto tab = line.find('\t');
    item.term = trim(std::string_view(line).substr(0, tab));
    if (item.term.empty()) throw Error::at_line(ErrorCode::BadRow, lineno, "empty term");
    if (tab != std::string::npos) {
      const std::string rest = line.substr(tab + 1);
      if (rest.find('\t') != std::string::npos)
        throw Error::at_line(ErrorCode::BadRow, lineno, "expected at most two columns");
      std::size_t start = 0;
      for (;;) {
        const auto bar = rest.find('|', start);
        std::string g = trim(std::string_view(rest).substr(start, bar - start));
        if (g.empty()) throw Error::at_line(ErrorCode::BadRow, lineno, "empty gold part");
        item.gold.push_back(std::move(g));
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
    }
    out.push_back(std::move(item));
  }
  if (out.empty()) throw Error(ErrorCode::EmptyDataset, "machine list is empty");
  return out;
}

}  // namespace displacer::harness

#endif  // DISPLACER_HARNESS_DATASETS_HPP
