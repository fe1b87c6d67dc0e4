#ifndef DISPLACER_LEXICON_HPP
#define DISPLACER_LEXICON_HPP

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "displacer/error.hpp"

namespace displacer {

enum class Pos { Noun, Verb, Adjective, Adverb, Name, Other };
enum class GrammaticalNumber { Singular, Plural, NotApplicable };

inline std::string_view to_string(Pos p) {
  switch (p) {
    case Pos::Noun: return "noun";
    case Pos::Verb: return "verb";
    case Pos::Adjective: return "adjective";
    case Pos::Adverb: return "adverb";
    case Pos::Name: return "name";
    case Pos::Other: return "other";
  }
  return "other";
}

inline std::string_view to_string(GrammaticalNumber n) {
  switch (n) {
    case GrammaticalNumber::Singular: return "singular";
    case GrammaticalNumber::Plural: return "plural";
    case GrammaticalNumber::NotApplicable: return "n/a";
  }
  return "n/a";
}

inline bool parse_pos(std::string_view s, Pos& out) {
  for (Pos p : {Pos::Noun, Pos::Verb, Pos::Adjective, Pos::Adverb, Pos::Name, Pos::Other})
    if (s == to_string(p)) {
      out = p;
      return true;
    }
  return false;
}

inline bool parse_number(std::string_view s, GrammaticalNumber& out) {
  if (s.empty()) {
    out = GrammaticalNumber::NotApplicable;
    return true;
  }
  for (auto n : {GrammaticalNumber::Singular, GrammaticalNumber::Plural,
                 GrammaticalNumber::NotApplicable})
    if (s == to_string(n)) {
      out = n;
      return true;
    }
  return false;
}

struct LexEntry {
  std::string term;
  std::string concept_name;  // KB symbol
  Pos pos = Pos::Noun;
  GrammaticalNumber number = GrammaticalNumber::NotApplicable;
};

inline std::string fold_case(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Surface term <-> KB concept mapping with part of speech and number.
/// Ambiguity is kept: a term may name several concepts and vice versa.
/// Lookups try the exact spelling first and fall back to a case-folded
/// match only when the exact spelling is unknown.
class Lexicon {
 public:
  /// Adds an entry. A repeated (term, concept) pair merges its pos/number
  /// into the existing association.
  void add(LexEntry e) {
    if (e.term.empty()) throw Error(ErrorCode::BadRow, "empty term");
    if (e.concept_name.empty()) throw Error(ErrorCode::BadRow, "empty concept for " + e.term);
    auto& concepts = by_term_[e.term];
    if (std::find(concepts.begin(), concepts.end(), e.concept_name) == concepts.end())
      concepts.push_back(e.concept_name);
    auto& terms = by_concept_[e.concept_name];
    if (std::find(terms.begin(), terms.end(), e.term) == terms.end()) terms.push_back(e.term);
    folded_[fold_case(e.term)].insert(e.term);
    pos_[e.term].insert(e.pos);
    if (e.number != GrammaticalNumber::NotApplicable) number_[e.term].insert(e.number);
    entries_.push_back(std::move(e));
  }

  /// TSV: term, concept, pos[, number]; `#` starts a comment line.
  void load_text(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line.front() == '#') continue;
      std::vector<std::string> cols;
      std::size_t start = 0;
      for (;;) {
        const std::size_t tab = line.find('\t', start);
        cols.push_back(line.substr(start, tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
      }
      if (cols.size() < 3 || cols.size() > 4)
        throw Error::at_line(ErrorCode::BadRow, lineno, "expected 3 or 4 tab-separated columns");
      LexEntry e{cols[0], cols[1], Pos::Noun, GrammaticalNumber::NotApplicable};
      if (!parse_pos(cols[2], e.pos))
        throw Error::at_line(ErrorCode::BadRow, lineno, "unknown part of speech \"" + cols[2] + "\"");
      if (cols.size() == 4 && !parse_number(cols[3], e.number))
        throw Error::at_line(ErrorCode::BadRow, lineno, "unknown number \"" + cols[3] + "\"");
      try {
        add(std::move(e));
      } catch (const Error& err) {
        throw Error::at_line(err.code(), lineno, err.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open lexicon file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    load_text(ss.str());
  }

  /// Concepts the term names, in entry order; empty if unknown.
  std::vector<std::string> word2kb(std::string_view term) const {
    std::vector<std::string> out;
    for (const auto& t : resolve(term)) {
      const auto& cs = by_term_.at(t);
      for (const auto& c : cs)
        if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
    }
    return out;
  }

  /// Surface forms of a concept, preferred (first listed) first.
  const std::vector<std::string>& kb2word(std::string_view concept_name) const {
    auto it = by_concept_.find(std::string(concept_name));
    if (it == by_concept_.end())
      throw Error(ErrorCode::UnknownConcept, std::string(concept_name));
    return it->second;
  }

  bool has_concept(std::string_view concept_name) const {
    return by_concept_.count(std::string(concept_name)) > 0;
  }

  /// Preferred surface form, or the concept name itself when unmapped.
  std::string preferred_term(std::string_view concept_name) const {
    auto it = by_concept_.find(std::string(concept_name));
    return it == by_concept_.end() ? std::string(concept_name) : it->second.front();
  }

  /// Empty set means "unknown", which callers treat as unconstrained.
  std::set<Pos> pos_of(std::string_view term) const {
    std::set<Pos> out;
    for (const auto& t : resolve(term)) {
      const auto& ps = pos_.at(t);
      out.insert(ps.begin(), ps.end());
    }
    return out;
  }

  std::set<GrammaticalNumber> number_of(std::string_view term) const {
    std::set<GrammaticalNumber> out;
    for (const auto& t : resolve(term)) {
      auto it = number_.find(t);
      if (it != number_.end()) out.insert(it->second.begin(), it->second.end());
    }
    return out;
  }

  const std::vector<LexEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  // Exact spelling if known, otherwise every case variant.
  std::vector<std::string> resolve(std::string_view term) const {
    const std::string t(term);
    if (by_term_.count(t)) return {t};
    auto it = folded_.find(fold_case(term));
    if (it == folded_.end()) return {};
    return {it->second.begin(), it->second.end()};
  }

  std::vector<LexEntry> entries_;
  std::map<std::string, std::vector<std::string>> by_term_;
  std::map<std::string, std::vector<std::string>> by_concept_;
  std::map<std::string, std::set<std::string>> folded_;
  std::map<std::string, std::set<Pos>> pos_;
  std::map<std::string, std::set<GrammaticalNumber>> number_;
};

}  // namespace displacer

#endif  // DISPLACER_LEXICON_HPP
