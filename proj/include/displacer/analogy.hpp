#ifndef DISPLACER_ANALOGY_HPP
#define DISPLACER_ANALOGY_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "displacer/displace.hpp"
#include "displacer/error.hpp"
#include "displacer/kb.hpp"
#include "displacer/lexicon.hpp"
#include "displacer/vecspace.hpp"

namespace displacer {

/// a : b :: c : ?
struct AnalogyProblem {
  std::string a, b, c;
};

enum class AnswerSource { Dsvs, KbPredicate, KbAnchor };

inline std::string_view to_string(AnswerSource s) {
  switch (s) {
    case AnswerSource::Dsvs: return "dsvs";
    case AnswerSource::KbPredicate: return "kb-predicate";
    case AnswerSource::KbAnchor: return "kb-anchor";
  }
  return "dsvs";
}

struct AnalogyAnswer {
  std::string term;
  AnswerSource source = AnswerSource::Dsvs;
  double distance = std::numeric_limits<double>::infinity();  // to the vector-arithmetic answer
};

struct AnalogyConfig {
  std::size_t max_senses = 8;
  std::size_t candidates = 10;  // vector-arithmetic candidates considered by the combined solver
  KnnMode knn_mode = KnnMode::Exact;
};

/// Four-term analogy solvers: vector offset, KB predicate/anchor patterns,
/// part-of-speech/number filtering and the combined ranker.
class AnalogySolver {
 public:
  AnalogySolver(Resources res, AnalogyConfig cfg = {}) : res_(res), cfg_(cfg) {}

  /// Nearest terms to v(b) - v(a) + v(c) other than the inputs. When
  /// a == c the arithmetic forces b, so b stays eligible.
  std::vector<AnalogyAnswer> solve_dsvs(const AnalogyProblem& p, std::size_t k) const {
    const Vector target = res_.space.analogy_vector(p.a, p.b, p.c);
    std::set<std::string> exclude{p.a, p.c};
    if (p.a != p.c) exclude.insert(p.b);
    std::vector<AnalogyAnswer> out;
    for (auto& n : res_.space.vec2word(target, k, exclude, cfg_.knn_mode))
      out.push_back({std::move(n.term), AnswerSource::Dsvs, n.distance});
    return out;
  }

  /// Answers from the two KB patterns, applied at every sense of c:
  /// a predicate P relating senses of a and b, and a pair of predicates
  /// linking a and b to a shared anchor. Sorted by term.
  std::vector<AnalogyAnswer> solve_kb(const AnalogyProblem& p) const {
    const auto sa = senses(p.a), sb = senses(p.b), sc = senses(p.c);
    std::map<std::string, AnswerSource> found;
    auto record = [&](const SExpr& d, AnswerSource src) {
      const std::string term = d.is_symbol()  ? res_.lexicon.preferred_term(d.text)
                               : d.is_str()   ? d.text
                                              : print(d);
      found.try_emplace(term, src);
    };
    const SExpr answer_var = SExpr::variable("d");
    const SExpr anchor_var = SExpr::variable("r");
    for (const auto& x : sa)
      for (const auto& y : sb) {
        const SExpr ax = SExpr::symbol(x), by = SExpr::symbol(y);
        for (const auto& link : res_.kb.predicates_between(ax, by))
          for (const auto& z : sc) {
            const SExpr pred = SExpr::symbol(link.predicate), cz = SExpr::symbol(z);
            const SExpr pattern = link.order == ArgOrder::AFirst
                                      ? SExpr::list({pred, cz, answer_var})
                                      : SExpr::list({pred, answer_var, cz});
            for (const auto& b : res_.kb.query(QueryExpr::from_pattern(pattern)))
              record(b.at("d"), AnswerSource::KbPredicate);
          }
        for (const auto& anchor : res_.kb.shared_anchor_patterns(ax, by))
          for (const auto& z : sc) {
            const QueryExpr q = QueryExpr::all_of(
                {QueryExpr::from_pattern(SExpr::list(
                     {SExpr::symbol(anchor.first_predicate), anchor_var, SExpr::symbol(z)})),
                 QueryExpr::from_pattern(SExpr::list(
                     {SExpr::symbol(anchor.second_predicate), anchor_var, answer_var}))});
            for (const auto& b : res_.kb.query(q)) record(b.at("d"), AnswerSource::KbAnchor);
          }
      }
    std::vector<AnalogyAnswer> out;
    if (found.empty()) return out;
    std::optional<Vector> target;
    if (res_.space.resolvable(p.a) && res_.space.resolvable(p.b) && res_.space.resolvable(p.c))
      target = res_.space.analogy_vector(p.a, p.b, p.c);
    for (const auto& [term, src] : found) {
      double d = std::numeric_limits<double>::infinity();
      if (target && res_.space.resolvable(term))
        d = cosine_distance(*target, res_.space.word2vec(term));
      out.push_back({term, src, d});
    }
    return out;
  }

  /// Keeps candidates whose part of speech (and number) fits the problem:
  /// the answer matches b's when a and c agree, c's when a and b agree.
  /// Unknown candidates always pass; an emptied list is returned unfiltered.
  std::vector<AnalogyAnswer> pos_filter(const std::vector<AnalogyAnswer>& candidates,
                                        const AnalogyProblem& p) const {
    const auto pos = [&](const std::string& t) { return res_.lexicon.pos_of(t); };
    const auto num = [&](const std::string& t) { return res_.lexicon.number_of(t); };
    std::vector<AnalogyAnswer> kept;
    for (const auto& cand : candidates)
      if (admissible(pos, cand.term, p) && admissible(num, cand.term, p)) kept.push_back(cand);
    return kept.empty() ? candidates : kept;
  }

  /// KB answer nearest the vector-arithmetic answer when the KB has any,
  /// otherwise the first vector-arithmetic candidate surviving pos_filter.
  AnalogyAnswer solve_combined(const AnalogyProblem& p) const {
    [[maybe_unused]] const Vector target = res_.space.analogy_vector(p.a, p.b, p.c);
    auto kb = solve_kb(p);
    if (!kb.empty()) {
      return *std::min_element(kb.begin(), kb.end(), [](const auto& x, const auto& y) {
        if (x.distance != y.distance) return x.distance < y.distance;
        return x.term < y.term;
      });
    }
    const auto filtered = pos_filter(solve_dsvs(p, cfg_.candidates), p);
    if (filtered.empty()) throw Error(ErrorCode::NoCoverage, "vocabulary exhausted");
    return filtered.front();
  }

  /// Uniform choice among KB answers, reproducible for a seed.
  AnalogyAnswer solve_kb_random(const AnalogyProblem& p, std::uint64_t seed) const {
    auto kb = solve_kb(p);
    if (kb.empty())
      throw Error(ErrorCode::NoKbAnswer, p.a + " : " + p.b + " :: " + p.c + " : ?");
    std::mt19937_64 rng(seed);
    return kb[std::uniform_int_distribution<std::size_t>(0, kb.size() - 1)(rng)];
  }

 private:
  std::vector<std::string> senses(const std::string& term) const {
    auto s = res_.lexicon.word2kb(term);
    if (s.size() > cfg_.max_senses) s.resize(cfg_.max_senses);
    return s;
  }

  template <class Lookup>
  static bool admissible(const Lookup& lookup, const std::string& term, const AnalogyProblem& p) {
    const auto cand = lookup(term);
    if (cand.empty()) return true;
    const auto a = lookup(p.a), b = lookup(p.b), c = lookup(p.c);
    auto meets = [](const auto& x, const auto& y) {
      for (const auto& v : x)
        if (y.count(v)) return true;
      return false;
    };
    std::decay_t<decltype(cand)> allowed;
    bool constrained = false;
    if (meets(a, c)) {
      allowed.insert(b.begin(), b.end());
      constrained = true;
    }
    if (meets(a, b)) {
      allowed.insert(c.begin(), c.end());
      constrained = true;
    }
    if (!constrained || allowed.empty()) return true;
    return meets(cand, allowed);
  }

  Resources res_;
  AnalogyConfig cfg_;
};

}  // namespace displacer

#endif  // DISPLACER_ANALOGY_HPP
