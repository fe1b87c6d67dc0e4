#ifndef DISPLACER_DISPLACE_HPP
#define DISPLACER_DISPLACE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "displacer/error.hpp"
#include "displacer/kb.hpp"
#include "displacer/kmeans.hpp"
#include "displacer/lexicon.hpp"
#include "displacer/sexpr.hpp"
#include "displacer/vecspace.hpp"

namespace displacer {

enum class ClassifyMode { Majority, LabelVector };

struct PipelineConfig {
  std::size_t n_neighbors = 4;
  std::size_t max_senses = 8;
  std::optional<std::size_t> k_clusters;  // nullopt: min(ceil(sqrt(m)) + 2, m)
  ClassifyMode classify_mode = ClassifyMode::Majority;
  std::size_t answers_returned = 10;
  std::size_t search_cap = 50;  // raw k-NN results scanned for usable neighbors
  KnnMode knn_mode = KnnMode::Exact;
  std::uint64_t seed = 1;
  std::size_t kmeans_restarts = 10;

  void validate() const {
    if (n_neighbors < 1) throw Error(ErrorCode::BadConfig, "n_neighbors must be >= 1");
    if (answers_returned < 1) throw Error(ErrorCode::BadConfig, "answers_returned must be >= 1");
    if (max_senses < 1) throw Error(ErrorCode::BadConfig, "max_senses must be >= 1");
    if (search_cap < 1) throw Error(ErrorCode::BadConfig, "search_cap must be >= 1");
    if (kmeans_restarts < 1) throw Error(ErrorCode::BadConfig, "kmeans_restarts must be >= 1");
    if (k_clusters && *k_clusters < 1) throw Error(ErrorCode::BadConfig, "k_clusters must be >= 1");
  }
};

/// A query with one hole (the term being asked about) and one answer
/// variable, e.g. `(capitalCity ?X ?_)` with hole `_` and answer `X`.
struct QueryTemplate {
  QueryExpr query;
  std::string hole = "_";
  std::string answer;

  /// When `answer` is empty the single free variable other than the hole
  /// is used.
  static QueryTemplate parse(std::string_view text, std::string hole = "_",
                             std::string answer = {}) {
    QueryTemplate t{QueryExpr::parse(text), std::move(hole), std::move(answer)};
    const auto vars = bound_variables(t.query);
    if (!vars.count(t.hole))
      throw Error(ErrorCode::BadConfig, "template has no ?" + t.hole + " hole: " + std::string(text));
    if (t.answer.empty()) {
      for (const auto& v : vars)
        if (v != t.hole) {
          if (!t.answer.empty())
            throw Error(ErrorCode::BadConfig,
                        "template has several free variables; name the answer variable");
          t.answer = v;
        }
    }
    if (t.answer.empty() || !vars.count(t.answer))
      throw Error(ErrorCode::BadConfig, "template has no answer variable");
    return t;
  }

  QueryExpr instantiate(const SExpr& value) const { return fill(query, value); }

  /// Conjuncts mentioning only the answer variable, e.g. `(isa ?Y Country)`.
  std::vector<SExpr> answer_constraints() const {
    std::vector<SExpr> out;
    auto consider = [&](const QueryExpr& q) {
      if (q.kind != QueryExpr::Kind::Pattern) return;
      std::set<std::string> vars;
      kb_detail::collect_variables(q.pattern, vars);
      if (vars.size() == 1 && vars.count(answer)) out.push_back(q.pattern);
    };
    if (query.kind == QueryExpr::Kind::And)
      for (const auto& c : query.children) consider(c);
    return out;
  }

 private:
  QueryExpr fill(const QueryExpr& q, const SExpr& value) const {
    QueryExpr out = q;
    if (q.kind == QueryExpr::Kind::Pattern) {
      out.pattern = kb_detail::substitute(q.pattern, Binding{{hole, value}});
    } else {
      for (auto& c : out.children) c = fill(c, value);
    }
    return out;
  }
};

struct NeighborSenses {
  std::string term;
  double distance = 0.0;
  std::vector<std::string> concepts;
};

/// B' estimate obtained from neighbor A with known answer B: v(B) - v(A) + v(A').
struct DisplacementEstimate {
  std::string source_term;
  std::string source_answer;
  std::string target_term;
  Vector estimated;
};

struct RankedAnswer {
  std::string term;
  double score = 0.0;  // lower is better
  std::size_t support = 0;
  bool demoted = false;  // violates a type constraint of the template
};

struct SingleResult {
  std::vector<DisplacementEstimate> estimates;
  Vector average;
  std::vector<RankedAnswer> by_average;        // score: distance to the average estimate
  std::vector<RankedAnswer> by_mean_distance;  // score: mean distance to each estimate
  std::vector<NeighborSenses> neighbors;
};

struct MultiResult {
  std::vector<DisplacementEstimate> estimates;
  KMeansResult clusters;
  std::vector<RankedAnswer> answers;
  std::vector<NeighborSenses> neighbors;
};

struct ClassifyResult {
  std::string label;
  std::size_t votes = 0;
  std::size_t total = 0;
  double score = 0.0;  // majority: votes/total; label-vector: distance to the label
  ClassifyMode mode = ClassifyMode::Majority;
};

constexpr std::size_t kTrackedRanks = 4;

struct RankItem {
  std::string term;
  std::vector<std::string> gold;
  std::string predicted;       // rank-1 term, empty when no coverage
  std::optional<std::size_t> rank;  // 1-based, only within tracked ranks
  bool covered = false;
};

struct RankTable {
  std::array<double, kTrackedRanks> probability{};
  double missed = 0.0;
  std::vector<RankItem> items;
};

/// Read-only view of the three stores the pipelines consult.
struct Resources {
  const KnowledgeBase& kb;
  const EmbeddingSpace& space;
  const Lexicon& lexicon;
};

/// Hybrid KB + vector-space query pipelines: neighbor-vote
/// classification, single-answer displacement and k-means multi-answer
/// displacement. Stateless apart from the configuration.
class Displacer {
 public:
  Displacer(Resources res, PipelineConfig cfg = {}) : res_(res), cfg_(cfg) { cfg_.validate(); }

  const PipelineConfig& config() const noexcept { return cfg_; }

  /// Senses of a term, capped at max_senses and minus `hidden`.
  std::vector<std::string> senses(std::string_view term,
                                  const std::set<std::string>& hidden = {}) const {
    std::vector<std::string> out;
    for (auto& c : res_.lexicon.word2kb(term)) {
      if (hidden.count(c)) continue;
      out.push_back(std::move(c));
      if (out.size() >= cfg_.max_senses) break;
    }
    return out;
  }

  /// Nearest vocabulary terms of `term` (itself excluded) that map to KB
  /// concepts accepted by `usable`. Scans at most search_cap raw results.
  std::vector<NeighborSenses> expand_neighbors(
      std::string_view term, const std::function<bool(const std::string&)>& usable = {},
      const std::set<std::string>& hidden = {}) const {
    const Vector v = res_.space.word2vec(term);
    std::set<std::string> exclude{std::string(term)};
    std::string joined(term);
    std::replace(joined.begin(), joined.end(), ' ', '_');
    exclude.insert(joined);
    std::vector<NeighborSenses> out;
    for (auto& n : res_.space.vec2word(v, cfg_.search_cap, exclude, cfg_.knn_mode)) {
      std::vector<std::string> concepts;
      for (auto& c : senses(n.term, hidden))
        if (!usable || usable(c)) concepts.push_back(std::move(c));
      if (concepts.empty()) continue;
      out.push_back({std::move(n.term), n.distance, std::move(concepts)});
      if (out.size() >= cfg_.n_neighbors) break;
    }
    return out;
  }

  /// Ground answers of the template with the hole filled by `concept_name`.
  std::vector<SExpr> answers(const QueryTemplate& t, const std::string& concept_name) const {
    std::set<SExpr> out;
    for (auto& b : res_.kb.query(t.instantiate(SExpr::symbol(concept_name)))) {
      auto it = b.find(t.answer);
      if (it != b.end()) out.insert(std::move(it->second));
    }
    return {out.begin(), out.end()};
  }

  /// Surface term for a KB answer: preferred lexicon form, string text, or
  /// the printed expression.
  std::string surface(const SExpr& answer) const {
    if (answer.is_symbol()) return res_.lexicon.preferred_term(answer.text);
    if (answer.is_str()) return answer.text;
    return print(answer);
  }

  /// Surface answers for a neighbor, over all its senses, deduplicated.
  std::vector<std::string> neighbor_answers(const QueryTemplate& t,
                                            const NeighborSenses& n) const {
    std::vector<std::string> out;
    for (const auto& c : n.concepts)
      for (const auto& a : answers(t, c)) {
        std::string s = surface(a);
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
      }
    return out;
  }

  ClassifyResult classify_by_neighbors(std::string_view term, const QueryTemplate& t,
                                       const std::vector<std::string>& labels,
                                       const std::set<std::string>& hidden = {}) const {
    const auto neighbors = expand_neighbors(term, has_answers(t), hidden);
    if (neighbors.empty())
      throw Error(ErrorCode::NoCoverage, "no KB-covered neighbor for \"" + std::string(term) + "\"");
    std::map<std::string, std::size_t> votes;
    std::vector<Vector> answer_vectors;
    for (const auto& n : neighbors)
      for (const auto& a : neighbor_answers(t, n)) {
        if (std::find(labels.begin(), labels.end(), a) != labels.end()) ++votes[a];
        if (res_.space.resolvable(a)) answer_vectors.push_back(res_.space.word2vec(a));
      }

    ClassifyResult out;
    out.mode = cfg_.classify_mode;
    for (const auto& [_, v] : votes) out.total += v;
    if (cfg_.classify_mode == ClassifyMode::Majority) {
      if (out.total == 0) throw Error(ErrorCode::NoCoverage, "no neighbor answer is a label");
      for (const auto& l : labels) {
        const std::size_t v = votes.count(l) ? votes.at(l) : 0;
        if (2 * v > out.total) {
          out.label = l;
          out.votes = v;
        }
      }
      if (out.label.empty())
        throw Error(ErrorCode::Tie, "no label has a majority for \"" + std::string(term) + "\"");
      out.score = static_cast<double>(out.votes) / static_cast<double>(out.total);
      return out;
    }
    if (answer_vectors.empty()) throw Error(ErrorCode::NoCoverage, "no neighbor answer has a vector");
    const Vector avg = mean_of(answer_vectors);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& l : labels) {
      const double d = cosine_distance(avg, res_.space.word2vec(l));
      if (d < best) {
        best = d;
        out.label = l;
      }
    }
    out.votes = votes.count(out.label) ? votes.at(out.label) : 0;
    out.score = best;
    return out;
  }

  /// Single-answer estimate for `target`: average of v(B) - v(A) + v(A')
  /// over usable neighbors, ranked by vocabulary distance.
  SingleResult displace_single(std::string_view target, const QueryTemplate& t,
                               const std::set<std::string>& hidden = {}) const {
    SingleResult out;
    const Vector target_vec = res_.space.word2vec(target);
    out.neighbors = expand_neighbors(target, has_answers(t), hidden);
    std::set<std::string> exclude{std::string(target)};
    std::size_t contributing = 0;
    for (const auto& n : out.neighbors) {
      exclude.insert(n.term);
      const Vector source_vec = res_.space.word2vec(n.term);
      bool any = false;
      for (const auto& b : neighbor_answers(t, n)) {
        if (!res_.space.resolvable(b)) continue;
        out.estimates.push_back({n.term, b, std::string(target),
                                 offset_apply(source_vec, res_.space.word2vec(b), target_vec)});
        any = true;
      }
      contributing += any ? 1 : 0;
    }
    if (out.estimates.empty())
      throw Error(ErrorCode::NoCoverage, "no neighbor of \"" + std::string(target) +
                                             "\" has a KB answer with a vector");
    std::vector<Vector> vs;
    for (const auto& e : out.estimates) vs.push_back(e.estimated);
    out.average = mean_of(vs);

    const std::size_t pool = std::max<std::size_t>(cfg_.answers_returned, 2 * kTrackedRanks);
    for (const auto& nb : res_.space.vec2word(out.average, pool, exclude, cfg_.knn_mode)) {
      RankedAnswer a{nb.term, nb.distance, contributing, false};
      out.by_average.push_back(a);
      double total = 0.0;
      const Vector tv = res_.space.word2vec(nb.term);
      for (const auto& v : vs) total += cosine_distance(v, tv);
      a.score = total / static_cast<double>(vs.size());
      out.by_mean_distance.push_back(a);
    }
    sort_answers(out.by_mean_distance);
    apply_type_constraints(t, out.by_average);
    apply_type_constraints(t, out.by_mean_distance);
    out.by_average.resize(std::min(out.by_average.size(), cfg_.answers_returned));
    out.by_mean_distance.resize(std::min(out.by_mean_distance.size(), cfg_.answers_returned));
    return out;
  }

  /// Leave-one-out rank statistics over every (term, answer) pair the KB
  /// holds for the template restricted by `domain` (which may mention the
  /// hole variable, e.g. `(isa ?_ Country)`).
  RankTable estimate_rank_probabilities(const QueryTemplate& t,
                                        const std::optional<QueryExpr>& domain) const {
    QueryExpr all = domain ? QueryExpr::all_of({t.query, *domain}) : t.query;
    std::map<std::string, std::set<std::string>> gold;
    for (const auto& b : res_.kb.query(all)) {
      auto h = b.find(t.hole);
      auto a = b.find(t.answer);
      if (h == b.end() || a == b.end() || !h->second.is_symbol()) continue;
      gold[h->second.text].insert(surface(a->second));
    }
    if (gold.size() < 2)
      throw Error(ErrorCode::InsufficientData, "need at least two KB pairs for the template");

    RankTable table;
    std::array<std::size_t, kTrackedRanks> hits{};
    for (const auto& [concept_name, gold_terms] : gold) {
      RankItem item;
      item.term = res_.lexicon.preferred_term(concept_name);
      item.gold.assign(gold_terms.begin(), gold_terms.end());
      if (res_.space.resolvable(item.term)) {
        try {
          const auto r = displace_single(item.term, t, {concept_name});
          item.covered = true;
          if (!r.by_average.empty()) item.predicted = r.by_average.front().term;
          for (std::size_t i = 0; i < r.by_average.size() && i < kTrackedRanks; ++i)
            if (gold_terms.count(r.by_average[i].term)) {
              item.rank = i + 1;
              ++hits[i];
              break;
            }
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoCoverage) throw;
        }
      }
      table.items.push_back(std::move(item));
    }
    const double n = static_cast<double>(table.items.size());
    std::size_t found = 0;
    for (std::size_t i = 0; i < kTrackedRanks; ++i) {
      table.probability[i] = static_cast<double>(hits[i]) / n;
      found += hits[i];
    }
    table.missed = static_cast<double>(table.items.size() - found) / n;
    return table;
  }

  /// Multi-answer estimate: displace every neighbor answer, cluster the
  /// displaced vectors with k-means and name each cluster mean.
  MultiResult displace_multi(std::string_view target, const QueryTemplate& t,
                             const std::set<std::string>& hidden = {}) const {
    MultiResult out;
    const Vector target_vec = res_.space.word2vec(target);
    out.neighbors = expand_neighbors(target, has_answers(t), hidden);
    std::set<std::string> exclude{std::string(target)};
    for (const auto& n : out.neighbors) {
      exclude.insert(n.term);
      const Vector source_vec = res_.space.word2vec(n.term);
      for (const auto& b : neighbor_answers(t, n)) {
        if (!res_.space.resolvable(b)) continue;
        out.estimates.push_back({n.term, b, std::string(target),
                                 offset_apply(source_vec, res_.space.word2vec(b), target_vec)});
      }
    }
    if (out.estimates.empty())
      throw Error(ErrorCode::NoCoverage, "no neighbor of \"" + std::string(target) +
                                             "\" has a KB answer with a vector");
    std::vector<Vector> points;
    for (const auto& e : out.estimates) points.push_back(e.estimated);
    const std::size_t m = points.size();
    std::size_t k = cfg_.k_clusters.value_or(
        std::min(static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m)))) + 2, m));
    k = std::min(k, m);
    out.clusters = kmeans_restarts(points, k, cfg_.seed, cfg_.kmeans_restarts);

    std::map<std::string, RankedAnswer> best;
    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < m; ++i)
        if (out.clusters.assignments[i] == c) members.push_back(i);
      if (members.empty()) continue;
      const auto hit = res_.space.vec2word(out.clusters.means[c], 1, exclude, cfg_.knn_mode);
      if (hit.empty()) continue;
      const Vector tv = res_.space.word2vec(hit.front().term);
      double total = 0.0;
      std::set<std::string> sources;
      for (std::size_t i : members) {
        total += cosine_distance(points[i], tv);
        sources.insert(out.estimates[i].source_term);
      }
      RankedAnswer a{hit.front().term, total / static_cast<double>(members.size()), sources.size(),
                     false};
      auto [it, inserted] = best.try_emplace(a.term, a);
      if (!inserted && a.score < it->second.score) it->second = a;
    }
    for (auto& [_, a] : best) out.answers.push_back(a);
    sort_answers(out.answers);
    apply_type_constraints(t, out.answers);
    out.answers.resize(std::min(out.answers.size(), cfg_.answers_returned));
    return out;
  }

  /// Semantic-matching baseline: neighbors' own KB answers with no
  /// displacement, ranked by how many neighbors gave them, then by
  /// distance to the target.
  std::vector<RankedAnswer> semantic_matching(std::string_view target, const QueryTemplate& t,
                                              const std::set<std::string>& hidden = {}) const {
    const Vector target_vec = res_.space.word2vec(target);
    const auto neighbors = expand_neighbors(target, has_answers(t), hidden);
    std::map<std::string, std::size_t> counts;
    for (const auto& n : neighbors)
      for (const auto& b : neighbor_answers(t, n)) ++counts[b];
    if (counts.empty())
      throw Error(ErrorCode::NoCoverage, "no neighbor of \"" + std::string(target) + "\" has a KB answer");
    std::vector<RankedAnswer> out;
    for (const auto& [term, count] : counts) {
      const double d = res_.space.resolvable(term)
                           ? cosine_distance(target_vec, res_.space.word2vec(term))
                           : std::numeric_limits<double>::infinity();
      out.push_back({term, d, count, false});
    }
    std::stable_sort(out.begin(), out.end(), [](const RankedAnswer& a, const RankedAnswer& b) {
      if (a.support != b.support) return a.support > b.support;
      if (a.score != b.score) return a.score < b.score;
      return a.term < b.term;
    });
    apply_type_constraints(t, out);
    out.resize(std::min(out.size(), cfg_.answers_returned));
    return out;
  }

 private:
  std::function<bool(const std::string&)> has_answers(const QueryTemplate& t) const {
    return [this, &t](const std::string& c) { return !answers(t, c).empty(); };
  }

  static void sort_answers(std::vector<RankedAnswer>& v) {
    std::stable_sort(v.begin(), v.end(), [](const RankedAnswer& a, const RankedAnswer& b) {
      if (a.score != b.score) return a.score < b.score;
      return a.term < b.term;
    });
  }

  // Candidates whose KB senses all violate a type constraint on the answer
  // variable move behind the rest; unmapped terms are unconstrained.
  void apply_type_constraints(const QueryTemplate& t, std::vector<RankedAnswer>& v) const {
    const auto constraints = t.answer_constraints();
    if (constraints.empty()) return;
    for (auto& a : v) {
      const auto concepts = res_.lexicon.word2kb(a.term);
      if (concepts.empty()) continue;
      bool ok = false;
      for (const auto& c : concepts) {
        bool all = true;
        for (const auto& p : constraints)
          if (!res_.kb.holds(kb_detail::substitute(p, Binding{{t.answer, SExpr::symbol(c)}}))) {
            all = false;
            break;
          }
        if (all) {
          ok = true;
          break;
        }
      }
      a.demoted = !ok;
    }
    std::stable_partition(v.begin(), v.end(), [](const RankedAnswer& a) { return !a.demoted; });
  }

  Resources res_;
  PipelineConfig cfg_;
};

}  // namespace displacer

#endif  // DISPLACER_DISPLACE_HPP
