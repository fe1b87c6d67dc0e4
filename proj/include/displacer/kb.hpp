#ifndef DISPLACER_KB_HPP
#define DISPLACER_KB_HPP

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "displacer/error.hpp"
#include "displacer/sexpr.hpp"

namespace displacer {

/// Variable name (without the `?`) to ground value.
using Binding = std::map<std::string, SExpr>;

/// A ground fact `(predicate arg...)`.
struct Assertion {
  std::string predicate;
  std::vector<SExpr> args;

  SExpr to_sexpr() const {
    std::vector<SExpr> items;
    items.reserve(args.size() + 1);
    items.push_back(SExpr::symbol(predicate));
    items.insert(items.end(), args.begin(), args.end());
    return SExpr::list(std::move(items));
  }
};

/// Body element of a rule: a pattern, possibly negated.
struct Literal {
  SExpr pattern;
  bool negated = false;
};

struct HornRule {
  SExpr head;
  std::vector<Literal> body;
};

/// Conjunctive query language: patterns combined with and/or/not.
/// Unbound variables are implicitly existential.
struct QueryExpr {
  enum class Kind { Pattern, And, Or, Not };

  Kind kind = Kind::Pattern;
  SExpr pattern;                    // Pattern only
  std::vector<QueryExpr> children;  // And/Or: any number; Not: exactly one

  static QueryExpr from_pattern(SExpr p) { return {Kind::Pattern, std::move(p), {}}; }
  static QueryExpr all_of(std::vector<QueryExpr> c) { return {Kind::And, {}, std::move(c)}; }
  static QueryExpr any_of(std::vector<QueryExpr> c) { return {Kind::Or, {}, std::move(c)}; }
  static QueryExpr negation(QueryExpr c) { return {Kind::Not, {}, {std::move(c)}}; }

  static QueryExpr from_sexpr(const SExpr& e);
  static QueryExpr parse(std::string_view text) { return from_sexpr(displacer::parse(text)); }

  SExpr to_sexpr() const;
};

enum class ArgOrder { AFirst, BFirst };

struct PredicateLink {
  std::string predicate;
  ArgOrder order = ArgOrder::AFirst;
  auto operator<=>(const PredicateLink&) const = default;
};

/// (P1 anchor a) and (P2 anchor b) both hold.
struct AnchorPattern {
  std::string first_predicate;
  std::string second_predicate;
  SExpr anchor;
  auto operator<=>(const AnchorPattern&) const = default;
  bool operator==(const AnchorPattern&) const = default;
};

namespace kb_detail {

inline void collect_variables(const SExpr& e, std::set<std::string>& out) {
  if (e.is_variable()) out.insert(e.text);
  for (const auto& item : e.items) collect_variables(item, out);
}

inline bool is_connective(const SExpr& e) {
  return e.is_symbol("and") || e.is_symbol("or") || e.is_symbol("not") || e.is_symbol("<=");
}

inline void check_pattern(const SExpr& e) {
  if (!e.is_list() || e.items.size() < 2)
    throw Error(ErrorCode::BadForm, "pattern must be (predicate arg...): " + print(e));
  const SExpr& head = e.items.front();
  if (!(head.is_symbol() || head.is_variable()) || is_connective(head))
    throw Error(ErrorCode::BadForm, "pattern head must be a predicate: " + print(e));
}

/// One-way matching of a pattern against a ground term, extending `b`.
inline bool match(const SExpr& pattern, const SExpr& ground, Binding& b) {
  switch (pattern.kind) {
    case SExpr::Kind::Variable: {
      auto [it, inserted] = b.try_emplace(pattern.text, ground);
      return inserted || it->second == ground;
    }
    case SExpr::Kind::List: {
      if (!ground.is_list() || ground.items.size() != pattern.items.size()) return false;
      for (std::size_t i = 0; i < pattern.items.size(); ++i)
        if (!match(pattern.items[i], ground.items[i], b)) return false;
      return true;
    }
    default:
      return pattern == ground;
  }
}

inline SExpr substitute(const SExpr& e, const Binding& b) {
  if (e.is_variable()) {
    auto it = b.find(e.text);
    return it == b.end() ? e : it->second;
  }
  if (!e.is_list()) return e;
  std::vector<SExpr> items;
  items.reserve(e.items.size());
  for (const auto& item : e.items) items.push_back(substitute(item, b));
  return SExpr::list(std::move(items));
}

}  // namespace kb_detail

inline QueryExpr QueryExpr::from_sexpr(const SExpr& e) {
  if (e.is_list() && !e.items.empty() &&
      (e.items.front().is_symbol("and") || e.items.front().is_symbol("or") ||
       e.items.front().is_symbol("not"))) {
    const SExpr& head = e.items.front();
    std::vector<QueryExpr> children;
    for (std::size_t i = 1; i < e.items.size(); ++i) children.push_back(from_sexpr(e.items[i]));
    if (head.is_symbol("and")) return all_of(std::move(children));
    if (head.is_symbol("or")) return any_of(std::move(children));
    if (head.is_symbol("not")) {
      if (children.size() != 1) throw Error(ErrorCode::BadForm, "not takes one argument");
      return negation(std::move(children.front()));
    }
  }
  kb_detail::check_pattern(e);
  return from_pattern(e);
}

inline SExpr QueryExpr::to_sexpr() const {
  if (kind == Kind::Pattern) return pattern;
  std::vector<SExpr> items;
  items.push_back(SExpr::symbol(kind == Kind::And ? "and" : kind == Kind::Or ? "or" : "not"));
  for (const auto& c : children) items.push_back(c.to_sexpr());
  return SExpr::list(std::move(items));
}

/// Variables that a query binds when it succeeds (those under `not` excluded).
inline std::set<std::string> bound_variables(const QueryExpr& q) {
  std::set<std::string> out;
  switch (q.kind) {
    case QueryExpr::Kind::Pattern:
      kb_detail::collect_variables(q.pattern, out);
      break;
    case QueryExpr::Kind::And:
      for (const auto& c : q.children) {
        auto sub = bound_variables(c);
        out.insert(sub.begin(), sub.end());
      }
      break;
    case QueryExpr::Kind::Or:
      if (!q.children.empty()) out = bound_variables(q.children.front());
      break;
    case QueryExpr::Kind::Not:
      break;
  }
  return out;
}

/// Ground-fact store with stratified Horn-rule inference.
///
/// Facts and rules are added in an exclusive loading phase. The least
/// fixpoint is materialized bottom-up (semi-naive) on `freeze()` or lazily
/// on the first query; afterwards const queries are safe to run from
/// several threads.
class KnowledgeBase {
 public:
  explicit KnowledgeBase(std::size_t depth_limit = 32) : depth_limit_(depth_limit) {}

  KnowledgeBase(const KnowledgeBase& other)
      : depth_limit_(other.depth_limit_), facts_(other.facts_), rules_(other.rules_) {}
  KnowledgeBase& operator=(const KnowledgeBase& other) {
    if (this != &other) {
      depth_limit_ = other.depth_limit_;
      facts_ = other.facts_;
      rules_ = other.rules_;
      invalidate();
    }
    return *this;
  }

  void assert_fact(const Assertion& a) { assert_fact(a.to_sexpr()); }

  void assert_fact(const SExpr& fact) {
    kb_detail::check_pattern(fact);
    if (!fact.items.front().is_symbol())
      throw Error(ErrorCode::NonGroundAssertion, "predicate must be a symbol: " + print(fact));
    if (!fact.is_ground())
      throw Error(ErrorCode::NonGroundAssertion, print(fact));
    if (facts_.insert(fact).second) invalidate();
  }

  void add_rule(HornRule rule) {
    kb_detail::check_pattern(rule.head);
    if (!rule.head.items.front().is_symbol())
      throw Error(ErrorCode::UnsafeRule, "rule head predicate must be a symbol");
    std::set<std::string> positive;
    for (const auto& lit : rule.body) {
      kb_detail::check_pattern(lit.pattern);
      if (!lit.negated) kb_detail::collect_variables(lit.pattern, positive);
    }
    std::set<std::string> needed;
    kb_detail::collect_variables(rule.head, needed);
    for (const auto& lit : rule.body)
      if (lit.negated) kb_detail::collect_variables(lit.pattern, needed);
    for (const auto& v : needed)
      if (!positive.count(v))
        throw Error(ErrorCode::UnsafeRule,
                    "?" + v + " not bound by a positive body literal in " + print(rule.head));
    rules_.push_back(std::move(rule));
    invalidate();
  }

  /// Accepts `(<= head body...)`, where body items may be `(and ...)` and `(not p)`.
  void add_rule(const SExpr& form) { add_rule(rule_from_sexpr(form)); }

  static HornRule rule_from_sexpr(const SExpr& form) {
    if (!form.is_list() || form.items.size() < 3 || !form.items.front().is_symbol("<="))
      throw Error(ErrorCode::BadForm, "rule must be (<= head body...): " + print(form));
    HornRule rule;
    rule.head = form.items[1];
    for (std::size_t i = 2; i < form.items.size(); ++i) flatten_body(form.items[i], rule.body);
    return rule;
  }

  /// Loads one form per line (forms may span lines); `;` starts a comment.
  void load_text(std::string_view text) {
    for (const auto& [form, line] : parse_all(text)) {
      try {
        if (form.is_list() && !form.items.empty() && form.items.front().is_symbol("<="))
          add_rule(form);
        else if (form.is_list() && !form.items.empty() &&
                 kb_detail::is_connective(form.items.front()))
          throw Error(ErrorCode::BadForm, "unsupported top-level form " + print(form));
        else
          assert_fact(form);
      } catch (const Error& e) {
        throw Error::at_line(e.code(), line, e.what());
      }
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open KB file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    load_text(ss.str());
  }

  std::size_t fact_count() const noexcept { return facts_.size(); }
  std::size_t rule_count() const noexcept { return rules_.size(); }
  const std::set<SExpr>& asserted_facts() const noexcept { return facts_; }
  std::size_t depth_limit() const noexcept { return depth_limit_; }
  void set_depth_limit(std::size_t limit) {
    depth_limit_ = limit;
    invalidate();
  }

  /// Materializes the fixpoint now. Throws DepthLimitExceeded or Unstratifiable.
  void freeze() const { materialized(); }

  /// Every fact derivable from the asserted facts and rules.
  const std::set<SExpr>& derived_facts() const { return materialized().all; }

  bool holds(const SExpr& ground) const { return materialized().all.count(ground) > 0; }

  /// All bindings of the query's free variables that make it true,
  /// sorted and without duplicates.
  std::vector<Binding> query(const QueryExpr& q) const {
    check_safety(q, {});
    const auto& store = materialized();
    std::vector<Binding> rows = evaluate(store, q, {Binding{}});
    const auto vars = bound_variables(q);
    std::set<Binding> unique;
    for (auto& row : rows) {
      Binding projected;
      for (const auto& v : vars) {
        auto it = row.find(v);
        if (it != row.end()) projected.emplace(v, std::move(it->second));
      }
      unique.insert(std::move(projected));
    }
    return {unique.begin(), unique.end()};
  }

  std::vector<Binding> query(std::string_view text) const { return query(QueryExpr::parse(text)); }

  /// Predicates P with (P a b) or (P b a) derivable, tagged with which of
  /// a, b comes first.
  std::set<PredicateLink> predicates_between(const SExpr& a, const SExpr& b) const {
    std::set<PredicateLink> out;
    for (const auto& fact : materialized().all) {
      if (fact.items.size() != 3) continue;
      const std::string& pred = fact.items[0].text;
      if (fact.items[1] == a && fact.items[2] == b) out.insert({pred, ArgOrder::AFirst});
      if (fact.items[1] == b && fact.items[2] == a) out.insert({pred, ArgOrder::BFirst});
    }
    return out;
  }

  /// All (P1, P2, r) with (P1 r a) and (P2 r b) derivable; empty when a == b.
  std::set<AnchorPattern> shared_anchor_patterns(const SExpr& a, const SExpr& b) const {
    std::set<AnchorPattern> out;
    if (a == b) return out;
    std::vector<std::pair<std::string, const SExpr*>> to_a, to_b;
    for (const auto& fact : materialized().all) {
      if (fact.items.size() != 3) continue;
      if (fact.items[2] == a) to_a.emplace_back(fact.items[0].text, &fact.items[1]);
      if (fact.items[2] == b) to_b.emplace_back(fact.items[0].text, &fact.items[1]);
    }
    for (const auto& [p1, r1] : to_a)
      for (const auto& [p2, r2] : to_b)
        if (*r1 == *r2) out.insert({p1, p2, *r1});
    return out;
  }

 private:
  struct Store {
    std::set<SExpr> all;
    std::unordered_map<std::string, std::vector<const SExpr*>> by_predicate;

    bool add(SExpr fact, std::vector<SExpr>* fresh) {
      auto [it, inserted] = all.insert(std::move(fact));
      if (!inserted) return false;
      by_predicate[it->items.front().text].push_back(&*it);
      if (fresh) fresh->push_back(*it);
      return true;
    }
  };

  static void flatten_body(const SExpr& e, std::vector<Literal>& out) {
    if (e.is_list() && !e.items.empty() && e.items.front().is_symbol("and")) {
      for (std::size_t i = 1; i < e.items.size(); ++i) flatten_body(e.items[i], out);
      return;
    }
    if (e.is_list() && e.items.size() == 2 && e.items.front().is_symbol("not")) {
      out.push_back({e.items[1], true});
      return;
    }
    if (e.is_list() && !e.items.empty() && e.items.front().is_symbol("or"))
      throw Error(ErrorCode::BadForm, "disjunction is not allowed in rule bodies");
    out.push_back({e, false});
  }

  void invalidate() {
    std::lock_guard lock(mutex_);
    store_valid_ = false;
  }

  const Store& materialized() const {
    std::lock_guard lock(mutex_);
    if (!store_valid_) {
      store_ = build_store();
      store_valid_ = true;
    }
    return store_;
  }

  // Predicates in stratum order; -1 marks variable-predicate dependencies.
  std::vector<std::vector<const HornRule*>> stratify() const {
    std::set<std::string> heads;
    for (const auto& r : rules_) heads.insert(r.head.items.front().text);
    std::map<std::string, int> stratum;
    for (const auto& h : heads) stratum[h] = 0;
    // Bellman-Ford style relaxation; a negative cycle shows up as a stratum
    // exceeding the number of head predicates.
    const int limit = static_cast<int>(heads.size());
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& r : rules_) {
        const std::string& h = r.head.items.front().text;
        for (const auto& lit : r.body) {
          const SExpr& ph = lit.pattern.items.front();
          std::vector<std::string> deps;
          if (ph.is_variable())
            deps.assign(heads.begin(), heads.end());
          else if (heads.count(ph.text))
            deps.push_back(ph.text);
          for (const auto& d : deps) {
            const int need = stratum[d] + (lit.negated ? 1 : 0);
            if (stratum[h] < need) {
              stratum[h] = need;
              if (need > limit)
                throw Error(ErrorCode::Unstratifiable, "negation through recursion on " + h);
              changed = true;
            }
          }
        }
      }
    }
    int top = 0;
    for (const auto& [_, s] : stratum) top = std::max(top, s);
    std::vector<std::vector<const HornRule*>> strata(static_cast<std::size_t>(top) + 1);
    for (const auto& r : rules_) strata[stratum[r.head.items.front().text]].push_back(&r);
    return strata;
  }

  Store build_store() const {
    Store store;
    for (const auto& f : facts_) store.add(f, nullptr);
    if (rules_.empty()) return store;
    for (const auto& rules : stratify()) {
      std::vector<SExpr> delta;
      // First round: every rule over the full store.
      for (const HornRule* r : rules) fire(store, *r, nullptr, std::size_t(-1), delta);
      std::size_t rounds = 1;
      while (!delta.empty()) {
        if (++rounds > depth_limit_)
          throw Error(ErrorCode::DepthLimitExceeded,
                      "fixpoint not reached within " + std::to_string(depth_limit_) + " rounds");
        Store delta_store;
        for (auto& f : delta) delta_store.add(std::move(f), nullptr);
        std::vector<SExpr> next;
        for (const HornRule* r : rules)
          for (std::size_t i = 0; i < r->body.size(); ++i)
            if (!r->body[i].negated) fire(store, *r, &delta_store, i, next);
        delta = std::move(next);
      }
    }
    return store;
  }

  // Evaluates one rule; literal `delta_index` (if any) ranges over `delta`
  // only, the rest over the full store.
  static void fire(Store& store, const HornRule& rule, const Store* delta,
                   std::size_t delta_index, std::vector<SExpr>& fresh) {
    std::vector<Binding> rows{Binding{}};
    for (std::size_t i = 0; i < rule.body.size() && !rows.empty(); ++i) {
      if (rule.body[i].negated) continue;
      const Store& source = (delta && i == delta_index) ? *delta : store;
      rows = join(source, rule.body[i].pattern, rows);
    }
    std::vector<SExpr> derived;
    for (const auto& row : rows) {
      bool blocked = false;
      for (const auto& lit : rule.body)
        if (lit.negated && store.all.count(kb_detail::substitute(lit.pattern, row))) {
          blocked = true;
          break;
        }
      if (!blocked) derived.push_back(kb_detail::substitute(rule.head, row));
    }
    for (auto& d : derived) store.add(std::move(d), &fresh);
  }

  static std::vector<Binding> join(const Store& store, const SExpr& pattern,
                                   const std::vector<Binding>& rows) {
    std::vector<Binding> out;
    for (const auto& row : rows) {
      const SExpr p = kb_detail::substitute(pattern, row);
      auto try_fact = [&](const SExpr& fact) {
        Binding b = row;
        if (kb_detail::match(p, fact, b)) out.push_back(std::move(b));
      };
      if (p.items.front().is_variable()) {
        for (const auto& fact : store.all) try_fact(fact);
      } else if (p.is_ground()) {
        if (store.all.count(p)) out.push_back(row);
      } else {
        auto it = store.by_predicate.find(p.items.front().text);
        if (it == store.by_predicate.end()) continue;
        for (const SExpr* fact : it->second) try_fact(*fact);
      }
    }
    return out;
  }

  static void check_safety(const QueryExpr& q, const std::set<std::string>& bound) {
    switch (q.kind) {
      case QueryExpr::Kind::Pattern:
        return;
      case QueryExpr::Kind::Not: {
        std::set<std::string> vars;
        collect_query_variables(q.children.front(), vars);
        for (const auto& v : vars)
          if (!bound.count(v))
            throw Error(ErrorCode::UnsafeNegation,
                        "?" + v + " under not is not bound by a sibling conjunct");
        check_safety(q.children.front(), bound);
        return;
      }
      case QueryExpr::Kind::And: {
        std::set<std::string> inner = bound;
        for (const auto& c : q.children)
          if (c.kind != QueryExpr::Kind::Not) {
            check_safety(c, inner);
            auto sub = bound_variables(c);
            inner.insert(sub.begin(), sub.end());
          }
        for (const auto& c : q.children)
          if (c.kind == QueryExpr::Kind::Not) check_safety(c, inner);
        return;
      }
      case QueryExpr::Kind::Or: {
        std::set<std::string> first;
        for (std::size_t i = 0; i < q.children.size(); ++i) {
          check_safety(q.children[i], bound);
          auto vars = bound_variables(q.children[i]);
          std::erase_if(vars, [&](const std::string& v) { return bound.count(v) > 0; });
          if (i == 0)
            first = vars;
          else if (vars != first)
            throw Error(ErrorCode::UnsafeQuery, "or branches bind different variables");
        }
        return;
      }
    }
  }

  static void collect_query_variables(const QueryExpr& q, std::set<std::string>& out) {
    if (q.kind == QueryExpr::Kind::Pattern) kb_detail::collect_variables(q.pattern, out);
    for (const auto& c : q.children) collect_query_variables(c, out);
  }

  static std::vector<Binding> evaluate(const Store& store, const QueryExpr& q,
                                       std::vector<Binding> rows) {
    switch (q.kind) {
      case QueryExpr::Kind::Pattern:
        return join(store, q.pattern, rows);
      case QueryExpr::Kind::And: {
        for (const auto& c : q.children)
          if (c.kind != QueryExpr::Kind::Not) {
            rows = evaluate(store, c, std::move(rows));
            if (rows.empty()) return rows;
          }
        for (const auto& c : q.children)
          if (c.kind == QueryExpr::Kind::Not) rows = evaluate(store, c, std::move(rows));
        return rows;
      }
      case QueryExpr::Kind::Or: {
        std::vector<Binding> out;
        for (const auto& c : q.children) {
          auto sub = evaluate(store, c, rows);
          out.insert(out.end(), std::make_move_iterator(sub.begin()),
                     std::make_move_iterator(sub.end()));
        }
        return out;
      }
      case QueryExpr::Kind::Not: {
        std::vector<Binding> out;
        for (auto& row : rows)
          if (evaluate(store, q.children.front(), {row}).empty()) out.push_back(std::move(row));
        return out;
      }
    }
    return {};
  }

  std::size_t depth_limit_;
  std::set<SExpr> facts_;
  std::vector<HornRule> rules_;

  mutable std::mutex mutex_;
  mutable Store store_;
  mutable bool store_valid_ = false;
};

}  // namespace displacer

#endif  // DISPLACER_KB_HPP
