// Test-only helpers: random generators and brute-force reference
// implementations the library is checked against.
#ifndef DISPLACER_TESTS_SUPPORT_HPP
#define DISPLACER_TESTS_SUPPORT_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "displacer/displacer.hpp"
#include "displacer/harness/synthetic.hpp"

namespace support {

using displacer::SExpr;
using displacer::Vector;

// ---- s-expressions ----

inline std::string random_name(std::mt19937_64& rng) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_*+!<>=/.:";
  std::uniform_int_distribution<std::size_t> len(1, 8), pick(0, alphabet.size() - 1);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng)];
  return s;
}

inline std::string random_string(std::mt19937_64& rng) {
  static const std::string alphabet = "ab c\"\\()?;\t\nxyz";
  std::uniform_int_distribution<std::size_t> len(0, 6), pick(0, alphabet.size() - 1);
  std::string s;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng)];
  return s;
}

inline SExpr random_sexpr(std::mt19937_64& rng, int depth = 0) {
  std::uniform_int_distribution<int> kind(0, depth > 3 ? 2 : 4);
  switch (kind(rng)) {
    case 0: return SExpr::symbol(random_name(rng));
    case 1: return SExpr::variable(random_name(rng));
    case 2: return SExpr::str(random_string(rng));
    default: {
      std::uniform_int_distribution<std::size_t> n(0, 4);
      std::vector<SExpr> items;
      const std::size_t count = n(rng);
      for (std::size_t i = 0; i < count; ++i) items.push_back(random_sexpr(rng, depth + 1));
      return SExpr::list(std::move(items));
    }
  }
}

// Same expression with random extra whitespace and comments between tokens.
inline std::string noisy_print(const SExpr& e, std::mt19937_64& rng) {
  auto gap = [&] {
    static const char* gaps[] = {" ", "  ", "\n", "\t", " ; note\n", "\r\n "};
    return std::string(gaps[std::uniform_int_distribution<std::size_t>(0, 5)(rng)]);
  };
  if (!e.is_list()) return displacer::print(e);
  std::string out = "(" + gap();
  for (const auto& item : e.items) out += noisy_print(item, rng) + gap();
  return out + ")";
}

// ---- KB reference: naive fixpoint by exhaustive grounding ----

inline void vars_of(const SExpr& e, std::set<std::string>& out) {
  if (e.is_variable()) out.insert(e.text);
  for (const auto& item : e.items) vars_of(item, out);
}

inline SExpr ground(const SExpr& e, const displacer::Binding& b) {
  if (e.is_variable()) return b.count(e.text) ? b.at(e.text) : e;
  SExpr out = e;
  for (auto& item : out.items) item = ground(item, b);
  return out;
}

struct RandomKb {
  std::vector<SExpr> facts;
  std::vector<SExpr> rules;  // (<= head body...)
  std::vector<std::string> constants;
  std::map<std::string, std::size_t> arity;
  std::vector<std::string> predicates;  // in stratum order
};

// Predicates p0..p5 (arity 1 or 2). A rule for p_i may use p_j positively
// for j <= i and negatively only for j < i, so every KB is stratifiable.
inline RandomKb random_kb(std::mt19937_64& rng) {
  RandomKb kb;
  std::uniform_int_distribution<std::size_t> nconst(3, 6), npred(3, 6);
  const std::size_t nc = nconst(rng), np = npred(rng);
  for (std::size_t i = 0; i < nc; ++i) kb.constants.push_back("c" + std::to_string(i));
  for (std::size_t i = 0; i < np; ++i) {
    const std::string p = "p" + std::to_string(i);
    kb.predicates.push_back(p);
    kb.arity[p] = std::uniform_int_distribution<int>(0, 3)(rng) == 0 ? 1 : 2;
  }
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto atom = [&](const std::string& p, const std::function<SExpr()>& arg) {
    std::vector<SExpr> items{SExpr::symbol(p)};
    for (std::size_t i = 0; i < kb.arity[p]; ++i) items.push_back(arg());
    return SExpr::list(std::move(items));
  };
  const std::size_t nfacts = std::uniform_int_distribution<std::size_t>(5, 40)(rng);
  std::set<SExpr> seen;
  for (std::size_t i = 0; i < nfacts; ++i) {
    const SExpr f = atom(kb.predicates[pick(np)], [&] { return SExpr::symbol(kb.constants[pick(nc)]); });
    if (seen.insert(f).second) kb.facts.push_back(f);
  }
  const std::size_t nrules = std::uniform_int_distribution<std::size_t>(0, 6)(rng);
  static const char* vars[] = {"X", "Y", "Z"};
  for (std::size_t r = 0; r < nrules; ++r) {
    const std::size_t hi = 1 + pick(np - 1);  // heads are never p0
    const std::string head_pred = kb.predicates[hi];
    auto term = [&]() -> SExpr {
      if (pick(5) == 0) return SExpr::symbol(kb.constants[pick(nc)]);
      return SExpr::variable(vars[pick(3)]);
    };
    std::vector<SExpr> body;
    std::set<std::string> bound;
    const std::size_t npos = 1 + pick(2);
    for (std::size_t i = 0; i < npos; ++i) {
      SExpr a = atom(kb.predicates[pick(hi + 1)], term);
      vars_of(a, bound);
      body.push_back(std::move(a));
    }
    if (bound.empty()) continue;
    std::vector<std::string> bv(bound.begin(), bound.end());
    auto bound_term = [&]() -> SExpr {
      if (pick(6) == 0) return SExpr::symbol(kb.constants[pick(nc)]);
      return SExpr::variable(bv[pick(bv.size())]);
    };
    if (pick(3) == 0) {
      SExpr neg = atom(kb.predicates[pick(hi)], bound_term);
      body.push_back(SExpr::list({SExpr::symbol("not"), std::move(neg)}));
    }
    std::vector<SExpr> rule{SExpr::symbol("<="), atom(head_pred, bound_term)};
    for (auto& b : body) rule.push_back(std::move(b));
    kb.rules.push_back(SExpr::list(std::move(rule)));
  }
  return kb;
}

inline void assignments(const std::vector<std::string>& vars, const std::vector<std::string>& domain,
                        const std::function<void(const displacer::Binding&)>& f) {
  displacer::Binding b;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == vars.size()) {
      f(b);
      return;
    }
    for (const auto& c : domain) {
      b[vars[i]] = SExpr::symbol(c);
      rec(i + 1);
    }
  };
  rec(0);
}

inline std::string head_predicate(const SExpr& rule) { return rule.items[1].items[0].text; }

/// Least model by stratum-ordered naive iteration over every grounding.
inline std::set<SExpr> reference_model(const RandomKb& kb) {
  std::set<SExpr> model(kb.facts.begin(), kb.facts.end());
  for (const auto& p : kb.predicates) {
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& rule : kb.rules) {
        if (head_predicate(rule) != p) continue;
        std::set<std::string> vs;
        vars_of(rule, vs);
        const std::vector<std::string> vars(vs.begin(), vs.end());
        std::vector<SExpr> derived;
        assignments(vars, kb.constants, [&](const displacer::Binding& b) {
          for (std::size_t i = 2; i < rule.items.size(); ++i) {
            const SExpr& lit = rule.items[i];
            const bool neg = lit.items.front().is_symbol("not");
            const SExpr g = ground(neg ? lit.items[1] : lit, b);
            if (model.count(g) == (neg ? 1u : 0u)) return;
          }
          derived.push_back(ground(rule.items[1], b));
        });
        for (auto& d : derived) changed |= model.insert(std::move(d)).second;
      }
    }
  }
  return model;
}

// Random safe query over the KB's vocabulary: a conjunction of 1-2
// patterns, optionally an `or` of two patterns over the same variables,
// optionally a negated pattern over bound variables.
inline SExpr random_query(const RandomKb& kb, std::mt19937_64& rng) {
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  static const char* vars[] = {"A", "B", "C"};
  auto atom = [&](const std::function<SExpr()>& arg) {
    const std::string& p = kb.predicates[pick(kb.predicates.size())];
    std::vector<SExpr> items{SExpr::symbol(p)};
    for (std::size_t i = 0; i < kb.arity.at(p); ++i) items.push_back(arg());
    return SExpr::list(std::move(items));
  };
  auto term = [&]() -> SExpr {
    if (pick(4) == 0) return SExpr::symbol(kb.constants[pick(kb.constants.size())]);
    return SExpr::variable(vars[pick(3)]);
  };
  std::vector<SExpr> conj;
  std::set<std::string> bound;
  const std::size_t n = 1 + pick(2);
  for (std::size_t i = 0; i < n; ++i) {
    conj.push_back(atom(term));
    vars_of(conj.back(), bound);
  }
  if (pick(3) == 0) {
    // Both branches mention exactly the same variables.
    const SExpr x = SExpr::variable(vars[pick(3)]);
    auto one_var = [&] {
      const std::string& p = kb.predicates[pick(kb.predicates.size())];
      std::vector<SExpr> items{SExpr::symbol(p), x};
      if (kb.arity.at(p) == 2) items.push_back(SExpr::symbol(kb.constants[pick(kb.constants.size())]));
      return SExpr::list(std::move(items));
    };
    conj.push_back(SExpr::list({SExpr::symbol("or"), one_var(), one_var()}));
    bound.insert(x.text);
  }
  if (!bound.empty() && pick(3) == 0) {
    std::vector<std::string> bv(bound.begin(), bound.end());
    conj.push_back(SExpr::list({SExpr::symbol("not"), atom([&]() -> SExpr {
                                  if (pick(5) == 0)
                                    return SExpr::symbol(kb.constants[pick(kb.constants.size())]);
                                  return SExpr::variable(bv[pick(bv.size())]);
                                })}));
  }
  if (conj.size() == 1) return conj.front();
  std::vector<SExpr> items{SExpr::symbol("and")};
  for (auto& c : conj) items.push_back(std::move(c));
  return SExpr::list(std::move(items));
}

inline bool reference_holds(const SExpr& q, const std::set<SExpr>& model) {
  if (q.is_list() && !q.items.empty()) {
    const SExpr& h = q.items.front();
    if (h.is_symbol("and")) {
      for (std::size_t i = 1; i < q.items.size(); ++i)
        if (!reference_holds(q.items[i], model)) return false;
      return true;
    }
    if (h.is_symbol("or")) {
      for (std::size_t i = 1; i < q.items.size(); ++i)
        if (reference_holds(q.items[i], model)) return true;
      return false;
    }
    if (h.is_symbol("not")) return !reference_holds(q.items[1], model);
  }
  return model.count(q) > 0;
}

/// Every assignment of the query's variables over the constants that
/// makes the query true.
inline std::set<displacer::Binding> reference_query(const SExpr& q, const std::set<SExpr>& model,
                                                    const std::vector<std::string>& constants) {
  std::set<std::string> vs;
  vars_of(q, vs);
  std::set<displacer::Binding> out;
  assignments({vs.begin(), vs.end()}, constants, [&](const displacer::Binding& b) {
    if (reference_holds(ground(q, b), model)) out.insert(b);
  });
  return out;
}

// ---- vectors ----

inline std::vector<double> random_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> out(n * dim);
  for (auto& x : out) x = g(rng);
  return out;
}

inline double ref_cosine_distance(const double* a, const double* b, std::size_t dim) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return 1.0 - ab / (std::sqrt(aa) * std::sqrt(bb));
}

/// Brute-force k nearest (cosine), ties by term.
inline std::vector<std::string> brute_knn(const displacer::EmbeddingSpace& space, const Vector& q,
                                          std::size_t k, const std::set<std::string>& exclude = {}) {
  std::vector<std::pair<double, std::string>> all;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& t = space.terms()[i];
    if (exclude.count(t)) continue;
    all.emplace_back(ref_cosine_distance(q.data(), space.row(i).data(), space.dim()), t);
  }
  std::sort(all.begin(), all.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k && i < all.size(); ++i) out.push_back(all[i].second);
  return out;
}

// ---- displacement replay for the country/capital family ----

struct ReplayTable {
  std::array<double, 4> probability{};
  double missed = 0.0;
  std::size_t items = 0;
};

/// Leave-one-out over the countries whose capital the KB lists: average
/// capital(n) - country(n) + country(t) over the n nearest such countries,
/// then the rank of the true capital among all terms except t and its
/// neighbors. Works from the generator's ground truth, not the KB.
inline ReplayTable replay_capital_ranks(const displacer::harness::SyntheticWorld& w,
                                        std::size_t n_neighbors) {
  std::set<std::string> held(w.held_out_countries.begin(), w.held_out_countries.end());
  std::vector<std::pair<std::string, std::string>> known;
  for (const auto& cc : w.capitals)
    if (!held.count(cc.first)) known.push_back(cc);
  const std::size_t dim = w.spec.dim;
  ReplayTable t;
  std::array<std::size_t, 4> hits{};
  for (const auto& [country, capital] : known) {
    const Vector& v = w.vector_of(country);
    std::vector<std::pair<double, std::string>> cand;
    for (const auto& [other, _] : known)
      if (other != country)
        cand.emplace_back(ref_cosine_distance(v.data(), w.vector_of(other).data(), dim), other);
    std::sort(cand.begin(), cand.end());
    std::set<std::string> exclude{country};
    Vector est(dim, 0.0);
    std::size_t used = 0;
    for (const auto& [d, other] : cand) {
      if (used == n_neighbors) break;
      std::string cap;
      for (const auto& cc : known)
        if (cc.first == other) cap = cc.second;
      const Vector& a = w.vector_of(other);
      const Vector& b = w.vector_of(cap);
      for (std::size_t i = 0; i < dim; ++i) est[i] += b[i] - a[i] + v[i];
      exclude.insert(other);
      ++used;
    }
    for (auto& x : est) x /= static_cast<double>(used);
    std::vector<std::pair<double, std::string>> ranked;
    for (const auto& [term, vec] : w.rows)
      if (!exclude.count(term)) ranked.emplace_back(ref_cosine_distance(est.data(), vec.data(), dim), term);
    std::sort(ranked.begin(), ranked.end());
    for (std::size_t r = 0; r < 4 && r < ranked.size(); ++r)
      if (ranked[r].second == capital) {
        ++hits[r];
        break;
      }
    ++t.items;
  }
  std::size_t found = 0;
  for (std::size_t r = 0; r < 4; ++r) {
    t.probability[r] = static_cast<double>(hits[r]) / static_cast<double>(t.items);
    found += hits[r];
  }
  t.missed = static_cast<double>(t.items - found) / static_cast<double>(t.items);
  return t;
}

}  // namespace support

#endif  // DISPLACER_TESTS_SUPPORT_HPP
