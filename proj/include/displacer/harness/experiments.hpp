#ifndef DISPLACER_HARNESS_EXPERIMENTS_HPP
#define DISPLACER_HARNESS_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "displacer/analogy.hpp"
#include "displacer/displace.hpp"
#include "displacer/error.hpp"
#include "displacer/kb.hpp"
#include "displacer/lexicon.hpp"
#include "displacer/vecspace.hpp"
#include "displacer/harness/config.hpp"
#include "displacer/harness/datasets.hpp"
#include "displacer/harness/report.hpp"
#include "displacer/harness/synthetic.hpp"

namespace displacer::harness {

/// The three stores, loaded together.
struct LoadedWorld {
  KnowledgeBase kb;
  EmbeddingSpace space;
  Lexicon lexicon;
  std::string source = "user";

  Resources resources() const { return {kb, space, lexicon}; }
};

struct DataPaths {
  std::string kb, embeddings, lexicon;
};

inline std::unique_ptr<LoadedWorld> load_world(const DataPaths& p, std::string source = "user") {
  auto w = std::make_unique<LoadedWorld>();
  if (!p.kb.empty()) w->kb.load_file(p.kb);
  if (p.embeddings.empty()) throw Error(ErrorCode::BadConfig, "an embeddings file is required");
  w->space = EmbeddingSpace::load_file(p.embeddings);
  if (!p.lexicon.empty()) w->lexicon.load_file(p.lexicon);
  w->source = std::move(source);
  return w;
}

/// A directory written by gen-world (or laid out the same way).
inline DataPaths world_dir_paths(const std::filesystem::path& dir) {
  return {(dir / "kb.kb").string(), (dir / "embeddings.txt").string(),
          (dir / "lexicon.tsv").string()};
}

inline std::unique_ptr<LoadedWorld> load_world_dir(const std::filesystem::path& dir) {
  const bool synthetic = std::filesystem::exists(dir / "world.cfg");
  return load_world(world_dir_paths(dir), synthetic ? "synthetic" : "user");
}

inline std::unique_ptr<LoadedWorld> load_world(const SyntheticWorld& s) {
  auto w = std::make_unique<LoadedWorld>();
  w->kb.load_text(s.kb);
  w->space = EmbeddingSpace::load_text(s.embeddings());
  w->lexicon.load_text(s.lexicon);
  w->source = "synthetic";
  return w;
}

/// Everything a runner needs besides its input data.
struct RunContext {
  const LoadedWorld& world;
  PipelineConfig pipeline;
  AnalogyConfig analogy;
};

namespace experiments_detail {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline ExperimentReport start(const std::string& id, const RunContext& ctx) {
  ExperimentReport r;
  r.experiment = id;
  r.data_source = ctx.world.source;
  r.config = snapshot(ctx.pipeline, ctx.analogy);
  return r;
}

inline ItemRecord record(std::size_t index, std::string group, std::string input,
                         std::vector<std::string> gold, std::string predicted = {}) {
  ItemRecord r;
  r.index = index;
  r.group = std::move(group);
  r.input = std::move(input);
  r.gold = std::move(gold);
  r.predicted = std::move(predicted);
  return r;
}

inline std::optional<std::size_t> first_rank(const std::vector<std::string>& ranked,
                                             const std::vector<std::string>& gold) {
  for (std::size_t i = 0; i < ranked.size(); ++i)
    if (std::find(gold.begin(), gold.end(), ranked[i]) != gold.end()) return i + 1;
  return std::nullopt;
}

inline std::string join(const std::vector<std::string>& v, std::size_t limit) {
  std::string out;
  for (std::size_t i = 0; i < v.size() && i < limit; ++i) out += (i ? "|" : "") + v[i];
  return out;
}

inline std::vector<std::string> terms_of(const std::vector<RankedAnswer>& v) {
  std::vector<std::string> out;
  for (const auto& a : v) out.push_back(a.term);
  return out;
}

// Fraction of the first three answers that are gold.
inline double top3_precision(const std::vector<std::string>& ranked,
                             const std::vector<std::string>& gold) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ranked.size() && i < 3; ++i)
    if (std::find(gold.begin(), gold.end(), ranked[i]) != gold.end()) ++hits;
  return static_cast<double>(hits) / 3.0;
}

inline bool recoverable(ErrorCode c) {
  return c == ErrorCode::NoCoverage || c == ErrorCode::OutOfVocabulary || c == ErrorCode::Tie ||
         c == ErrorCode::NoKbAnswer || c == ErrorCode::UnknownConcept;
}

}  // namespace experiments_detail

inline const char* kGenderTemplate = "(and (givenName ?P ?_) (gender ?P ?Y))";
inline const char* kPartsTemplate =
    "(and (physicalPartTypes ?_ ?X) (genls ?X SolidTangibleArtifact))";
inline const char* kCapitalTemplate = "(capitalCity ?X ?_)";
inline const char* kCapitalDomain = "(isa ?_ Country)";

/// Name -> gender. Two rows per name: "kb" (direct lookup) and
/// "displacer" (neighbor vote). Confusion counts are gold.predicted.
inline ExperimentReport run_gender(const RunContext& ctx, const std::vector<NameRecord>& names,
                                   std::string_view template_text = kGenderTemplate) {
  using namespace experiments_detail;
  Timer timer;
  auto report = start("gender", ctx);
  report.confusion = true;
  report.config["template"] = std::string(template_text);
  const auto t = QueryTemplate::parse(template_text, "_", "Y");
  const Displacer d(ctx.world.resources(), ctx.pipeline);
  std::vector<std::string> labels;
  for (const auto& n : names)
    if (std::find(labels.begin(), labels.end(), n.gender) == labels.end())
      labels.push_back(n.gender);
  std::sort(labels.begin(), labels.end());

  std::size_t index = 0;
  for (const auto& n : names) {
    ItemRecord kb = record(index++, "kb", n.name, {n.gender});
    std::vector<std::string> direct;
    for (const auto& c : ctx.world.lexicon.word2kb(n.name))
      for (const auto& a : d.answers(t, c)) {
        const std::string s = d.surface(a);
        if (std::find(direct.begin(), direct.end(), s) == direct.end()) direct.push_back(s);
      }
    if (!direct.empty()) {
      kb.covered = true;
      kb.predicted = direct.size() == 1 ? direct.front() : join(direct, direct.size());
      kb.correct = kb.predicted == n.gender;
      kb.rank = kb.correct ? std::optional<std::size_t>(1) : std::nullopt;
    }
    report.items.push_back(std::move(kb));

    ItemRecord dv = record(index++, "displacer", n.name, {n.gender});
    try {
      const auto c = d.classify_by_neighbors(n.name, t, labels);
      dv.covered = true;
      dv.predicted = c.label;
      dv.correct = c.label == n.gender;
      dv.rank = dv.correct ? std::optional<std::size_t>(1) : std::nullopt;
      dv.score = c.score;
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
      dv.note = std::string(to_string(e.code()));
      dv.covered = e.code() == ErrorCode::Tie;
    }
    report.items.push_back(std::move(dv));
  }
  finalize(report);
  report.wall_time_s = timer.seconds();
  return report;
}

struct RankTemplate {
  std::string name;
  std::string query;
  std::string domain;  // may be empty
};

/// Leave-one-out rank statistics for each template; one group per template.
inline ExperimentReport run_rank_probability(const RunContext& ctx,
                                             const std::vector<RankTemplate>& templates) {
  using namespace experiments_detail;
  Timer timer;
  auto report = start("rank-prob", ctx);
  const Displacer d(ctx.world.resources(), ctx.pipeline);
  std::size_t index = 0;
  for (const auto& spec : templates) {
    report.config["template." + spec.name] =
        spec.query + (spec.domain.empty() ? "" : " where " + spec.domain);
    const auto t = QueryTemplate::parse(spec.query);
    std::optional<QueryExpr> domain;
    if (!spec.domain.empty()) domain = QueryExpr::parse(spec.domain);
    const auto table = d.estimate_rank_probabilities(t, domain);
    for (const auto& it : table.items) {
      ItemRecord r = record(index++, spec.name, it.term, it.gold, it.predicted);
      r.rank = it.rank;
      r.covered = it.covered;
      r.correct = it.rank && *it.rank == 1;
      report.items.push_back(std::move(r));
    }
  }
  finalize(report);
  report.wall_time_s = timer.seconds();
  return report;
}

/// Accuracy-vs-neighbor-count curve; groups are "n=NN".
inline ExperimentReport sweep_neighbors(const RunContext& ctx, const RankTemplate& spec,
                                        std::size_t lo, std::size_t hi) {
  using namespace experiments_detail;
  if (lo == 0) throw Error(ErrorCode::BadConfig, "neighbor counts start at 1");
  if (hi < lo) throw Error(ErrorCode::BadConfig, "empty neighbor range");
  Timer timer;
  auto report = start("sweep", ctx);
  report.config["template"] = spec.query + (spec.domain.empty() ? "" : " where " + spec.domain);
  report.config["range"] = std::to_string(lo) + ".." + std::to_string(hi);
  report.config.erase("n_neighbors");
  const auto t = QueryTemplate::parse(spec.query);
  std::optional<QueryExpr> domain;
  if (!spec.domain.empty()) domain = QueryExpr::parse(spec.domain);
  std::size_t index = 0;
  for (std::size_t n = lo; n <= hi; ++n) {
    PipelineConfig cfg = ctx.pipeline;
    cfg.n_neighbors = n;
    const Displacer d(ctx.world.resources(), cfg);
    char group[16];
    std::snprintf(group, sizeof group, "n=%02zu", n);
    for (const auto& it : d.estimate_rank_probabilities(t, domain).items) {
      ItemRecord r = record(index++, group, it.term, it.gold, it.predicted);
      r.rank = it.rank;
      r.covered = it.covered;
      r.correct = it.rank && *it.rank == 1;
      report.items.push_back(std::move(r));
    }
  }
  finalize(report);
  report.wall_time_s = timer.seconds();
  return report;
}

/// Parts of machines: "kb" (direct lookup), "displacer" (multi-answer
/// displacement, covered when the KB or the displacer answers),
/// "matching" (neighbors' own parts). Score is top-3 precision; an item
/// is correct when every gold part is among the returned answers.
inline ExperimentReport run_parts(const RunContext& ctx, const std::vector<MachineItem>& machines,
                                  std::string_view template_text = kPartsTemplate) {
  using namespace experiments_detail;
  Timer timer;
  auto report = start("parts", ctx);
  report.config["template"] = std::string(template_text);
  const auto t = QueryTemplate::parse(template_text);
  const Displacer d(ctx.world.resources(), ctx.pipeline);
  auto fill = [](ItemRecord& r, const std::vector<std::string>& ranked) {
    r.covered = !ranked.empty();
    r.predicted = join(ranked, ranked.size());
    r.rank = first_rank(ranked, r.gold);
    r.score = top3_precision(ranked, r.gold);
    r.correct = !r.gold.empty() && std::all_of(r.gold.begin(), r.gold.end(), [&](const auto& g) {
      return std::find(ranked.begin(), ranked.end(), g) != ranked.end();
    });
  };
  std::size_t index = 0;
  for (const auto& m : machines) {
    ItemRecord kb = record(index++, "kb", m.term, m.gold);
    std::vector<std::string> direct;
    for (const auto& c : d.senses(m.term))
      for (const auto& a : d.answers(t, c)) {
        const std::string s = d.surface(a);
        if (std::find(direct.begin(), direct.end(), s) == direct.end()) direct.push_back(s);
      }
    fill(kb, direct);
    const bool kb_covered = kb.covered;
    report.items.push_back(std::move(kb));

    ItemRecord dv = record(index++, "displacer", m.term, m.gold);
    ItemRecord sm = record(index++, "matching", m.term, m.gold);
    try {
      fill(dv, terms_of(d.displace_multi(m.term, t).answers));
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
      dv.note = std::string(to_string(e.code()));
    }
    dv.covered = dv.covered || kb_covered;
    try {
      fill(sm, terms_of(d.semantic_matching(m.term, t)));
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
      sm.note = std::string(to_string(e.code()));
    }
    report.items.push_back(std::move(dv));
    report.items.push_back(std::move(sm));
  }
  finalize(report);
  report.wall_time_s = timer.seconds();
  return report;
}

enum class AnalogyMode { Dsvs, Kb, Combined };

inline std::string_view to_string(AnalogyMode m) {
  switch (m) {
    case AnalogyMode::Dsvs: return "dsvs";
    case AnalogyMode::Kb: return "kb";
    case AnalogyMode::Combined: return "combined";
  }
  return "dsvs";
}

inline AnalogyMode parse_analogy_mode(std::string_view s) {
  if (s == "dsvs") return AnalogyMode::Dsvs;
  if (s == "kb") return AnalogyMode::Kb;
  if (s == "combined") return AnalogyMode::Combined;
  throw Error(ErrorCode::BadConfig, "mode must be dsvs, kb or combined");
}

namespace experiments_detail {

struct AnalogyOutcome {
  std::string predicted;
  std::vector<std::string> considered;  // every answer the mode looked at
  bool covered = false;
  std::string note;
};

inline std::uint64_t item_seed(std::uint64_t seed, std::size_t index) {
  return seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(index);
}

inline AnalogyOutcome solve(const AnalogySolver& s, const AnalogyProblem& p, AnalogyMode mode,
                            std::size_t candidates, std::uint64_t seed) {
  AnalogyOutcome out;
  try {
    switch (mode) {
      case AnalogyMode::Dsvs: {
        for (const auto& a : s.solve_dsvs(p, candidates)) out.considered.push_back(a.term);
        break;
      }
      case AnalogyMode::Kb: {
        for (const auto& a : s.solve_kb(p)) out.considered.push_back(a.term);
        if (!out.considered.empty()) out.predicted = s.solve_kb_random(p, seed).term;
        break;
      }
      case AnalogyMode::Combined: {
        for (const auto& a : s.solve_kb(p)) out.considered.push_back(a.term);
        for (const auto& a : s.solve_dsvs(p, candidates)) out.considered.push_back(a.term);
        out.predicted = s.solve_combined(p).term;
        break;
      }
    }
    if (mode == AnalogyMode::Dsvs && !out.considered.empty()) out.predicted = out.considered.front();
  } catch (const Error& e) {
    if (!recoverable(e.code())) throw;
    out.note = std::string(to_string(e.code()));
  }
  out.covered = !out.predicted.empty();
  return out;
}

}  // namespace experiments_detail

/// Four-term analogies, one group per category.
inline ExperimentReport run_sswr(const RunContext& ctx, const std::vector<SswrItem>& items,
                                 AnalogyMode mode) {
  using namespace experiments_detail;
  Timer timer;
  auto report = start("sswr", ctx);
  report.config["mode"] = std::string(to_string(mode));
  const AnalogySolver solver(ctx.world.resources(), ctx.analogy);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    const auto o = solve(solver, {it.a, it.b, it.c}, mode, ctx.analogy.candidates,
                         item_seed(ctx.pipeline.seed, i));
    ItemRecord r = record(i, it.category, it.a + " " + it.b + " " + it.c, {it.d}, o.predicted);
    r.covered = o.covered;
    r.correct = o.predicted == it.d;
    r.rank = r.correct ? std::optional<std::size_t>(1) : std::nullopt;
    r.note = o.note;
    report.items.push_back(std::move(r));
  }
  finalize(report);
  report.wall_time_s = timer.seconds();
  return report;
}

/// Open-ended SAT-style items: given the stem pair and the first term of
/// the gold choice, produce the fourth term. Answers in the alternates
/// list count as correct. A wrong answer whose mode considered the gold
/// term is a near-miss (score 1, note "near-miss").
inline ExperimentReport run_sat(const RunContext& ctx, const std::vector<SatItem>& items,
                                AnalogyMode mode) {
  using namespace experiments_detail;
  Timer timer;
  auto report = start("sat", ctx);
  report.config["mode"] = std::string(to_string(mode));
  const AnalogySolver solver(ctx.world.resources(), ctx.analogy);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    const auto o = solve(solver, {it.stem_a, it.stem_b, it.c()}, mode, ctx.analogy.candidates,
                         item_seed(ctx.pipeline.seed, i));
    std::vector<std::string> gold{it.d()};
    for (const auto& a : it.alternates)
      if (std::find(gold.begin(), gold.end(), a) == gold.end()) gold.push_back(a);
    ItemRecord r = record(i, std::string(to_string(mode)),
                          it.stem_a + " " + it.stem_b + " " + it.c(), gold, o.predicted);
    r.covered = o.covered;
    r.correct = std::find(gold.begin(), gold.end(), o.predicted) != gold.end() && o.covered;
    r.rank = r.correct ? std::optional<std::size_t>(1) : std::nullopt;
    r.note = o.note;
    if (!r.correct && first_rank(o.considered, gold)) {
      r.score = 1.0;
      r.note = "near-miss";
    }
    report.items.push_back(std::move(r));
  }
  finalize(report);
  report.wall_time_s = timer.seconds();
  return report;
}

enum class QueryMode { Kb, HybridSingle, HybridMulti };

inline QueryMode parse_query_mode(std::string_view s) {
  if (s == "kb") return QueryMode::Kb;
  if (s == "hybrid-single") return QueryMode::HybridSingle;
  if (s == "hybrid-multi") return QueryMode::HybridMulti;
  throw Error(ErrorCode::BadConfig, "mode must be kb, hybrid-single or hybrid-multi");
}

struct QueryAnswer {
  std::string text;
  double score = 0.0;
  std::size_t support = 0;
  bool demoted = false;
};

struct QueryOutcome {
  std::string target;  // term displaced (hybrid modes)
  std::string answer_variable;
  std::vector<QueryAnswer> answers;
};

namespace experiments_detail {

// Replaces the first argument symbol that names a concept with a vector
// by the hole variable. Returns the surface term, or empty.
inline std::string open_hole(SExpr& e, const LoadedWorld& w, const std::string& hole) {
  if (!e.is_list() || e.items.empty()) return {};
  if (kb_detail::is_connective(e)) {
    for (std::size_t i = 1; i < e.items.size(); ++i)
      if (auto t = open_hole(e.items[i], w, hole); !t.empty()) return t;
    return {};
  }
  for (std::size_t i = 1; i < e.items.size(); ++i) {
    auto& a = e.items[i];
    if (!a.is_symbol()) continue;
    const std::string term = w.lexicon.preferred_term(a.text);
    if (w.lexicon.has_concept(a.text) && w.space.resolvable(term)) {
      a = SExpr::variable(hole);
      return term;
    }
  }
  return {};
}

}  // namespace experiments_detail

/// kb: answers from the KB alone. hybrid modes: the hole `?_` is the term
/// displaced (given by `term`); without a hole, the first concept argument
/// with a vector becomes the hole.
inline QueryOutcome run_query(const RunContext& ctx, std::string_view text, QueryMode mode,
                              const std::string& term = {}) {
  QueryOutcome out;
  const QueryExpr q = QueryExpr::parse(text);
  if (mode == QueryMode::Kb) {
    const auto vars = bound_variables(q);
    for (const auto& b : ctx.world.kb.query(q)) {
      std::string line;
      for (const auto& v : vars)
        if (auto it = b.find(v); it != b.end())
          line += (line.empty() ? "" : " ") + ("?" + v + "=" + print(it->second));
      out.answers.push_back({line.empty() ? "true" : line, 0.0, 1, false});
    }
    return out;
  }
  SExpr form = q.to_sexpr();
  std::string target = term;
  std::string hole = "_";
  if (!bound_variables(q).count(hole)) {
    target = experiments_detail::open_hole(form, ctx.world, hole);
    if (target.empty())
      throw Error(ErrorCode::BadConfig, "query has no ?_ hole and no argument with a vector");
  } else if (target.empty()) {
    throw Error(ErrorCode::BadConfig, "query has a ?_ hole; give the term to place in it");
  }
  const auto t = QueryTemplate::parse(print(form), hole);
  out.target = target;
  out.answer_variable = t.answer;
  const Displacer d(ctx.world.resources(), ctx.pipeline);
  std::vector<RankedAnswer> ranked;
  if (mode == QueryMode::HybridSingle)
    ranked = d.displace_single(target, t).by_average;
  else
    ranked = d.displace_multi(target, t).answers;
  for (const auto& a : ranked) out.answers.push_back({a.term, a.score, a.support, a.demoted});
  return out;
}

}  // namespace displacer::harness

#endif  // DISPLACER_HARNESS_EXPERIMENTS_HPP
