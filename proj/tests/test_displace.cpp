#include <catch_amalgamated.hpp>

#include "displacer/displace.hpp"
#include "displacer/harness/experiments.hpp"
#include "displacer/harness/synthetic.hpp"
#include "support.hpp"

using namespace displacer;
namespace h = displacer::harness;

namespace {

h::SyntheticWorld countries(double noise, std::uint64_t seed) {
  h::SyntheticWorldSpec spec;
  spec.seed = seed;
  spec.capital_noise = noise;
  return h::gen_synthetic_world(spec);
}

const QueryTemplate& capital_template() {
  static const QueryTemplate t = QueryTemplate::parse("(capitalCity ?X ?_)");
  return t;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("templates name their hole and answer") {
  const auto t = QueryTemplate::parse("(and (capitalCity ?X ?_) (isa ?X City))");
  CHECK(t.hole == "_");
  CHECK(t.answer == "X");
  CHECK(t.answer_constraints() == std::vector<SExpr>{parse("(isa ?X City)")});
  CHECK(print(t.instantiate(SExpr::symbol("France")).to_sexpr()) ==
        "(and (capitalCity ?X France) (isa ?X City))");
  CHECK_THROWS_AS(QueryTemplate::parse("(capitalCity ?X France)"), Error);
  CHECK_THROWS_AS(QueryTemplate::parse("(and (givenName ?P ?_) (gender ?P ?Y))"), Error);
  CHECK(QueryTemplate::parse("(and (givenName ?P ?_) (gender ?P ?Y))", "_", "Y").answer == "Y");
}

TEST_CASE("noiseless displacement recovers held-out answers exactly") {
  const auto w = countries(0.0, 3);
  const auto world = h::load_world(w);
  const Displacer d(world->resources());
  for (const auto& country : w.held_out_countries) {
    std::string capital;
    for (const auto& cc : w.capitals)
      if (cc.first == country) capital = cc.second;
    const auto r = d.displace_single(country, capital_template());
    REQUIRE(!r.by_average.empty());
    CHECK(r.by_average.front().term == capital);
    CHECK(r.by_mean_distance.front().term == capital);
    CHECK(max_abs_diff(r.average, w.vector_of(capital)) <= 1e-9);
    for (const auto& e : r.estimates) CHECK(max_abs_diff(e.estimated, w.vector_of(capital)) <= 1e-9);
  }
}

TEST_CASE("the estimate is the mean of b - a + t over the neighbors used") {
  const auto w = countries(0.3, 11);
  const auto world = h::load_world(w);
  PipelineConfig cfg;
  cfg.n_neighbors = 5;
  const Displacer d(world->resources(), cfg);
  const std::string target = w.held_out_countries.front();
  const auto r = d.displace_single(target, capital_template());
  REQUIRE(r.neighbors.size() == 5);
  const Vector t = w.vector_of(target);
  Vector expected(t.size(), 0.0);
  for (const auto& n : r.neighbors) {
    CHECK(n.term != target);
    const std::string cap = world->lexicon.preferred_term(
        d.answers(capital_template(), n.concepts.front()).front().text);
    const Vector a = w.vector_of(n.term), b = w.vector_of(cap);
    for (std::size_t i = 0; i < t.size(); ++i) expected[i] += (b[i] - a[i] + t[i]) / 5.0;
  }
  CHECK(max_abs_diff(r.average, expected) <= 1e-12);
  // ranking is brute-force nearest to the average, skipping target and neighbors
  std::set<std::string> exclude{target};
  for (const auto& n : r.neighbors) exclude.insert(n.term);
  const auto truth = support::brute_knn(world->space, r.average, r.by_average.size(), exclude);
  std::vector<std::string> got;
  for (const auto& a : r.by_average) got.push_back(a.term);
  CHECK(got == truth);
}

TEST_CASE("neighbors are KB-covered, nearest first, and never the term itself") {
  const auto w = countries(0.2, 5);
  const auto world = h::load_world(w);
  const Displacer d(world->resources());
  const std::string target = w.held_out_countries.front();
  const auto ns = d.expand_neighbors(target, [&](const std::string& c) {
    return !d.answers(capital_template(), c).empty();
  });
  REQUIRE(ns.size() == 4);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    CHECK(ns[i].term != target);
    CHECK(ns[i].term.rfind("country", 0) == 0);
    if (i) CHECK(ns[i - 1].distance <= ns[i].distance);
  }
  CHECK_THROWS_AS(d.displace_single("no_such_term", capital_template()), Error);
}

TEST_CASE("leave-one-out rank table") {
  const auto w = countries(0.0, 2);
  const auto world = h::load_world(w);
  const Displacer d(world->resources());
  const auto table = d.estimate_rank_probabilities(capital_template(), QueryExpr::parse("(isa ?_ Country)"));
  CHECK(table.items.size() == 25);
  CHECK(table.probability[0] == 1.0);
  CHECK(table.missed == 0.0);

  const auto noisy = countries(0.6, 2);
  const auto nw = h::load_world(noisy);
  const auto t2 = Displacer(nw->resources()).estimate_rank_probabilities(capital_template(), std::nullopt);
  double sum = t2.missed;
  for (double p : t2.probability) sum += p;
  CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  const auto replay = support::replay_capital_ranks(noisy, 4);
  for (std::size_t r = 0; r < 4; ++r) CHECK(t2.probability[r] == Catch::Approx(replay.probability[r]).margin(1e-12));

  KnowledgeBase tiny;
  tiny.load_text("(capitalCity A B)");
  const auto space = EmbeddingSpace::load_text("2 2\na 1 0\nb 0 1\n");
  Lexicon lex;
  CHECK_THROWS_AS(Displacer({tiny, space, lex}).estimate_rank_probabilities(capital_template(), std::nullopt),
                  Error);
}

TEST_CASE("neighbor vote classification") {
  h::SyntheticWorldSpec spec;
  spec.countries = 0;
  spec.country_holdout = 0;
  spec.names_per_gender = 40;
  spec.name_kb_fraction = 0.4;
  spec.seed = 9;
  const auto w = h::gen_synthetic_world(spec);
  const auto world = h::load_world(w);
  const auto t = QueryTemplate::parse(h::kGenderTemplate, "_", "Y");
  const auto names = h::parse_names_csv(w.names_csv);
  std::size_t correct = 0;
  for (const auto mode : {ClassifyMode::Majority, ClassifyMode::LabelVector}) {
    PipelineConfig cfg;
    cfg.classify_mode = mode;
    const Displacer d(world->resources(), cfg);
    for (const auto& n : names)
      correct += d.classify_by_neighbors(n.name, t, {"female", "male"}).label == n.gender;
  }
  CHECK(static_cast<double>(correct) / (2.0 * static_cast<double>(names.size())) >= 0.95);
}

TEST_CASE("majority vote: even split is a tie, no votes is no coverage") {
  KnowledgeBase kb;
  kb.load_text("(gender P1 Male) (givenName P1 Al) (gender P2 Female) (givenName P2 Bo)");
  const auto space = EmbeddingSpace::load_text("5 2\nal 1 0.1\nbo 1 -0.1\ncy 1 0\nmale 0 1\nfemale 0 -1\n");
  Lexicon lex;
  lex.load_text("al\tAl\tname\nbo\tBo\tname\nmale\tMale\tadjective\nfemale\tFemale\tadjective\n");
  PipelineConfig cfg;
  cfg.n_neighbors = 2;
  const Displacer d({kb, space, lex}, cfg);
  const auto t = QueryTemplate::parse(h::kGenderTemplate, "_", "Y");
  try {
    d.classify_by_neighbors("cy", t, {"female", "male"});
    FAIL("expected a tie");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Tie);
  }
  cfg.n_neighbors = 1;
  CHECK(Displacer({kb, space, lex}, cfg).classify_by_neighbors("cy", t, {"female", "male"}).label ==
        "male");  // equidistant neighbors; the smaller term wins
  try {
    d.classify_by_neighbors("cy", t, {"x", "y"});
    FAIL("expected no coverage");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoCoverage);
  }
}

TEST_CASE("multi-answer displacement finds every planted part") {
  h::SyntheticWorldSpec spec;
  spec.countries = 0;
  spec.country_holdout = 0;
  spec.machine_families = 4;
  spec.part_noise = 0.2;
  spec.seed = 21;
  const auto w = h::gen_synthetic_world(spec);
  const auto world = h::load_world(w);
  PipelineConfig cfg;
  cfg.answers_returned = 8;
  const Displacer d(world->resources(), cfg);
  const auto t = QueryTemplate::parse(h::kPartsTemplate);
  for (const auto& m : w.planted_machines) {
    if (!m.held_out) continue;
    const auto r = d.displace_multi(m.term, t);
    std::set<std::string> got;
    for (const auto& a : r.answers) got.insert(a.term);
    for (const auto& p : m.parts) CHECK(got.count(p));
    CHECK(r.answers.size() <= 8);
    const auto base = d.semantic_matching(m.term, t);
    for (const auto& a : base) CHECK(a.support >= 1);
  }
}

TEST_CASE("answers violating a type constraint move to the back") {
  KnowledgeBase kb;
  kb.load_text(R"(
    (capitalCity Pa Fr) (capitalCity Ro It) (isa Pa City) (isa Ro City) (isa Be City)
    (isa Fr Country) (isa It Country) (isa De Country)
  )");
  // the displaced estimate for "de" lands on "river", which is not a City
  const auto space = EmbeddingSpace::load_text(
      "7 3\nfr 1 0 0\npa 1 1 0\nit 1 0 0.1\nro 1 1 0.1\nde 1 0 0.05\nriver 1 1 0.05\nbe 1 1 0.2\n");
  Lexicon lex;
  lex.load_text("fr\tFr\tname\npa\tPa\tname\nit\tIt\tname\nro\tRo\tname\nde\tDe\tname\nriver\tRiverX\tnoun\nbe\tBe\tname\n");
  const Displacer d({kb, space, lex});
  const auto plain = d.displace_single("de", QueryTemplate::parse("(capitalCity ?X ?_)"));
  CHECK(plain.by_average.front().term == "river");
  const auto typed = d.displace_single("de", QueryTemplate::parse("(and (capitalCity ?X ?_) (isa ?X City))"));
  CHECK(typed.by_average.front().term == "ro");
  CHECK(typed.by_average.back().term == "river");
  CHECK(typed.by_average.back().demoted);
}

TEST_CASE("invalid configurations are rejected") {
  KnowledgeBase kb;
  const auto space = EmbeddingSpace::load_text("1 1\na 1\n");
  Lexicon lex;
  PipelineConfig cfg;
  cfg.n_neighbors = 0;
  CHECK_THROWS_AS(Displacer({kb, space, lex}, cfg), Error);
}
