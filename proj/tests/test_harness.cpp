#include <catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "displacer/harness/config.hpp"
#include "displacer/harness/datasets.hpp"
#include "displacer/harness/experiments.hpp"
#include "displacer/harness/report.hpp"
#include "displacer/harness/synthetic.hpp"

using namespace displacer;
using namespace displacer::harness;

namespace {

SyntheticWorldSpec full_spec(std::uint64_t seed) {
  SyntheticWorldSpec s;
  s.seed = seed;
  s.capital_noise = 0.3;
  s.currencies = true;
  s.currency_noise = 0.3;
  s.legacy_currency_fraction = 0.3;
  s.namesake_fraction = 0.3;
  s.machine_families = 2;
  s.names_per_gender = 20;
  s.verbs = 10;
  return s;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::Io;
}

std::size_t line_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.line().value_or(0);
  }
  FAIL("no error thrown");
  return 0;
}

std::vector<ItemRecord> items_from_jsonl(const std::string& text, nlohmann::json& summary) {
  std::vector<ItemRecord> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") == "item")
      out.push_back(item_from_json(j));
    else
      summary = j;
  }
  return out;
}

}  // namespace

TEST_CASE("worlds are a pure function of their spec") {
  const auto a = gen_synthetic_world(full_spec(5));
  const auto b = gen_synthetic_world(full_spec(5));
  CHECK(a.embeddings() == b.embeddings());
  CHECK(a.kb == b.kb);
  CHECK(a.lexicon == b.lexicon);
  CHECK(a.sswr == b.sswr);
  CHECK(a.sat == b.sat);
  CHECK(a.names_csv == b.names_csv);
  CHECK(a.machines == b.machines);
  CHECK(gen_synthetic_world(full_spec(6)).embeddings() != a.embeddings());

  // written files reload into the same world
  const auto dir = std::filesystem::temp_directory_path() / "displacer_world_test";
  std::filesystem::remove_all(dir);
  a.write(dir);
  CHECK(read_file((dir / "embeddings.txt").string()) == a.embeddings());
  const auto spec = SyntheticWorldSpec::from_settings(load_settings((dir / "world.cfg").string()));
  CHECK(gen_synthetic_world(spec).embeddings() == a.embeddings());
  const auto w = load_world_dir(dir);
  CHECK(w->space.size() == a.rows.size());
  CHECK(parse_sswr(read_file((dir / "sswr.txt").string())).size() > 0);
  CHECK(parse_sat(read_file((dir / "sat.txt").string())).size() > 0);
  CHECK(parse_names_csv(read_file((dir / "names.csv").string())).size() == 40);
  CHECK(parse_machine_list(read_file((dir / "machines.txt").string())).size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("planted geometry: offsets have the requested norm") {
  SyntheticWorldSpec s;
  s.seed = 3;
  const auto w = gen_synthetic_world(s);
  std::vector<Vector> offsets;
  for (const auto& [country, capital] : w.capitals) {
    const auto& a = w.vector_of(country);
    const auto& b = w.vector_of(capital);
    Vector d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = b[i] - a[i];
    offsets.push_back(d);
  }
  for (const auto& d : offsets) {
    double n = 0;
    for (double x : d) n += x * x;
    CHECK(std::sqrt(n) == Catch::Approx(6.0).epsilon(1e-12));
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(d[i] == Catch::Approx(offsets[0][i]).margin(1e-12));
  }
}

TEST_CASE("bad world specs are rejected") {
  SyntheticWorldSpec s;
  s.country_holdout = 31;
  CHECK(code_of([&] { gen_synthetic_world(s); }) == ErrorCode::BadSpec);
  s = {};
  s.capital_noise = -1;
  CHECK(code_of([&] { gen_synthetic_world(s); }) == ErrorCode::BadSpec);
  s = {};
  s.dim = 0;
  CHECK(code_of([&] { gen_synthetic_world(s); }) == ErrorCode::BadSpec);
  CHECK(code_of([] { SyntheticWorldSpec::from_settings({{"colour", "blue"}}); }) == ErrorCode::BadSpec);
  CHECK(code_of([] { SyntheticWorldSpec::from_settings({{"capital_noise", "lots"}}); }) ==
        ErrorCode::BadSpec);
}

TEST_CASE("dataset loaders report the offending line") {
  CHECK(line_of([] { parse_names_csv("name,gender\nann,female\nbob\n"); }) == 3);
  CHECK(code_of([] { parse_names_csv("name,gender\n"); }) == ErrorCode::EmptyDataset);
  CHECK(parse_names_csv("Ann , FEMALE\n").front().gender == "female");

  CHECK(line_of([] { parse_sswr(": c\na b c d\na b c\n"); }) == 3);
  CHECK(code_of([] { parse_sswr(": only-a-header\n"); }) == ErrorCode::EmptyDataset);
  const auto sswr = parse_sswr(": capital\nathens greece oslo norway\n: past\ngo went see saw\n");
  REQUIRE(sswr.size() == 2);
  CHECK(sswr[1].category == "past");
  CHECK(sswr[1].d == "saw");

  const auto sat = parse_sat("Ostrich Bird\nlion cat\ngoose flock\nb\nalt: herd\n\nA B\nc d\ne f\na\n");
  REQUIRE(sat.size() == 2);
  CHECK(sat[0].stem_a == "ostrich");
  CHECK(sat[0].c() == "goose");
  CHECK(sat[0].d() == "flock");
  CHECK(sat[0].alternates == std::vector<std::string>{"herd"});
  CHECK(line_of([] { parse_sat("a b\nc d\nz\n"); }) == 3);
  CHECK(line_of([] { parse_sat("a b\nc d e\na\n"); }) == 2);
  CHECK(code_of([] { parse_sat("\n\n"); }) == ErrorCode::EmptyDataset);

  const auto m = parse_machine_list("# machines\nbulldozer\tpiston|blade\ncar\n");
  REQUIRE(m.size() == 2);
  CHECK(m[0].gold == std::vector<std::string>{"piston", "blade"});
  CHECK(m[1].gold.empty());
  CHECK(line_of([] { parse_machine_list("a\tb\nc\tb||d\n"); }) == 2);
}

TEST_CASE("config files and overrides") {
  const auto s = parse_settings("# c\nn_neighbors = 6\n\nknn_mode=approximate\nk_clusters = auto\n");
  PipelineConfig cfg;
  AnalogyConfig an;
  apply_settings(s, cfg, an);
  CHECK(cfg.n_neighbors == 6);
  CHECK(cfg.knn_mode == KnnMode::Approximate);
  CHECK(an.knn_mode == KnnMode::Approximate);
  CHECK(!cfg.k_clusters);
  CHECK(line_of([] { parse_settings("a=1\nnonsense\n"); }) == 2);
  for (const Settings& bad : std::vector<Settings>{
           {{"n_neighbors", "0"}}, {{"n_neighbors", "four"}}, {{"knn", "exact"}}, {{"knn_mode", "fast"}}}) {
    PipelineConfig scratch;
    AnalogyConfig scratch_an;
    CHECK(code_of([&] { apply_settings(bad, scratch, scratch_an); }) == ErrorCode::BadConfig);
  }
  PipelineConfig round;
  AnalogyConfig round_an;
  apply_settings(snapshot(cfg, an), round, round_an);
  CHECK(snapshot(round, round_an) == snapshot(cfg, an));
}

TEST_CASE("aggregates are recomputable from the JSONL records") {
  const auto w = gen_synthetic_world(full_spec(12));
  const auto world = load_world(w);
  const RunContext ctx{*world, {}, {}};
  std::vector<ExperimentReport> reports{
      run_sswr(ctx, parse_sswr(w.sswr), AnalogyMode::Kb),
      run_sat(ctx, parse_sat(w.sat), AnalogyMode::Combined),
      run_gender(ctx, parse_names_csv(w.names_csv)),
      run_parts(ctx, parse_machine_list(w.machines)),
      run_rank_probability(ctx, {{"capital", kCapitalTemplate, kCapitalDomain}}),
  };
  for (const auto& r : reports) {
    std::ostringstream out;
    write_jsonl(out, r);
    nlohmann::json summary;
    const auto items = items_from_jsonl(out.str(), summary);
    REQUIRE(items.size() == r.items.size());
    const auto recomputed = compute_aggregates(items, summary.at("confusion").get<bool>());
    const auto stored = summary.at("aggregates").get<Aggregates>();
    REQUIRE(recomputed.size() == stored.size());
    for (const auto& [k, v] : stored) CHECK(recomputed.at(k) == Catch::Approx(v).margin(1e-12));
  }
}

TEST_CASE("reports reproduce byte for byte apart from timing") {
  const auto w = gen_synthetic_world(full_spec(13));
  const auto world = load_world(w);
  PipelineConfig cfg;
  cfg.seed = 77;
  const RunContext ctx{*world, cfg, {}};
  auto dump = [&] {
    std::ostringstream out;
    write_jsonl(out, run_sswr(ctx, parse_sswr(w.sswr), AnalogyMode::Kb), false);
    write_jsonl(out, run_gender(ctx, parse_names_csv(w.names_csv)), false);
    write_jsonl(out, sweep_neighbors(ctx, {"capital", kCapitalTemplate, kCapitalDomain}, 1, 3), false);
    return out.str();
  };
  CHECK(dump() == dump());
}

TEST_CASE("rank aggregates sum to one per group") {
  const auto w = gen_synthetic_world(full_spec(14));
  const auto world = load_world(w);
  const RunContext ctx{*world, {}, {}};
  const auto r = sweep_neighbors(ctx, {"capital", kCapitalTemplate, kCapitalDomain}, 1, 5);
  for (const char* g : {"n=01", "n=03", "n=05", "all"}) {
    const std::string p(g);
    double sum = r.aggregates.at(p + ".missed");
    for (int k = 1; k <= 4; ++k) sum += r.aggregates.at(p + ".rank" + std::to_string(k));
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
  CHECK(code_of([&] { sweep_neighbors(ctx, {"capital", kCapitalTemplate, kCapitalDomain}, 0, 3); }) ==
        ErrorCode::BadConfig);
  CHECK(code_of([&] { sweep_neighbors(ctx, {"capital", kCapitalTemplate, kCapitalDomain}, 4, 3); }) ==
        ErrorCode::BadConfig);
}

TEST_CASE("query runner") {
  SyntheticWorldSpec s;
  s.seed = 4;
  const auto w = gen_synthetic_world(s);
  const auto world = load_world(w);
  const RunContext ctx{*world, {}, {}};
  std::string known;
  for (const auto& [country, capital] : w.capitals)
    if (std::find(w.held_out_countries.begin(), w.held_out_countries.end(), country) ==
        w.held_out_countries.end())
      known = country.substr(7);
  const auto kb = run_query(ctx, "(capitalCity ?X Country" + known + ")", QueryMode::Kb);
  REQUIRE(kb.answers.size() == 1);
  CHECK(kb.answers[0].text == "?X=Capital" + known);

  const std::string held = w.held_out_countries.front();
  std::string concept_name = held;
  concept_name[0] = static_cast<char>(std::toupper(concept_name[0]));
  CHECK(run_query(ctx, "(capitalCity ?X " + concept_name + ")", QueryMode::Kb).answers.empty());
  const auto hy = run_query(ctx, "(capitalCity ?X " + concept_name + ")", QueryMode::HybridSingle);
  CHECK(hy.target == held);
  CHECK(hy.answer_variable == "X");
  REQUIRE(!hy.answers.empty());
  CHECK(hy.answers[0].text == "capital" + held.substr(7));
  const auto explicit_hole = run_query(ctx, "(capitalCity ?X ?_)", QueryMode::HybridSingle, held);
  CHECK(explicit_hole.answers[0].text == hy.answers[0].text);

  CHECK(code_of([&] { run_query(ctx, "(capitalCity ?X ?_)", QueryMode::HybridSingle); }) ==
        ErrorCode::BadConfig);
  CHECK(code_of([&] { run_query(ctx, "(capitalCity ?X", QueryMode::Kb); }) == ErrorCode::UnbalancedParens);
  CHECK(code_of([] { parse_query_mode("fuzzy"); }) == ErrorCode::BadConfig);
  CHECK(code_of([] { parse_analogy_mode("fuzzy"); }) == ErrorCode::BadConfig);
}
