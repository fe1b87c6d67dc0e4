// displacer: command-line front end for queries, experiments and world generation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "displacer/displacer.hpp"
#include "displacer/harness/config.hpp"
#include "displacer/harness/datasets.hpp"
#include "displacer/harness/experiments.hpp"
#include "displacer/harness/report.hpp"
#include "displacer/harness/synthetic.hpp"

namespace h = displacer::harness;
using displacer::Error;
using displacer::ErrorCode;

namespace {

struct Common {
  std::string kb, embeddings, lexicon, world, config, mode, out;
  std::vector<std::string> set;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c, const std::string& mode_help) {
  cmd->add_option("--kb", c.kb, "KB file");
  cmd->add_option("--embeddings", c.embeddings, "embedding file (header \"N D\", then rows)");
  cmd->add_option("--lexicon", c.lexicon, "lexicon TSV");
  cmd->add_option("--world", c.world, "directory holding embeddings.txt, kb.kb, lexicon.tsv");
  cmd->add_option("--config", c.config, "key=value config file");
  cmd->add_option("--set", c.set, "override one config key (key=value)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--out", c.out, "write the report as JSON lines here");
  if (!mode_help.empty()) cmd->add_option("--mode", c.mode, mode_help);
}

h::Settings settings_of(const Common& c) {
  h::Settings s;
  if (!c.config.empty()) s = h::load_settings(c.config);
  for (const auto& kv : c.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::BadConfig, "--set expects key=value");
    s[h::trim(kv.substr(0, eq))] = h::trim(kv.substr(eq + 1));
  }
  if (c.seed) s["seed"] = std::to_string(*c.seed);
  return s;
}

std::unique_ptr<h::LoadedWorld> world_of(const Common& c) {
  if (!c.world.empty()) {
    auto p = h::world_dir_paths(c.world);
    if (!c.kb.empty()) p.kb = c.kb;
    if (!c.embeddings.empty()) p.embeddings = c.embeddings;
    if (!c.lexicon.empty()) p.lexicon = c.lexicon;
    const bool synthetic = std::filesystem::exists(std::filesystem::path(c.world) / "world.cfg");
    return h::load_world(p, synthetic ? "synthetic" : "user");
  }
  return h::load_world(h::DataPaths{c.kb, c.embeddings, c.lexicon});
}

std::string dataset_path(const std::string& given, const Common& c, const char* name) {
  if (!given.empty()) return given;
  if (!c.world.empty()) return (std::filesystem::path(c.world) / name).string();
  throw Error(ErrorCode::BadConfig, std::string("no input file given (expected ") + name + ")");
}

void emit(const h::ExperimentReport& r, const Common& c) {
  h::write_table(std::cout, r);
  if (c.out.empty()) return;
  static bool first = true;
  std::ofstream out(c.out, first ? std::ios::trunc : std::ios::app);
  first = false;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + c.out);
  h::write_jsonl(out, r);
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::BadConfig:
    case ErrorCode::BadSpec: return 3;
    default: return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid knowledge-base / word-vector query and analogy tool"};
  app.require_subcommand(1);

  Common c;
  std::string query_text, term, names_file, machines_file, data_file, template_text, domain;
  std::size_t from = 1, to = 10;

  auto* query = app.add_subcommand("query", "answer one query");
  add_common(query, c, "kb | hybrid-single | hybrid-multi (default kb)");
  query->add_option("query", query_text, "query expression")->required();
  query->add_option("--term", term, "term placed in the ?_ hole");

  auto* gender = app.add_subcommand("gender", "classify names by neighbor vote");
  add_common(gender, c, "");
  gender->add_option("--names", names_file, "CSV of name,gender");
  gender->add_option("--template", template_text, "query template (answer variable ?Y)");

  auto* rank = app.add_subcommand("rank-prob", "leave-one-out rank probabilities");
  add_common(rank, c, "");
  rank->add_option("--template", template_text, "query template with ?_ hole");
  rank->add_option("--domain", domain, "restriction on ?_, e.g. (isa ?_ Country)");

  auto* parts = app.add_subcommand("parts", "multi-answer parts of machines");
  add_common(parts, c, "");
  parts->add_option("--machines", machines_file, "machine list (term[<TAB>gold|gold...])");
  parts->add_option("--template", template_text, "query template with ?_ hole");

  auto* sswr = app.add_subcommand("sswr", "four-term analogy test set");
  add_common(sswr, c, "dsvs | kb | combined | all (default all)");
  sswr->add_option("--file", data_file, "analogy file");

  auto* sat = app.add_subcommand("sat", "open-ended SAT-style analogies");
  add_common(sat, c, "dsvs | kb | combined | all (default all)");
  sat->add_option("--file", data_file, "SAT-style item file");

  auto* sweep = app.add_subcommand("sweep", "rank-1 accuracy versus neighbor count");
  add_common(sweep, c, "");
  sweep->add_option("--template", template_text, "query template with ?_ hole");
  sweep->add_option("--domain", domain, "restriction on ?_");
  sweep->add_option("--from", from, "smallest neighbor count");
  sweep->add_option("--to", to, "largest neighbor count");

  auto* gen = app.add_subcommand("gen-world", "write a planted synthetic world");
  add_common(gen, c, "");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }

  try {
    const auto settings = settings_of(c);
    if (gen->parsed()) {
      if (c.out.empty()) throw Error(ErrorCode::BadConfig, "gen-world needs --out DIR");
      const auto spec = h::SyntheticWorldSpec::from_settings(settings);
      const auto w = h::gen_synthetic_world(spec);
      w.write(c.out);
      std::cout << "wrote " << w.rows.size() << " vectors to " << c.out << "\n";
      return 0;
    }

    displacer::PipelineConfig pipeline;
    displacer::AnalogyConfig analogy;
    h::apply_settings(settings, pipeline, analogy);
    const auto world = world_of(c);
    const h::RunContext ctx{*world, pipeline, analogy};

    auto analogy_modes = [&] {
      std::vector<h::AnalogyMode> modes;
      if (c.mode.empty() || c.mode == "all")
        modes = {h::AnalogyMode::Dsvs, h::AnalogyMode::Kb, h::AnalogyMode::Combined};
      else
        modes = {h::parse_analogy_mode(c.mode)};
      return modes;
    };

    if (query->parsed()) {
      const auto mode = h::parse_query_mode(c.mode.empty() ? "kb" : c.mode);
      const auto r = h::run_query(ctx, query_text, mode, term);
      if (!r.target.empty())
        std::cout << "displacing \"" << r.target << "\" for ?" << r.answer_variable << " (knn "
                  << displacer::to_string(pipeline.knn_mode) << ")\n";
      if (r.answers.empty()) std::cout << "no answers\n";
      std::size_t i = 0;
      for (const auto& a : r.answers) {
        if (mode == h::QueryMode::Kb) {
          std::cout << a.text << "\n";
          continue;
        }
        std::printf("%2zu. %-30s %.6f  support %zu%s\n", ++i, a.text.c_str(), a.score, a.support,
                    a.demoted ? "  (type mismatch)" : "");
      }
    } else if (gender->parsed()) {
      const auto names = h::parse_names_csv(h::read_file(dataset_path(names_file, c, "names.csv")));
      emit(h::run_gender(ctx, names, template_text.empty() ? h::kGenderTemplate : template_text), c);
    } else if (rank->parsed()) {
      h::RankTemplate t{"template", template_text, domain};
      if (template_text.empty()) t = {"capital", h::kCapitalTemplate, h::kCapitalDomain};
      emit(h::run_rank_probability(ctx, {t}), c);
    } else if (parts->parsed()) {
      const auto items =
          h::parse_machine_list(h::read_file(dataset_path(machines_file, c, "machines.txt")));
      emit(h::run_parts(ctx, items, template_text.empty() ? h::kPartsTemplate : template_text), c);
    } else if (sswr->parsed()) {
      const auto items = h::parse_sswr(h::read_file(dataset_path(data_file, c, "sswr.txt")));
      for (auto m : analogy_modes()) emit(h::run_sswr(ctx, items, m), c);
    } else if (sat->parsed()) {
      const auto items = h::parse_sat(h::read_file(dataset_path(data_file, c, "sat.txt")));
      for (auto m : analogy_modes()) emit(h::run_sat(ctx, items, m), c);
    } else if (sweep->parsed()) {
      h::RankTemplate t{"template", template_text, domain};
      if (template_text.empty()) t = {"capital", h::kCapitalTemplate, h::kCapitalDomain};
      emit(h::sweep_neighbors(ctx, t, from, to), c);
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
