#ifndef DISPLACER_HARNESS_SYNTHETIC_HPP
#define DISPLACER_HARNESS_SYNTHETIC_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "displacer/error.hpp"
#include "displacer/harness/config.hpp"
#include "displacer/vecspace.hpp"

namespace displacer::harness {

/// Parameters of a planted world. Noise levels are relative: a value of
/// 0.3 adds Gaussian noise whose expected norm is 0.3 * offset_norm.
struct SyntheticWorldSpec {
  std::size_t dim = 32;
  std::uint64_t seed = 1;
  std::size_t filler = 100;     // unrelated distractor terms
  double center_scale = 2.0;    // per-component sd of family centers
  double member_spread = 1.0;   // per-component sd of members around a center
  double offset_norm = 6.0;     // norm of every relation offset

  std::size_t countries = 30;
  std::size_t country_holdout = 5;
  double capital_noise = 0.0;
  bool currencies = false;
  double currency_noise = 0.0;
  double legacy_currency_fraction = 0.0;  // countries that also list an old currency
  double namesake_fraction = 0.0;         // capitals whose name also denotes a town elsewhere

  std::size_t machine_families = 0;
  std::size_t machines_per_family = 8;
  std::size_t parts_per_machine = 6;
  std::size_t machine_holdout = 1;  // per family
  double part_noise = 0.2;

  std::size_t names_per_gender = 0;
  double name_kb_fraction = 0.3;
  double name_spread = 0.5;
  double name_noise = 0.2;

  std::size_t verbs = 0;
  double verb_noise = 0.1;

  std::size_t sswr_per_item = 3;  // analogy lines emitted per family member

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::BadSpec, m); };
    if (dim == 0) bad("dim must be positive");
    if (!(offset_norm > 0.0)) bad("offsets must be nonzero");
    if (center_scale < 0.0 || member_spread < 0.0 || name_spread < 0.0) bad("spreads must be >= 0");
    for (double s : {capital_noise, currency_noise, part_noise, name_noise, verb_noise})
      if (!(s >= 0.0)) bad("noise must be >= 0");
    for (double f : {legacy_currency_fraction, namesake_fraction, name_kb_fraction})
      if (!(f >= 0.0 && f <= 1.0)) bad("fractions must lie in [0, 1]");
    if (country_holdout > countries) bad("country_holdout exceeds countries");
    if (machine_families && machine_holdout > machines_per_family)
      bad("machine_holdout exceeds machines_per_family");
  }

  static SyntheticWorldSpec from_settings(const Settings& s) {
    SyntheticWorldSpec w;
    for (const auto& [key, value] : s) {
      auto size = [&] { return parse_number<std::size_t>(key, value); };
      auto real = [&] {
        try {
          std::size_t used = 0;
          const double v = std::stod(value, &used);
          if (used != value.size()) throw std::invalid_argument(value);
          return v;
        } catch (const std::exception&) {
          throw Error(ErrorCode::BadSpec, key + ": not a number: \"" + value + "\"");
        }
      };
      if (key == "dim") w.dim = size();
      else if (key == "seed") w.seed = parse_number<std::uint64_t>(key, value);
      else if (key == "filler") w.filler = size();
      else if (key == "center_scale") w.center_scale = real();
      else if (key == "member_spread") w.member_spread = real();
      else if (key == "offset_norm") w.offset_norm = real();
      else if (key == "countries") w.countries = size();
      else if (key == "country_holdout") w.country_holdout = size();
      else if (key == "capital_noise") w.capital_noise = real();
      else if (key == "currencies") w.currencies = parse_bool(key, value);
      else if (key == "currency_noise") w.currency_noise = real();
      else if (key == "legacy_currency_fraction") w.legacy_currency_fraction = real();
      else if (key == "namesake_fraction") w.namesake_fraction = real();
      else if (key == "machine_families") w.machine_families = size();
      else if (key == "machines_per_family") w.machines_per_family = size();
      else if (key == "parts_per_machine") w.parts_per_machine = size();
      else if (key == "machine_holdout") w.machine_holdout = size();
      else if (key == "part_noise") w.part_noise = real();
      else if (key == "names_per_gender") w.names_per_gender = size();
      else if (key == "name_kb_fraction") w.name_kb_fraction = real();
      else if (key == "name_spread") w.name_spread = real();
      else if (key == "name_noise") w.name_noise = real();
      else if (key == "verbs") w.verbs = size();
      else if (key == "verb_noise") w.verb_noise = real();
      else if (key == "sswr_per_item") w.sswr_per_item = size();
      else throw Error(ErrorCode::BadSpec, "unknown world key \"" + key + "\"");
    }
    w.validate();
    return w;
  }
};

struct PlantedMachine {
  std::string term;
  std::size_t family = 0;
  std::vector<std::string> parts;
  bool held_out = false;
};

/// Generated files (as text) plus the planted ground truth.
struct SyntheticWorld {
  SyntheticWorldSpec spec;
  std::vector<std::pair<std::string, Vector>> rows;  // embedding rows in file order
  std::string kb;
  std::string lexicon;
  std::string gold;      // relation<TAB>input<TAB>answer for held-out facts
  std::string sswr;
  std::string sat;
  std::string names_csv;
  std::string machines;  // held-out machines with their gold parts

  std::vector<std::pair<std::string, std::string>> capitals;  // (country, capital)
  std::vector<std::string> held_out_countries;
  std::vector<PlantedMachine> planted_machines;

  std::string embeddings() const {
    std::string out = std::to_string(rows.size()) + " " + std::to_string(spec.dim) + "\n";
    char buf[64];
    for (const auto& [term, v] : rows) {
      out += term;
      for (double x : v) {
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
        out += ' ';
        out.append(buf, p);
      }
      out += '\n';
    }
    return out;
  }

  const Vector& vector_of(const std::string& term) const {
    for (const auto& [t, v] : rows)
      if (t == term) return v;
    throw Error(ErrorCode::OutOfVocabulary, term);
  }

  /// Writes embeddings.txt, kb.kb, lexicon.tsv, gold.tsv and the task files.
  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto put = [&](const char* name, const std::string& text) {
      std::ofstream out(dir / name, std::ios::binary);
      if (!out) throw Error(ErrorCode::Io, "cannot write " + (dir / name).string());
      out << text;
    };
    put("embeddings.txt", embeddings());
    put("kb.kb", kb);
    put("lexicon.tsv", lexicon);
    put("gold.tsv", gold);
    put("sswr.txt", sswr);
    put("sat.txt", sat);
    put("names.csv", names_csv);
    put("machines.txt", machines);
    put("world.cfg", settings_text());
  }

  std::string settings_text() const {
    std::string out = "# synthetic world\n";
    auto kv = [&](const char* k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
    auto num = [](double x) {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
      return std::string(buf, p);
    };
    kv("dim", std::to_string(spec.dim));
    kv("seed", std::to_string(spec.seed));
    kv("filler", std::to_string(spec.filler));
    kv("center_scale", num(spec.center_scale));
    kv("member_spread", num(spec.member_spread));
    kv("offset_norm", num(spec.offset_norm));
    kv("countries", std::to_string(spec.countries));
    kv("country_holdout", std::to_string(spec.country_holdout));
    kv("capital_noise", num(spec.capital_noise));
    kv("currencies", spec.currencies ? "true" : "false");
    kv("currency_noise", num(spec.currency_noise));
    kv("legacy_currency_fraction", num(spec.legacy_currency_fraction));
    kv("namesake_fraction", num(spec.namesake_fraction));
    kv("machine_families", std::to_string(spec.machine_families));
    kv("machines_per_family", std::to_string(spec.machines_per_family));
    kv("parts_per_machine", std::to_string(spec.parts_per_machine));
    kv("machine_holdout", std::to_string(spec.machine_holdout));
    kv("part_noise", num(spec.part_noise));
    kv("names_per_gender", std::to_string(spec.names_per_gender));
    kv("name_kb_fraction", num(spec.name_kb_fraction));
    kv("name_spread", num(spec.name_spread));
    kv("name_noise", num(spec.name_noise));
    kv("verbs", std::to_string(spec.verbs));
    kv("verb_noise", num(spec.verb_noise));
    kv("sswr_per_item", std::to_string(spec.sswr_per_item));
    return out;
  }
};

namespace synthetic_detail {

inline std::string numbered(const char* stem, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return std::string(stem) + buf;
}

class Builder {
 public:
  explicit Builder(const SyntheticWorldSpec& spec) : spec_(spec), rng_(spec.seed) {
    world_.spec = spec;
  }

  SyntheticWorld build() {
    if (spec_.countries) countries();
    if (spec_.machine_families) machines();
    if (spec_.names_per_gender) names();
    if (spec_.verbs) verbs();
    for (std::size_t i = 0; i < spec_.filler; ++i)
      emit(numbered("filler", i), gaussian(spec_.center_scale));
    return std::move(world_);
  }

 private:
  Vector gaussian(double sd) {
    std::normal_distribution<double> g(0.0, sd);
    Vector v(spec_.dim);
    for (auto& x : v) x = g(rng_);
    return v;
  }

  Vector offset() {
    Vector v = gaussian(1.0);
    const double n = norm(v);
    for (auto& x : v) x *= spec_.offset_norm / n;
    return v;
  }

  Vector around(const Vector& center, double sd) {
    Vector v = gaussian(sd);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += center[i];
    return v;
  }

  // base + off + noise with expected noise norm rel * offset_norm.
  Vector related(const Vector& base, const Vector& off, double rel) {
    const double sd = rel * spec_.offset_norm / std::sqrt(static_cast<double>(spec_.dim));
    Vector v = sd > 0.0 ? gaussian(sd) : Vector(spec_.dim, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += base[i] + off[i];
    return v;
  }

  bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }

  std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }

  void emit(const std::string& term, Vector v) { world_.rows.emplace_back(term, std::move(v)); }

  void fact(const std::string& f) { world_.kb += f + "\n"; }

  void lex(const std::string& term, const std::string& concept_name, const char* pos,
           const char* number = nullptr) {
    world_.lexicon += term + "\t" + concept_name + "\t" + pos;
    if (number) world_.lexicon += std::string("\t") + number;
    world_.lexicon += "\n";
  }

  static std::string capitalized(std::string s) {
    s.front() = static_cast<char>(std::toupper(static_cast<unsigned char>(s.front())));
    return s;
  }

  // Countries with capitals (+ currencies, namesake towns, legacy currencies).
  void countries() {
    world_.kb += "; countries\n";
    const Vector center = gaussian(spec_.center_scale);
    const Vector capital_off = offset();
    const Vector currency_off = offset();
    const Vector legacy_off = offset();
    const std::size_t n = spec_.countries;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng_);
    std::vector<bool> held(n, false);
    for (std::size_t i = 0; i < spec_.country_holdout; ++i) held[order[i]] = true;

    std::vector<std::string> country_terms, capital_terms, currency_terms;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string country = numbered("country", i);
      const std::string capital = numbered("capital", i);
      const std::string C = capitalized(country), K = capitalized(capital);
      const Vector base = around(center, spec_.member_spread);
      emit(country, base);
      emit(capital, related(base, capital_off, spec_.capital_noise));
      lex(country, C, "name", "singular");
      lex(capital, K, "name", "singular");
      fact("(isa " + C + " Country)");
      fact("(isa " + K + " City)");
      fact("(geographicalSubRegion " + K + " " + C + ")");
      if (held[i]) {
        world_.gold += "capitalCity\t" + country + "\t" + capital + "\n";
        world_.held_out_countries.push_back(country);
      } else {
        fact("(capitalCity " + K + " " + C + ")");
      }
      world_.capitals.emplace_back(country, capital);
      country_terms.push_back(country);
      capital_terms.push_back(capital);
      if (spec_.currencies) {
        const std::string currency = numbered("currency", i);
        const std::string M = capitalized(currency);
        emit(currency, related(base, currency_off, spec_.currency_noise));
        lex(currency, M, "noun", "singular");
        fact("(monetaryUnitIssuedBy " + M + " " + C + ")");
        currency_terms.push_back(currency);
        if (chance(spec_.legacy_currency_fraction)) {
          const std::string legacy = numbered("legacy", i);
          emit(legacy, related(base, legacy_off, spec_.currency_noise));
          lex(legacy, capitalized(legacy), "noun", "singular");
          fact("(monetaryUnitIssuedBy " + capitalized(legacy) + " " + C + ")");
        }
      }
    }
    for (std::size_t i = 0; i < n && n > 1; ++i) {
      if (!chance(spec_.namesake_fraction)) continue;
      std::size_t other = pick(n - 1);
      if (other >= i) ++other;
      const std::string town = capitalized(capital_terms[i]) + "Namesake";
      lex(capital_terms[i], town, "name", "singular");
      fact("(geographicalSubRegion " + town + " " + capitalized(country_terms[other]) + ")");
    }

    // Analogy lines pair each member with the next few (cyclically).
    const std::size_t per = std::min(spec_.sswr_per_item, n ? n - 1 : 0);
    world_.sswr += ": capital-common-countries\n";
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 1; s <= per; ++s) {
        const std::size_t j = (i + s) % n;
        world_.sswr += capital_terms[i] + " " + country_terms[i] + " " + capital_terms[j] + " " +
                       country_terms[j] + "\n";
      }
    if (spec_.currencies) {
      world_.sswr += ": currency\n";
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t s = 1; s <= per; ++s) {
          const std::size_t j = (i + s) % n;
          world_.sswr += country_terms[i] + " " + currency_terms[i] + " " + country_terms[j] + " " +
                         currency_terms[j] + "\n";
        }
    }
  }

  // Machine families sharing per-family part offsets.
  void machines() {
    world_.kb += "; machines\n";
    for (std::size_t f = 0; f < spec_.machine_families; ++f) {
      const Vector center = gaussian(spec_.center_scale);
      std::vector<Vector> part_offs;
      for (std::size_t j = 0; j < spec_.parts_per_machine; ++j) part_offs.push_back(offset());
      std::vector<std::size_t> order(spec_.machines_per_family);
      for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
      std::shuffle(order.begin(), order.end(), rng_);
      std::vector<bool> held(order.size(), false);
      for (std::size_t h = 0; h < spec_.machine_holdout; ++h) held[order[h]] = true;
      for (std::size_t m = 0; m < spec_.machines_per_family; ++m) {
        PlantedMachine pm;
        pm.term = numbered("fam", f) + "_" + numbered("machine", m);
        pm.family = f;
        pm.held_out = held[m];
        const std::string M = "Fam" + numbered("", f) + "Machine" + numbered("", m);
        const Vector base = around(center, spec_.member_spread);
        emit(pm.term, base);
        lex(pm.term, M, "noun", "singular");
        fact("(isa " + M + " Machine)");
        for (std::size_t j = 0; j < spec_.parts_per_machine; ++j) {
          const std::string part = pm.term + "_" + numbered("part", j);
          const std::string P = M + numbered("Part", j);
          emit(part, related(base, part_offs[j], spec_.part_noise));
          lex(part, P, "noun", "singular");
          fact("(genls " + P + " SolidTangibleArtifact)");
          if (pm.held_out)
            world_.gold += "physicalPartTypes\t" + pm.term + "\t" + part + "\n";
          else
            fact("(physicalPartTypes " + M + " " + P + ")");
          pm.parts.push_back(part);
        }
        if (pm.held_out) {
          world_.machines += pm.term + "\t";
          for (std::size_t j = 0; j < pm.parts.size(); ++j)
            world_.machines += (j ? "|" : "") + pm.parts[j];
          world_.machines += "\n";
        }
        world_.planted_machines.push_back(std::move(pm));
      }
    }
  }

  // Given names displaced by a gender offset; the KB knows a few people.
  void names() {
    world_.kb += "; people\n";
    const Vector center = gaussian(spec_.center_scale);
    const Vector male_off = offset();
    const Vector female_off = offset();
    emit("male", related(center, male_off, 0.0));
    emit("female", related(center, female_off, 0.0));
    lex("male", "Male", "adjective");
    lex("female", "Female", "adjective");
    world_.names_csv = "name,gender\n";
    std::size_t person = 0;
    for (const char* g : {"male", "female"}) {
      const bool is_male = std::string(g) == "male";
      for (std::size_t i = 0; i < spec_.names_per_gender; ++i) {
        const std::string name = numbered(is_male ? "mname" : "fname", i);
        const std::string N = capitalized(name);
        const Vector base = around(center, spec_.name_spread);
        emit(name, related(base, is_male ? male_off : female_off, spec_.name_noise));
        lex(name, N, "name", "singular");
        world_.names_csv += name + "," + g + "\n";
        if (chance(spec_.name_kb_fraction)) {
          const std::string P = numbered("Person", person++);
          fact("(givenName " + P + " " + N + ")");
          fact("(gender " + P + " " + (is_male ? "Male" : "Female") + ")");
        } else {
          world_.gold += "gender\t" + name + "\t" + g + "\n";
        }
      }
    }
  }

  // Verb roots with gerund and past-tense forms linked to the root.
  void verbs() {
    world_.kb += "; morphology\n";
    const Vector center = gaussian(spec_.center_scale);
    const Vector gerund_off = offset();
    const Vector past_off = offset();
    std::vector<std::string> gerunds, pasts;
    for (std::size_t i = 0; i < spec_.verbs; ++i) {
      const std::string root = numbered("verb", i);
      const std::string R = capitalized(root);
      const Vector base = around(center, spec_.member_spread);
      emit(root, base);
      emit(root + "ing", related(base, gerund_off, spec_.verb_noise));
      emit(root + "ed", related(base, past_off, spec_.verb_noise));
      lex(root, R, "verb");
      lex(root + "ing", R + "Ing", "verb");
      lex(root + "ing", R + "IngNoun", "noun");
      lex(root + "ed", R + "Ed", "verb");
      fact("(gerundOf " + R + " " + R + "Ing)");
      fact("(pastTenseOf " + R + " " + R + "Ed)");
      gerunds.push_back(root + "ing");
      pasts.push_back(root + "ed");
    }
    const std::size_t n = spec_.verbs;
    const std::size_t per = std::min(spec_.sswr_per_item, n ? n - 1 : 0);
    world_.sswr += ": past-tense\n";
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = 1; s <= per; ++s) {
        const std::size_t j = (i + s) % n;
        world_.sswr += gerunds[i] + " " + pasts[i] + " " + gerunds[j] + " " + pasts[j] + "\n";
      }
    if (n < 5) return;
    // Multiple-choice items: one correct pair among four.
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = (i + 1) % n;
      const std::size_t slot = pick(4);
      world_.sat += gerunds[i] + " " + pasts[i] + "\n";
      for (std::size_t c = 0; c < 4; ++c) {
        if (c == slot) {
          world_.sat += gerunds[j] + " " + pasts[j] + "\n";
        } else {
          const std::size_t x = (j + 1 + pick(n - 2)) % n;
          world_.sat += gerunds[x] + " " + gerunds[(x + 1) % n] + "\n";
        }
      }
      world_.sat += std::string(1, static_cast<char>('a' + slot)) + "\n\n";
    }
  }

  const SyntheticWorldSpec& spec_;
  std::mt19937_64 rng_;
  SyntheticWorld world_;
};

}  // namespace synthetic_detail

/// Plants family members, relation offsets and noise; emits the
/// embedding, KB, lexicon and gold files. Deterministic per seed.
inline SyntheticWorld gen_synthetic_world(const SyntheticWorldSpec& spec) {
  spec.validate();
  return synthetic_detail::Builder(spec).build();
}

}  // namespace displacer::harness

#endif  // DISPLACER_HARNESS_SYNTHETIC_HPP
