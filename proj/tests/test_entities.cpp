#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bankdist/entities.hpp"
#include "bankdist/errors.hpp"

using namespace bankdist;

TEST_CASE("state normalization") {
  auto ohio = normalize_state("Ohio");
  CHECK(ohio.kind == StateResult::Kind::Matched);
  CHECK(ohio.fips == std::vector<int>{39});
  CHECK(normalize_state("  ohio ").fips == std::vector<int>{39});
  CHECK(normalize_state("OH").fips == std::vector<int>{39});
  CHECK(normalize_state("N.Y.").fips == std::vector<int>{36});

  auto dakota = normalize_state("Dakota Territory");
  CHECK(dakota.kind == StateResult::Kind::Candidates);
  CHECK(dakota.fips == std::vector<int>{38, 46});

  CHECK(normalize_state("Indian Territory").fips == std::vector<int>{40});
  CHECK(normalize_state("Washington").fips == std::vector<int>{53});
  CHECK(normalize_state("Porto Rico").fips == std::vector<int>{72});

  CHECK(normalize_state("Ruritania").kind == StateResult::Kind::Unknown);
  CHECK(normalize_state("").kind == StateResult::Kind::Unknown);

  CHECK(state_abbrev_from_fips(39) == "OH");
  CHECK(state_abbrev_from_fips(53) == "WA");
  CHECK_FALSE(state_abbrev_from_fips(99));
}

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("gazetteer lookup, spellings, crosswalk and suggestions") {
  const auto entries = write_temp("gaz.csv",
                                  "state_fips,city,alt_spellings,sources\n"
                                  "39,Cincinnati,Cincinnatti;Cinti,census\n"
                                  "39,Center City,,census\n"
                                  "39,Greensboro,,census\n"
                                  "42,Pittsburgh,Pittsburg,census\n");
  const auto xwalk = write_temp("gaz_xw.csv",
                                "state_fips,raw_city,canonical_city\n"
                                "39,Porkopolis,Cincinnati\n");
  const auto g = load_gazetteer(entries, xwalk);
  REQUIRE(g.entries.size() == 4);

  CHECK(normalize_city(39, "Cincinnati", g).kind == CityResult::Kind::Matched);
  // Alternate spelling.
  auto alt = normalize_city(39, "Cincinnatti", g);
  CHECK(alt.kind == CityResult::Kind::Matched);
  CHECK(alt.canonical_city == "Cincinnati");
  // Standardizations: centre -> center, borough -> boro.
  CHECK(normalize_city(39, "Centre City", g).canonical_city == "Center City");
  CHECK(normalize_city(39, "Greensborough", g).canonical_city == "Greensboro");
  // Crosswalk entry.
  auto xw = normalize_city(39, "Porkopolis", g);
  CHECK(xw.kind == CityResult::Kind::Matched);
  CHECK(xw.via_crosswalk);
  CHECK(xw.canonical_city == "Cincinnati");
  // State boundary respected.
  CHECK(normalize_city(42, "Cincinnati", g).kind == CityResult::Kind::Unknown);
  // Unknown names come back with nearby suggestions.
  auto unk = normalize_city(39, "Cincinati", g);
  CHECK(unk.kind == CityResult::Kind::Unknown);
  REQUIRE_FALSE(unk.suggestions.empty());
  CHECK(unk.suggestions.front() == "Cincinnati");
  // Idempotent on its own output.
  auto once = normalize_city(39, "Greensborough", g);
  auto twice = normalize_city(39, once.canonical_city, g);
  CHECK(twice.canonical_city == once.canonical_city);

  std::remove(entries.c_str());
  std::remove(xwalk.c_str());
}

TEST_CASE("edit distance is optimal string alignment") {
  CHECK(edit_distance("", "") == 0);
  CHECK(edit_distance("abc", "") == 3);
  CHECK(edit_distance("abc", "abc") == 0);
  CHECK(edit_distance("abc", "abd") == 1);
  CHECK(edit_distance("abc", "ab") == 1);
  CHECK(edit_distance("enterprise", "entreprise") == 1);  // one transposition
  CHECK(edit_distance("bank", "bnak") == 1);
  // OSA (no substring re-editing) gives 3 here, unrestricted DL would give 2.
  CHECK(edit_distance("ca", "abc") == 3);
}

TEST_CASE("bank name normalization") {
  CHECK(normalize_bank_name("The First National Bank of Springfield", "Springfield") ==
        "first national bank");
  CHECK(normalize_bank_name("First Nat'l Bk", "Springfield") == "first national bank");
  CHECK(normalize_bank_name("First Natl Bank", "Springfield") == "first national bank");
  CHECK(normalize_bank_name("Enterprise NB", "Allegheny") == "enterprise national bank");
  CHECK(normalize_bank_name("Union Sav. Bank", "Boston") == "union savings bank");
  CHECK(normalize_bank_name("Farmers Tr. Co.", "Topeka") == "farmers trust company");
  CHECK(normalize_bank_name("Merchants Bank at Albany", "Albany") == "merchants bank");
  // "of <other city>" is part of the name, not a decoration.
  CHECK(normalize_bank_name("Bank of Commerce", "Saint Louis") == "bank of commerce");
}

namespace {

BankRegistry small_registry() {
  BankRegistry reg;
  const auto add = [&](const char* id, const char* name, int fips, const char* city,
                       CharterType ct) {
    BankEntry b;
    b.bank_id = id;
    b.canonical_name = name;
    b.state_fips = fips;
    b.canonical_city = city;
    b.charter_type = ct;
    reg.banks.push_back(std::move(b));
  };
  add("B1", "Enterprise National Bank", 42, "Allegheny", CharterType::National);
  add("B2", "First National Bank", 42, "Allegheny", CharterType::National);
  add("B3", "Enterprise Savings Bank", 42, "Allegheny", CharterType::Savings);
  add("B4", "Enterprise National Bank", 39, "Cincinnati", CharterType::National);
  add("B5", "Merchants Bank", 42, "Pittsburgh", CharterType::State);
  return reg;
}

}  // namespace

TEST_CASE("bank matching ladder") {
  const auto reg = small_registry();

  auto exact = match_bank(42, "Allegheny", "Enterprise National Bank", reg);
  CHECK(exact.matched);
  CHECK(exact.bank_id == "B1");
  CHECK(exact.method == MatchMethod::Exact);

  auto abbrev = match_bank(42, "Allegheny", "The Enterprise Nat'l Bank of Allegheny", reg);
  CHECK(abbrev.matched);
  CHECK(abbrev.bank_id == "B1");

  auto nb = match_bank(42, "Allegheny", "Enterprise NB", reg);
  CHECK(nb.matched);
  CHECK(nb.bank_id == "B1");

  // Transposed-letter newspaper spelling resolves by bounded edit distance.
  auto typo = match_bank(42, "Allegheny", "Entreprise National Bank", reg);
  CHECK(typo.matched);
  CHECK(typo.bank_id == "B1");
  CHECK(typo.method == MatchMethod::TypoTolerant);
  CHECK(typo.score >= 0.85);

  // Never crosses city or state lines.
  CHECK_FALSE(match_bank(42, "Pittsburgh", "Enterprise National Bank", reg).matched);
  auto other_state = match_bank(39, "Cincinnati", "Enterprise National Bank", reg);
  CHECK(other_state.bank_id == "B4");

  // Distinct institutions with similar names stay distinct.
  auto savings = match_bank(42, "Allegheny", "Enterprise Savings Bank", reg);
  CHECK(savings.bank_id == "B3");
}

TEST_CASE("unmatched names report candidates and the national hint") {
  const auto reg = small_registry();
  auto miss = match_bank(42, "Allegheny", "Keystone National Bank", reg);
  CHECK_FALSE(miss.matched);
  CHECK(miss.probable_national);
  CHECK_FALSE(miss.best_candidates.empty());

  auto miss2 = match_bank(42, "Allegheny", "Keystone Savings Institution", reg);
  CHECK_FALSE(miss2.matched);
  CHECK_FALSE(miss2.probable_national);
}

TEST_CASE("activity window limits the candidate set") {
  BankRegistry reg;
  BankEntry b;
  b.bank_id = "W1";
  b.canonical_name = "Western Bank";
  b.state_fips = 8;
  b.canonical_city = "Denver";
  b.active_from = Date{1880, 1, 1};
  b.active_to = Date{1900, 12, 31};
  reg.banks.push_back(b);

  CHECK(match_bank(8, "Denver", "Western Bank", reg, Date{1890, 6, 1}).matched);
  CHECK_FALSE(match_bank(8, "Denver", "Western Bank", reg, Date{1875, 6, 1}).matched);
  CHECK_FALSE(match_bank(8, "Denver", "Western Bank", reg, Date{1905, 6, 1}).matched);
  // No as-of date: the window is not applied.
  CHECK(match_bank(8, "Denver", "Western Bank", reg).matched);
}

TEST_CASE("registry and name crosswalk load from CSV") {
  const auto banks = write_temp("reg.csv",
                                "bank_id,name,state_fips,city,charter_type,active_from,active_to\n"
                                "R1,Enterprise National Bank,42,Allegheny,national,1870-01-01,\n"
                                "R2,\"Dollar Savings Bank\",42,Pittsburgh,savings,,\n");
  const auto xw = write_temp("reg_xw.csv",
                             "raw_name,canonical_name\n"
                             "the old enterprise bank,Enterprise National Bank\n");
  const auto reg = load_bank_registry(banks, xw);
  REQUIRE(reg.banks.size() == 2);
  CHECK(reg.banks[0].charter_type == CharterType::National);
  REQUIRE(reg.banks[0].active_from);
  CHECK(reg.banks[0].active_from->year == 1870);
  CHECK_FALSE(reg.banks[0].active_to);
  CHECK(reg.by_id("R2") != nullptr);
  CHECK(reg.by_id("nope") == nullptr);

  auto via = match_bank(42, "Allegheny", "The Old Enterprise Bank", reg);
  CHECK(via.matched);
  CHECK(via.bank_id == "R1");
  CHECK(via.method == MatchMethod::Crosswalk);

  std::remove(banks.c_str());
  std::remove(xw.c_str());
}

TEST_CASE("match rate with charter filter") {
  std::vector<MatchResult> results(4);
  results[0].matched = true;
  results[1].matched = true;
  results[2].matched = false;
  results[3].matched = true;
  const std::vector<CharterType> charters = {CharterType::National, CharterType::State,
                                             CharterType::National, CharterType::State};
  CHECK(match_rate(results) == doctest::Approx(0.75));
  CHECK(match_rate(results, charters, CharterType::National) == doctest::Approx(0.5));
  CHECK(match_rate(results, charters, CharterType::State) == doctest::Approx(1.0));
  CHECK_THROWS_AS(match_rate(results, charters, CharterType::Trust), DataError);
  CHECK_THROWS_AS(match_rate({}), DataError);
}
