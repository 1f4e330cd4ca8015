#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bankdist/date.hpp"

namespace bankdist {

// --- State normalization ---------------------------------------------------

struct StateResult {
  enum class Kind { Matched, Candidates, Unknown };
  Kind kind = Kind::Unknown;
  std::vector<int> fips;  // one entry when Matched, several when Candidates
};

// Handles full names, two-letter abbreviations, and former territories.
// "Dakota Territory" yields candidates {38, 46} for disambiguation by city.
StateResult normalize_state(const std::string& raw);

std::optional<std::string> state_abbrev_from_fips(int fips);

// --- Gazetteer -------------------------------------------------------------

struct GazetteerEntry {
  int state_fips = 0;
  std::string canonical_city;
  std::vector<std::string> alt_spellings;
  std::string sources;
};

struct Gazetteer {
  std::vector<GazetteerEntry> entries;
  // (state_fips, normalized raw) -> canonical city
  std::map<std::pair<int, std::string>, std::string> crosswalk;
  std::vector<std::string> load_report;  // dropped outliers etc.
};

// CSV columns: state_fips,city,alt_spellings(';'-separated),sources
// Crosswalk CSV columns: state_fips,raw_city,canonical_city
Gazetteer load_gazetteer(const std::string& entries_csv,
                         const std::string& crosswalk_csv = "");

struct CityResult {
  enum class Kind { Matched, Unknown };
  Kind kind = Kind::Unknown;
  std::string canonical_city;
  bool via_crosswalk = false;
  std::vector<std::string> suggestions;  // nearest names when Unknown
};

// Applies spelling standardizations (centre->center, borough->boro), then
// exact lookup, then the crosswalk. Idempotent on its own outputs.
CityResult normalize_city(int state_fips, const std::string& raw_city,
                          const Gazetteer& gazetteer);

// --- Bank registry and matching -------------------------------------------

enum class CharterType { National, State, Private, Savings, Trust, Unknown };
std::string to_string(CharterType t);
std::optional<CharterType> charter_type_from_string(const std::string& s);

struct BankEntry {
  std::string bank_id;
  std::string canonical_name;
  int state_fips = 0;
  std::string canonical_city;
  CharterType charter_type = CharterType::Unknown;
  std::optional<Date> active_from;
  std::optional<Date> active_to;
};

struct BankRegistry {
  std::vector<BankEntry> banks;
  std::map<std::string, std::string> name_crosswalk;  // normalized raw -> canonical

  const BankEntry* by_id(const std::string& bank_id) const;
};

// CSV columns: bank_id,name,state_fips,city,charter_type,active_from,active_to
BankRegistry load_bank_registry(const std::string& banks_csv,
                                const std::string& crosswalk_csv = "");

enum class MatchMethod { Exact, Abbreviation, TypoTolerant, Crosswalk, Manual };
std::string to_string(MatchMethod m);

struct MatchResult {
  bool matched = false;
  std::string bank_id;
  MatchMethod method = MatchMethod::Exact;
  double score = 0.0;
  bool probable_national = false;  // unmatched names containing "nat"
  std::vector<std::string> best_candidates;
};

struct MatchOptions {
  double acceptance_threshold = 0.85;
  // Edit-distance bound: max(1, floor(len/8)) of the normalized query name.
  bool use_length_scaled_bound = true;
};

// Normalizes the raw name (case, leading "The", trailing "of/at <city>",
// abbreviation expansion) and tries exact -> abbreviation -> crosswalk ->
// typo-tolerant, never crossing states. Unmatched is a value, not an error.
MatchResult match_bank(int state_fips, const std::string& canonical_city,
                       const std::string& raw_bank_name, const BankRegistry& registry,
                       std::optional<Date> as_of_date = std::nullopt,
                       const MatchOptions& options = {});

// Fraction matched, optionally restricted by charter type.
// Throws DataError when the (filtered) input set is empty.
double match_rate(const std::vector<MatchResult>& results,
                  const std::vector<CharterType>& charter_of_result = {},
                  std::optional<CharterType> filter = std::nullopt);

// Damerau-Levenshtein (optimal string alignment) distance.
std::size_t edit_distance(const std::string& a, const std::string& b);

// Name normalization used by the matcher, exposed for tests and tools.
std::string normalize_bank_name(const std::string& raw, const std::string& city);

}  // namespace bankdist
