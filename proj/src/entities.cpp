#include "bankdist/entities.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <unordered_map>

#include "bankdist/errors.hpp"
#include "bankdist/util.hpp"

namespace bankdist {

namespace {

struct StateInfo {
  const char* name;
  const char* abbrev;
  int fips;
};

constexpr std::array<StateInfo, 51> kStates = {{
    {"alabama", "AL", 1},        {"alaska", "AK", 2},
    {"arizona", "AZ", 4},        {"arkansas", "AR", 5},
    {"california", "CA", 6},     {"colorado", "CO", 8},
    {"connecticut", "CT", 9},    {"delaware", "DE", 10},
    {"district of columbia", "DC", 11}, {"florida", "FL", 12},
    {"georgia", "GA", 13},       {"hawaii", "HI", 15},
    {"idaho", "ID", 16},         {"illinois", "IL", 17},
    {"indiana", "IN", 18},       {"iowa", "IA", 19},
    {"kansas", "KS", 20},        {"kentucky", "KY", 21},
    {"louisiana", "LA", 22},     {"maine", "ME", 23},
    {"maryland", "MD", 24},      {"massachusetts", "MA", 25},
    {"michigan", "MI", 26},      {"minnesota", "MN", 27},
    {"mississippi", "MS", 28},   {"missouri", "MO", 29},
    {"montana", "MT", 30},       {"nebraska", "NE", 31},
    {"nevada", "NV", 32},        {"new hampshire", "NH", 33},
    {"new jersey", "NJ", 34},    {"new mexico", "NM", 35},
    {"new york", "NY", 36},      {"north carolina", "NC", 37},
    {"north dakota", "ND", 38},  {"ohio", "OH", 39},
    {"oklahoma", "OK", 40},      {"oregon", "OR", 41},
    {"pennsylvania", "PA", 42},  {"rhode island", "RI", 44},
    {"south carolina", "SC", 45},{"south dakota", "SD", 46},
    {"tennessee", "TN", 47},     {"texas", "TX", 48},
    {"utah", "UT", 49},          {"vermont", "VT", 50},
    {"virginia", "VA", 51},      {"west virginia", "WV", 54},
    {"wisconsin", "WI", 55},     {"wyoming", "WY", 56},
    {"puerto rico", "PR", 72},
}};

std::string norm_key(const std::string& s) {
  auto toks = tokenize(s);
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

}  // namespace

StateResult normalize_state(const std::string& raw) {
  std::string key = norm_key(raw);
  if (key.empty()) return {};

  // Territories map to their successor state(s).
  static const std::unordered_map<std::string, std::vector<int>> territories = {
      {"colorado territory", {8}},     {"dakota territory", {38, 46}},
      {"indian territory", {40}},      {"oklahoma territory", {40}},
      {"arizona territory", {4}},      {"new mexico territory", {35}},
      {"utah territory", {49}},        {"washington territory", {53}},
      {"idaho territory", {16}},       {"montana territory", {30}},
      {"wyoming territory", {56}},     {"alaska territory", {2}},
      {"hawaii territory", {15}},      {"nebraska territory", {31}},
      {"kansas territory", {20}},      {"minnesota territory", {27}},
      {"oregon territory", {41}},      {"nevada territory", {32}},
      {"porto rico", {72}},
  };
  if (auto it = territories.find(key); it != territories.end()) {
    StateResult r;
    r.fips = it->second;
    r.kind = r.fips.size() == 1 ? StateResult::Kind::Matched
                                : StateResult::Kind::Candidates;
    return r;
  }
  // Washington state vs Washington Territory handled above; plain
  // "washington" resolves to the state.
  if (key == "washington") return {StateResult::Kind::Matched, {53}};

  // Dotted abbreviations ("N.Y.") tokenize with spaces; compare compacted too.
  std::string compact = key;
  compact.erase(std::remove(compact.begin(), compact.end(), ' '), compact.end());
  for (const auto& s : kStates) {
    if (key == s.name || compact == to_lower(s.abbrev)) {
      return {StateResult::Kind::Matched, {s.fips}};
    }
  }
  return {};
}

std::optional<std::string> state_abbrev_from_fips(int fips) {
  if (fips == 53) return "WA";
  for (const auto& s : kStates) {
    if (s.fips == fips) return s.abbrev;
  }
  return std::nullopt;
}

// --- Cities ----------------------------------------------------------------

namespace {

// Minimal spelling standardizations applied before lookup.
std::string standardize_city(const std::string& raw) {
  auto toks = tokenize(raw);
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::string t = toks[i];
    if (t == "centre") t = "center";
    if (t.size() > 7 && t.ends_with("borough")) {
      t = t.substr(0, t.size() - 7) + "boro";
    } else if (t == "borough") {
      t = "boro";
    }
    if (i) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace

Gazetteer load_gazetteer(const std::string& entries_csv, const std::string& crosswalk_csv) {
  Gazetteer g;
  std::ifstream in(entries_csv);
  if (!in) throw FileNotFoundError(entries_csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto f = parse_csv_line(line);
    if (f.size() < 2) {
      g.load_report.push_back("skipped malformed gazetteer row: " + line);
      continue;
    }
    GazetteerEntry e;
    e.state_fips = std::stoi(f[0]);
    e.canonical_city = f[1];
    if (e.canonical_city.size() > 64) {
      g.load_report.push_back("dropped impossibly long city name: " + e.canonical_city);
      continue;
    }
    if (f.size() > 2 && !f[2].empty()) e.alt_spellings = split(f[2], ';');
    if (f.size() > 3) e.sources = f[3];
    g.entries.push_back(std::move(e));
  }

  if (!crosswalk_csv.empty()) {
    std::ifstream xin(crosswalk_csv);
    if (!xin) throw FileNotFoundError(crosswalk_csv);
    bool xheader = true;
    while (std::getline(xin, line)) {
      if (trim(line).empty()) continue;
      if (xheader) {
        xheader = false;
        continue;
      }
      auto f = parse_csv_line(line);
      if (f.size() < 3) {
        g.load_report.push_back("skipped malformed crosswalk row: " + line);
        continue;
      }
      g.crosswalk[{std::stoi(f[0]), standardize_city(f[1])}] = f[2];
    }
  }
  return g;
}

CityResult normalize_city(int state_fips, const std::string& raw_city,
                          const Gazetteer& gazetteer) {
  const std::string key = standardize_city(raw_city);
  CityResult out;

  for (const auto& e : gazetteer.entries) {
    if (e.state_fips != state_fips) continue;
    if (standardize_city(e.canonical_city) == key) {
      out.kind = CityResult::Kind::Matched;
      out.canonical_city = e.canonical_city;
      return out;
    }
    for (const auto& alt : e.alt_spellings) {
      if (standardize_city(alt) == key) {
        out.kind = CityResult::Kind::Matched;
        out.canonical_city = e.canonical_city;
        return out;
      }
    }
  }

  if (auto it = gazetteer.crosswalk.find({state_fips, key});
      it != gazetteer.crosswalk.end()) {
    out.kind = CityResult::Kind::Matched;
    out.canonical_city = it->second;
    out.via_crosswalk = true;
    return out;
  }

  // Nearest-name suggestions within the state.
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& e : gazetteer.entries) {
    if (e.state_fips != state_fips) continue;
    ranked.emplace_back(edit_distance(standardize_city(e.canonical_city), key),
                        e.canonical_city);
  }
  std::sort(ranked.begin(), ranked.end());
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
    out.suggestions.push_back(ranked[i].second);
  }
  return out;
}

// --- Banks -----------------------------------------------------------------

std::string to_string(CharterType t) {
  switch (t) {
    case CharterType::National: return "national";
    case CharterType::State: return "state";
    case CharterType::Private: return "private";
    case CharterType::Savings: return "savings";
    case CharterType::Trust: return "trust";
    case CharterType::Unknown: return "unknown";
  }
  return "unknown";
}

std::optional<CharterType> charter_type_from_string(const std::string& s) {
  if (s == "national") return CharterType::National;
  if (s == "state") return CharterType::State;
  if (s == "private") return CharterType::Private;
  if (s == "savings") return CharterType::Savings;
  if (s == "trust") return CharterType::Trust;
  if (s == "unknown" || s.empty()) return CharterType::Unknown;
  return std::nullopt;
}

std::string to_string(MatchMethod m) {
  switch (m) {
    case MatchMethod::Exact: return "exact";
    case MatchMethod::Abbreviation: return "abbreviation";
    case MatchMethod::TypoTolerant: return "typo_tolerant";
    case MatchMethod::Crosswalk: return "crosswalk";
    case MatchMethod::Manual: return "manual";
  }
  return "exact";
}

const BankEntry* BankRegistry::by_id(const std::string& bank_id) const {
  for (const auto& b : banks) {
    if (b.bank_id == bank_id) return &b;
  }
  return nullptr;
}

BankRegistry load_bank_registry(const std::string& banks_csv,
                                const std::string& crosswalk_csv) {
  BankRegistry reg;
  std::ifstream in(banks_csv);
  if (!in) throw FileNotFoundError(banks_csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    auto f = parse_csv_line(line);
    if (f.size() < 4) throw DataError("malformed registry row: " + line);
    BankEntry b;
    b.bank_id = f[0];
    b.canonical_name = f[1];
    b.state_fips = std::stoi(f[2]);
    b.canonical_city = f[3];
    if (f.size() > 4) {
      auto ct = charter_type_from_string(f[4]);
      if (!ct) throw DataError("unknown charter type: " + f[4]);
      b.charter_type = *ct;
    }
    if (f.size() > 5 && !f[5].empty()) b.active_from = Date::parse(f[5]);
    if (f.size() > 6 && !f[6].empty()) b.active_to = Date::parse(f[6]);
    reg.banks.push_back(std::move(b));
  }

  if (!crosswalk_csv.empty()) {
    std::ifstream xin(crosswalk_csv);
    if (!xin) throw FileNotFoundError(crosswalk_csv);
    bool xheader = true;
    while (std::getline(xin, line)) {
      if (trim(line).empty()) continue;
      if (xheader) {
        xheader = false;
        continue;
      }
      auto f = parse_csv_line(line);
      if (f.size() < 2) throw DataError("malformed name crosswalk row: " + line);
      reg.name_crosswalk[norm_key(f[0])] = f[1];
    }
  }
  return reg;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
        d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);  // transposition
      }
    }
  }
  return d[n][m];
}

namespace {

// Token-level abbreviation expansion for bank names.
std::vector<std::string> expand_tokens(std::vector<std::string> toks) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const std::string& t = toks[i];
    if (t == "nb") {
      out.push_back("national");
      out.push_back("bank");
    } else if (t == "nat" && i + 1 < toks.size() && toks[i + 1] == "l") {
      out.push_back("national");  // "Nat'l" tokenizes as "nat l"
      ++i;
    } else if (t == "natl" || t == "nat") {
      out.push_back("national");
    } else if (t == "bk") {
      out.push_back("bank");
    } else if (t == "sav" || t == "svgs") {
      out.push_back("savings");
    } else if (t == "tr" && i + 1 < toks.size() &&
               (toks[i + 1] == "co" || toks[i + 1] == "company")) {
      out.push_back("trust");
    } else if (t == "co") {
      out.push_back("company");
    } else {
      out.push_back(t);
    }
  }
  return out;
}

std::string join(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

// Strips leading "the" and trailing "of <city>" / "at <city>".
std::vector<std::string> strip_decorations(std::vector<std::string> toks,
                                           const std::vector<std::string>& city_toks) {
  if (!toks.empty() && toks.front() == "the") toks.erase(toks.begin());
  if (!city_toks.empty() && toks.size() > city_toks.size() + 1) {
    const std::size_t tail = toks.size() - city_toks.size();
    if ((toks[tail - 1] == "of" || toks[tail - 1] == "at") &&
        std::equal(city_toks.begin(), city_toks.end(), toks.begin() + static_cast<std::ptrdiff_t>(tail))) {
      toks.resize(tail - 1);
    }
  }
  return toks;
}

std::size_t common_prefix_len(const std::string& a, const std::string& b) {
  std::size_t i = 0;
  while (i < a.size() && i < b.size() && a[i] == b[i]) ++i;
  return i;
}

bool active_at(const BankEntry& b, const Date& d) {
  if (b.active_from && d < *b.active_from) return false;
  if (b.active_to && *b.active_to < d) return false;
  return true;
}

}  // namespace

std::string normalize_bank_name(const std::string& raw, const std::string& city) {
  auto toks = strip_decorations(tokenize(raw), tokenize(city));
  return join(expand_tokens(std::move(toks)));
}

MatchResult match_bank(int state_fips, const std::string& canonical_city,
                       const std::string& raw_bank_name, const BankRegistry& registry,
                       std::optional<Date> as_of_date, const MatchOptions& options) {
  MatchResult out;
  const auto city_toks = tokenize(canonical_city);
  const auto raw_plain = join(strip_decorations(tokenize(raw_bank_name), city_toks));
  const auto raw_expanded = normalize_bank_name(raw_bank_name, canonical_city);
  if (raw_expanded.find("nat") != std::string::npos) out.probable_national = true;

  struct Candidate {
    const BankEntry* bank;
    std::string plain;
    std::string expanded;
  };
  std::vector<Candidate> candidates;
  for (const auto& b : registry.banks) {
    if (b.state_fips != state_fips) continue;
    if (norm_key(b.canonical_city) != norm_key(canonical_city)) continue;
    if (as_of_date && !active_at(b, *as_of_date)) continue;
    const auto bank_city_toks = tokenize(b.canonical_city);
    candidates.push_back(
        {&b, join(strip_decorations(tokenize(b.canonical_name), bank_city_toks)),
         normalize_bank_name(b.canonical_name, b.canonical_city)});
  }

  for (const auto& c : candidates) {
    if (c.plain == raw_plain) {
      out.matched = true;
      out.bank_id = c.bank->bank_id;
      out.method = MatchMethod::Exact;
      out.score = 1.0;
      return out;
    }
  }
  for (const auto& c : candidates) {
    if (c.expanded == raw_expanded) {
      out.matched = true;
      out.bank_id = c.bank->bank_id;
      out.method = MatchMethod::Abbreviation;
      out.score = 1.0;
      return out;
    }
  }

  // Manual crosswalk precedes fuzzy matching.
  for (const std::string& key : {norm_key(raw_bank_name), raw_plain, raw_expanded}) {
    auto it = registry.name_crosswalk.find(key);
    if (it == registry.name_crosswalk.end()) continue;
    for (const auto& c : candidates) {
      if (norm_key(c.bank->canonical_name) == norm_key(it->second)) {
        out.matched = true;
        out.bank_id = c.bank->bank_id;
        out.method = MatchMethod::Crosswalk;
        out.score = 1.0;
        return out;
      }
    }
  }

  // Bounded-edit-distance typo match on the expanded names.
  const std::size_t bound =
      options.use_length_scaled_bound
          ? std::max<std::size_t>(1, raw_expanded.size() / 8)
          : 1;
  const Candidate* best = nullptr;
  double best_score = -1.0;
  for (const auto& c : candidates) {
    const std::size_t dist = edit_distance(raw_expanded, c.expanded);
    const std::size_t longest = std::max(raw_expanded.size(), c.expanded.size());
    const double score =
        longest == 0 ? 0.0 : 1.0 - static_cast<double>(dist) / static_cast<double>(longest);
    if (dist <= bound && score >= options.acceptance_threshold) {
      bool better = score > best_score;
      if (best && score == best_score) {
        const auto lcp_new = common_prefix_len(raw_expanded, c.expanded);
        const auto lcp_best = common_prefix_len(raw_expanded, best->expanded);
        better = lcp_new > lcp_best ||
                 (lcp_new == lcp_best &&
                  c.bank->canonical_name < best->bank->canonical_name);
      }
      if (better) {
        best = &c;
        best_score = score;
      }
    }
  }
  if (best) {
    out.matched = true;
    out.bank_id = best->bank->bank_id;
    out.method = MatchMethod::TypoTolerant;
    out.score = best_score;
    return out;
  }

  // Unmatched: report the closest names for review.
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& c : candidates) {
    ranked.emplace_back(edit_distance(raw_expanded, c.expanded), c.bank->canonical_name);
  }
  std::sort(ranked.begin(), ranked.end());
  for (std::size_t i = 0; i < std::min<std::size_t>(3, ranked.size()); ++i) {
    out.best_candidates.push_back(ranked[i].second);
  }
  return out;
}

double match_rate(const std::vector<MatchResult>& results,
                  const std::vector<CharterType>& charter_of_result,
                  std::optional<CharterType> filter) {
  std::size_t total = 0, matched = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (filter) {
      if (i >= charter_of_result.size() || charter_of_result[i] != *filter) continue;
    }
    ++total;
    if (results[i].matched) ++matched;
  }
  if (total == 0) throw DataError("match_rate over empty subset");
  return static_cast<double>(matched) / static_cast<double>(total);
}

}  // namespace bankdist
