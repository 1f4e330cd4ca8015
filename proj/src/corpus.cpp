#include "bankdist/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "bankdist/errors.hpp"
#include "bankdist/util.hpp"
#include "json.hpp"

namespace bankdist {

using nlohmann::json;

std::string to_string(Source s) {
  switch (s) {
    case Source::ChroniclingAmerica: return "chronicling_america";
    case Source::CommercialA: return "commercial_a";
    case Source::CommercialB: return "commercial_b";
    case Source::Synthetic: return "synthetic";
  }
  return "synthetic";
}

std::optional<Source> source_from_string(const std::string& s) {
  if (s == "chronicling_america") return Source::ChroniclingAmerica;
  if (s == "commercial_a") return Source::CommercialA;
  if (s == "commercial_b") return Source::CommercialB;
  if (s == "synthetic") return Source::Synthetic;
  return std::nullopt;
}

std::string to_string(RejectReason r) {
  switch (r) {
    case RejectReason::EmptyText: return "empty_text";
    case RejectReason::DateOutOfRange: return "date_out_of_range";
    case RejectReason::BadEncoding: return "bad_encoding";
  }
  return "unknown";
}

namespace {

json record_to_json(const ArticleRecord& r) {
  json j;
  j["article_id"] = r.article_id;
  j["date"] = r.publication_date.to_iso();
  if (r.publication_date.precision != DatePrecision::Day) {
    j["date_precision"] = to_string(r.publication_date.precision);
  }
  j["newspaper"] = r.newspaper_name;
  j["state"] = r.state_raw;
  j["city"] = r.city_raw;
  j["text"] = r.text;
  j["source"] = to_string(r.source);
  if (r.ocr_quality) j["ocr_quality"] = *r.ocr_quality;
  return j;
}

ArticleRecord record_from_json(const json& j) {
  ArticleRecord r;
  r.article_id = j.at("article_id").get<std::string>();
  auto date = Date::parse(j.at("date").get<std::string>());
  if (!date) throw DataError("unparseable date: " + j.at("date").dump());
  r.publication_date = *date;
  if (j.contains("date_precision")) {
    auto p = precision_from_string(j["date_precision"].get<std::string>());
    if (p) r.publication_date.precision = *p;
  }
  r.newspaper_name = j.value("newspaper", "");
  r.state_raw = j.value("state", "");
  r.city_raw = j.value("city", "");
  r.text = j.at("text").get<std::string>();
  auto src = source_from_string(j.value("source", "synthetic"));
  if (!src) throw DataError("unknown source: " + j["source"].dump());
  r.source = *src;
  if (j.contains("ocr_quality") && !j["ocr_quality"].is_null()) {
    r.ocr_quality = j["ocr_quality"].get<double>();
  }
  return r;
}

}  // namespace

LoadResult load_articles(const std::string& path, CorpusFormat format) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);

  LoadResult out;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t lineno = 0;

  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      ArticleRecord rec;
      if (format == CorpusFormat::Jsonl) {
        rec = record_from_json(json::parse(line));
      } else {
        auto fields = parse_csv_line(line);
        if (header.empty()) {
          header = fields;
          continue;
        }
        if (fields.size() != header.size()) {
          throw DataError("field count mismatch (" + std::to_string(fields.size()) +
                          " vs header " + std::to_string(header.size()) + ")");
        }
        json j;
        for (std::size_t i = 0; i < header.size(); ++i) {
          if (header[i] == "ocr_quality") {
            if (!fields[i].empty()) j[header[i]] = std::stod(fields[i]);
          } else {
            j[header[i]] = fields[i];
          }
        }
        rec = record_from_json(j);
      }
      if (!seen_ids.insert(rec.article_id).second) {
        out.errors.push_back({lineno, rec.article_id,
                              "duplicate article_id: " + rec.article_id});
        continue;
      }
      out.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      out.errors.push_back({lineno, "", std::string("malformed record: ") + e.what()});
    }
  }

  std::sort(out.records.begin(), out.records.end(),
            [](const ArticleRecord& a, const ArticleRecord& b) {
              if (a.publication_date != b.publication_date)
                return a.publication_date < b.publication_date;
              return a.article_id < b.article_id;
            });
  return out;
}

void save_articles(const std::string& path, const std::vector<ArticleRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void save_errors(const std::string& path, const std::vector<RecordError>& errors) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& e : errors) {
    json j;
    j["line"] = e.line;
    if (!e.article_id.empty()) j["article_id"] = e.article_id;
    j["reason"] = e.reason;
    out << j.dump() << '\n';
  }
}

std::variant<ValidatedArticle, RejectReason> validate_article(const ArticleRecord& rec) {
  if (!is_valid_utf8(rec.text)) return RejectReason::BadEncoding;
  const std::string text = normalize_whitespace(rec.text);
  if (text.empty()) return RejectReason::EmptyText;
  const Date& d = rec.publication_date;
  if (!d.valid() || d.year < kMinYear || d.year > kMaxYear) {
    return RejectReason::DateOutOfRange;
  }
  ValidatedArticle v{rec};
  v.record.text = text;
  return v;
}

// --- Synthetic corpus ------------------------------------------------------

namespace {

// Minimal deterministic PRNG helpers. std::uniform_int_distribution is
// implementation-defined, so indices are drawn with Lemire-style reduction
// on the raw 64-bit stream to keep outputs platform-stable.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  std::uint64_t next() {
    // splitmix64
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(next() % n); }
};

const std::vector<std::pair<std::string, std::string>> kSynthPlaces = {
    {"New York", "New York"},     {"Pennsylvania", "Pittsburgh"},
    {"Ohio", "Cincinnati"},       {"Illinois", "Chicago"},
    {"Missouri", "Saint Louis"},  {"Massachusetts", "Boston"},
    {"Maryland", "Baltimore"},    {"Georgia", "Atlanta"},
    {"Minnesota", "Minneapolis"}, {"Colorado", "Denver"},
    {"Kansas", "Topeka"},         {"Indiana", "Indianapolis"},
    {"Kentucky", "Louisville"},   {"Tennessee", "Nashville"},
    {"Iowa", "Des Moines"},       {"Michigan", "Detroit"}};

const std::vector<std::string> kBankPrefixes = {
    "First",   "Merchants", "Farmers",  "Citizens", "Union",
    "Second",  "Traders",   "Peoples",  "Commercial", "Exchange",
    "German",  "Western",   "Security", "Continental", "Atlas"};

std::string planted_text(EventType t, const std::string& bank) {
  switch (t) {
    case EventType::Run:
      return "A run on the " + bank +
             " began this morning as anxious depositors crowded the paying "
             "tellers demanding their money.";
    case EventType::Suspension:
      return "The " + bank +
             " suspended payment today and its doors remained closed to "
             "depositors.";
    case EventType::PartialSuspension:
      return "The " + bank +
             " invoked the sixty days notice rule and will pay deposits only "
             "after the notice period.";
    case EventType::Failure:
      return "The " + bank +
             " has failed. The panic among depositors spread quickly through "
             "the city.";
    case EventType::Receivership:
      return "A receiver has been appointed for the " + bank +
             " by the comptroller of the currency.";
    case EventType::Reopening:
      return "The " + bank +
             ", which suspended payment last month, reopened its doors today "
             "and resumed business.";
    case EventType::Other:
      return "Heavy withdrawals of deposits were reported at the " + bank +
             " yesterday afternoon.";
  }
  return bank;
}

const std::vector<std::string> kDecoyTexts = {
    "The snow bank along the river bank melted rapidly while trains are "
    "running on the usual schedule.",
    "Bank loans rose this quarter and banknote circulation was steady, the "
    "clearing house reported.",
    "Albert Banks of this county won the plowing match held near the river "
    "bank on Saturday.",
    "A suspension of production at the mill was announced; the rules were "
    "suspended for the holiday parade.",
    "Fishermen gathered on the river bank as the ice ran out of the stream."};

const std::vector<std::string> kFillerTexts = {
    "The county fair opened yesterday with a large attendance and fine "
    "weather throughout the day.",
    "The new schoolhouse on Elm street will be dedicated next Tuesday "
    "evening.",
    "Crops in the western townships are reported in excellent condition this "
    "season."};

}  // namespace

SynthResult generate_synthetic(const SynthSpec& spec) {
  if (spec.noise_rate < 0.0 || spec.noise_rate > 1.0) {
    throw InvalidSpecError("noise_rate must lie in [0,1]");
  }
  if (!spec.event_mix.empty()) {
    double sum = 0.0;
    for (const auto& [t, p] : spec.event_mix) {
      if (p < 0.0) throw InvalidSpecError("event_mix proportions must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw InvalidSpecError("event_mix proportions must sum to 1");
    }
  }
  const std::size_t n_decoys =
      static_cast<std::size_t>(std::llround(spec.noise_rate * static_cast<double>(spec.n_articles)));
  if (spec.n_planted_events + n_decoys > spec.n_articles) {
    throw InvalidSpecError("n_planted_events + decoys exceed n_articles");
  }

  SynthResult out;
  if (spec.n_articles == 0) return out;

  Rng rng(spec.rng_seed);

  // Synthetic registry: enough banks that episodes rarely collide by chance.
  const std::size_t n_banks =
      std::max<std::size_t>(8, std::min(kBankPrefixes.size() * kSynthPlaces.size(),
                                        spec.n_planted_events / 2 + 8));
  for (std::size_t i = 0; i < n_banks; ++i) {
    const auto& place = kSynthPlaces[i % kSynthPlaces.size()];
    const auto& prefix = kBankPrefixes[(i / kSynthPlaces.size()) % kBankPrefixes.size()];
    SynthBank b;
    b.bank_id = "SB" + std::to_string(1000 + i);
    b.name = prefix + " National Bank of " + place.second;
    b.state = place.first;
    b.city = place.second;
    out.registry.push_back(std::move(b));
  }

  // Cumulative event mix for sampling; defaults to runs only.
  std::vector<std::pair<EventType, double>> cumulative;
  {
    double acc = 0.0;
    if (spec.event_mix.empty()) {
      cumulative.emplace_back(EventType::Run, 1.0);
    } else {
      for (const auto& [t, p] : spec.event_mix) {
        acc += p;
        cumulative.emplace_back(t, acc);
      }
      cumulative.back().second = 1.0;
    }
  }
  auto sample_event = [&](double u) {
    for (const auto& [t, edge] : cumulative) {
      if (u <= edge) return t;
    }
    return cumulative.back().first;
  };

  const std::int64_t day0 = Date{1885, 1, 1}.to_days();
  const std::int64_t day_span = Date{1934, 12, 31}.to_days() - day0;

  std::size_t planted_left = spec.n_planted_events;
  std::size_t decoys_left = n_decoys;
  for (std::size_t i = 0; i < spec.n_articles; ++i) {
    ArticleRecord rec;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth-%06zu", i);
    rec.article_id = idbuf;
    rec.source = Source::Synthetic;
    rec.publication_date = Date::from_days(day0 + static_cast<std::int64_t>(rng.below(static_cast<std::size_t>(day_span))));
    rec.newspaper_name = "The Daily Ledger";

    if (planted_left > 0) {
      --planted_left;
      const SynthBank& bank = out.registry[rng.below(out.registry.size())];
      const EventType type =
          sample_event(static_cast<double>(rng.next() >> 11) * 0x1.0p-53);
      rec.state_raw = bank.state;
      rec.city_raw = bank.city;
      rec.text = planted_text(type, bank.name);

      ArticleEvent ev;
      ev.article_id = rec.article_id;
      ev.bank_name_raw = bank.name;
      ev.state_raw = bank.state;
      ev.city_raw = bank.city;
      ev.event_type = type;
      ev.event_date = rec.publication_date;
      ev.date_precision = DatePrecision::Day;
      out.ground_truth.push_back(std::move(ev));
    } else if (decoys_left > 0) {
      --decoys_left;
      const auto& place = kSynthPlaces[rng.below(kSynthPlaces.size())];
      rec.state_raw = place.first;
      rec.city_raw = place.second;
      rec.text = kDecoyTexts[rng.below(kDecoyTexts.size())];
    } else {
      const auto& place = kSynthPlaces[rng.below(kSynthPlaces.size())];
      rec.state_raw = place.first;
      rec.city_raw = place.second;
      rec.text = kFillerTexts[rng.below(kFillerTexts.size())];
    }
    out.articles.push_back(std::move(rec));
  }

  std::sort(out.articles.begin(), out.articles.end(),
            [](const ArticleRecord& a, const ArticleRecord& b) {
              if (a.publication_date != b.publication_date)
                return a.publication_date < b.publication_date;
              return a.article_id < b.article_id;
            });
  return out;
}

std::string to_string(EventType t) {
  switch (t) {
    case EventType::Run: return "run";
    case EventType::Suspension: return "suspension";
    case EventType::PartialSuspension: return "partial_suspension";
    case EventType::Failure: return "failure";
    case EventType::Reopening: return "reopening";
    case EventType::Receivership: return "receivership";
    case EventType::Other: return "other";
  }
  return "other";
}

std::optional<EventType> event_type_from_string(const std::string& s) {
  if (s == "run") return EventType::Run;
  if (s == "suspension") return EventType::Suspension;
  if (s == "partial_suspension") return EventType::PartialSuspension;
  if (s == "failure") return EventType::Failure;
  if (s == "reopening") return EventType::Reopening;
  if (s == "receivership") return EventType::Receivership;
  if (s == "other") return EventType::Other;
  return std::nullopt;
}

}  // namespace bankdist
