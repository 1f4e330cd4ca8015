#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bankdist/date.hpp"
#include "bankdist/events.hpp"

namespace bankdist {

enum class Source { ChroniclingAmerica, CommercialA, CommercialB, Synthetic };

std::string to_string(Source s);
std::optional<Source> source_from_string(const std::string& s);

struct ArticleRecord {
  std::string article_id;
  Source source = Source::Synthetic;
  Date publication_date;
  std::string newspaper_name;
  std::string state_raw;
  std::string city_raw;
  std::string text;
  std::optional<double> ocr_quality;
};

// Dataset coverage bounds; records outside are rejected at validation.
inline constexpr int kMinYear = 1800;
inline constexpr int kMaxYear = 1967;

struct RecordError {
  std::size_t line = 0;  // 1-based input line, 0 when not line-addressable
  std::string article_id;
  std::string reason;
};

struct LoadResult {
  std::vector<ArticleRecord> records;
  std::vector<RecordError> errors;
};

enum class CorpusFormat { Jsonl, Csv };

// Reads a corpus file. Malformed lines and duplicate ids land in the error
// report; well-formed records are returned sorted by (publication_date,
// article_id). Throws FileNotFoundError.
LoadResult load_articles(const std::string& path, CorpusFormat format);

void save_articles(const std::string& path, const std::vector<ArticleRecord>& records);
void save_errors(const std::string& path, const std::vector<RecordError>& errors);

enum class RejectReason { EmptyText, DateOutOfRange, BadEncoding };
std::string to_string(RejectReason r);

// ArticleRecord with invariants enforced and whitespace normalized.
struct ValidatedArticle {
  ArticleRecord record;
};

std::variant<ValidatedArticle, RejectReason> validate_article(const ArticleRecord& rec);

// --- Synthetic corpus ------------------------------------------------------

struct SynthSpec {
  std::size_t n_articles = 0;
  std::size_t n_planted_events = 0;
  std::map<EventType, double> event_mix;  // proportions, sum to 1
  double noise_rate = 0.0;                // share of decoy articles
  std::uint64_t rng_seed = 0;
};

struct SynthBank {
  std::string bank_id;
  std::string name;
  std::string state;
  std::string city;
};

struct SynthResult {
  std::vector<ArticleRecord> articles;
  std::vector<ArticleEvent> ground_truth;
  std::vector<SynthBank> registry;  // banks referenced by planted articles
};

// Deterministic in rng_seed. Planted articles use the shipped keyword-rule
// vocabulary; decoys only contain excluded phrases. Throws InvalidSpecError.
SynthResult generate_synthetic(const SynthSpec& spec);

}  // namespace bankdist
