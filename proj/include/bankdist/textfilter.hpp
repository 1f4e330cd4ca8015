#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bankdist/corpus.hpp"

namespace bankdist {

enum class RuleId {
  BankRun,
  BankSuspension,
  BankReceivership,
  BankPanic,
  LargeWithdrawals,
  DistressPhrase,
  SuspensionRuleNotice,
};

std::string to_string(RuleId r);
std::optional<RuleId> rule_id_from_string(const std::string& s);

// A term is a token phrase; a trailing '*' in config marks every token of
// the phrase as prefix-matching ("suspen*" hits "suspended", "suspension").
struct Term {
  std::vector<std::string> tokens;
  bool prefix = false;
};

// Conjunction of disjunctions: the rule fires when every group has at least
// one matching alternative, after the rule's exclusion phrases are masked.
struct DetectionRule {
  RuleId rule_id;
  std::vector<std::vector<Term>> required_groups;
  std::vector<Term> exclusions;
  std::size_t window = 0;  // 0 = article-level co-occurrence
  std::string notes;
};

struct FilterConfig {
  std::vector<Term> removal_phrases;  // stripped by clean_text before matching
  std::vector<DetectionRule> rules;
};

// The shipped rule set (data/rules/default_rules.json mirrors this).
FilterConfig default_filter_config();
FilterConfig load_filter_config(const std::string& path);
void save_filter_config(const std::string& path, const FilterConfig& config);

struct MatchSpan {
  RuleId rule_id;
  std::size_t begin = 0;  // byte offsets into the cleaned text
  std::size_t end = 0;
};

struct FilterHit {
  std::string article_id;
  std::set<RuleId> matched_rules;
  std::vector<MatchSpan> matched_spans;
  std::string cleaned_text_hash;
};

// Case-folds, tokenizes on non-alphanumerics, and deletes the configured
// unrelated phrases, iterating to a fixpoint so the function is idempotent.
std::string clean_text(const std::string& text, const FilterConfig& config);

std::set<RuleId> match_rules(const std::string& cleaned_text, const FilterConfig& config);

// Full hit with spans for a single article (text is cleaned internally).
std::optional<FilterHit> screen_article(const ArticleRecord& article,
                                        const FilterConfig& config);

struct FilterResult {
  std::vector<FilterHit> hits;  // sorted by article_id
  double pass_rate = 0.0;
};

FilterResult filter_collection(const std::vector<ArticleRecord>& articles,
                               const FilterConfig& config, int jobs = 1);

void save_hits(const std::string& path, const std::vector<FilterHit>& hits);
std::vector<FilterHit> load_hits(const std::string& path);

}  // namespace bankdist
