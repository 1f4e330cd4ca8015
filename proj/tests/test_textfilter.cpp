#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "bankdist/corpus.hpp"
#include "bankdist/errors.hpp"
#include "bankdist/textfilter.hpp"

using namespace bankdist;

namespace {

ArticleRecord article(const std::string& id, const std::string& text) {
  ArticleRecord r;
  r.article_id = id;
  r.publication_date = *Date::parse("1893-05-04");
  r.text = text;
  return r;
}

}  // namespace

TEST_CASE("clean_text strips unrelated phrases and is idempotent") {
  const auto cfg = default_filter_config();
  const std::string cleaned =
      clean_text("Fishermen sat on the river bank near the snow bank.", cfg);
  CHECK(cleaned.find("bank") == std::string::npos);

  // Removal can expose a new occurrence; cleaning must reach a fixpoint.
  const std::string tricky = clean_text("river river bank bank", cfg);
  CHECK(tricky == clean_text(tricky, cfg));
  CHECK(tricky.find("river bank") == std::string::npos);

  const std::string kept = clean_text("A run on the bank began.", cfg);
  CHECK(kept == "a run on the bank began");
  CHECK(clean_text(kept, cfg) == kept);
}

TEST_CASE("run rule fires on financial runs only") {
  const auto cfg = default_filter_config();
  CHECK(match_rules(clean_text("A run on the First National Bank began.", cfg), cfg)
            .count(RuleId::BankRun) == 1);
  CHECK(match_rules(clean_text("Heavy runs on the banks of the city.", cfg), cfg)
            .count(RuleId::BankRun) == 1);
  // The bank word sits inside a removal phrase.
  CHECK(match_rules(clean_text("The river bank run was a fine race.", cfg), cfg)
            .empty());
  // Exclusion masks the running tokens.
  CHECK(match_rules(
            clean_text("The bank was quiet and trains are running on time.", cfg),
            cfg)
            .count(RuleId::BankRun) == 0);
}

TEST_CASE("suspension receivership panic and withdrawal rules") {
  const auto cfg = default_filter_config();
  const auto fire = [&](const std::string& text) {
    return match_rules(clean_text(text, cfg), cfg);
  };
  CHECK(fire("The Commercial Bank suspended payment.").count(RuleId::BankSuspension));
  CHECK(fire("A suspension of production at the mill.").empty());
  CHECK(fire("A receiver was appointed for the bank.").count(RuleId::BankReceivership));
  CHECK(fire("The bank made an assignment; the assignee took charge of the bank.")
            .count(RuleId::BankReceivership));
  CHECK(fire("Panic among depositors spread.").count(RuleId::BankPanic));
  CHECK(fire("Large withdrawals of deposits were reported.")
            .count(RuleId::LargeWithdrawals));
  CHECK(fire("The bank invoked the sixty days notice on deposits.")
            .count(RuleId::SuspensionRuleNotice));
  CHECK(fire("The trust company closed its doors.").count(RuleId::DistressPhrase));
  CHECK(fire("The weather was fair and crops were good.").empty());
}

TEST_CASE("synthetic planted articles pass and decoys fail the screen") {
  SynthSpec spec;
  spec.n_articles = 120;
  spec.n_planted_events = 30;
  spec.noise_rate = 0.5;
  spec.rng_seed = 11;
  spec.event_mix = {{EventType::Run, 0.3},        {EventType::Suspension, 0.2},
                    {EventType::Failure, 0.2},    {EventType::Receivership, 0.1},
                    {EventType::Reopening, 0.1},  {EventType::Other, 0.1}};
  const auto synth = generate_synthetic(spec);
  const auto cfg = default_filter_config();
  const auto result = filter_collection(synth.articles, cfg, 1);

  std::set<std::string> hit_ids;
  for (const auto& h : result.hits) hit_ids.insert(h.article_id);
  for (const auto& ev : synth.ground_truth) {
    CHECK(hit_ids.count(ev.article_id) == 1);
  }
  // Exactly the planted articles pass; decoys and filler do not.
  CHECK(result.hits.size() == synth.ground_truth.size());
}

TEST_CASE("parallel screening matches serial and sorts hits") {
  SynthSpec spec;
  spec.n_articles = 300;
  spec.n_planted_events = 80;
  spec.noise_rate = 0.3;
  spec.rng_seed = 5;
  const auto synth = generate_synthetic(spec);
  const auto cfg = default_filter_config();
  const auto serial = filter_collection(synth.articles, cfg, 1);
  const auto parallel = filter_collection(synth.articles, cfg, 4);
  REQUIRE(serial.hits.size() == parallel.hits.size());
  CHECK(serial.pass_rate == parallel.pass_rate);
  for (std::size_t i = 0; i < serial.hits.size(); ++i) {
    CHECK(serial.hits[i].article_id == parallel.hits[i].article_id);
    CHECK(serial.hits[i].matched_rules == parallel.hits[i].matched_rules);
    CHECK(serial.hits[i].cleaned_text_hash == parallel.hits[i].cleaned_text_hash);
    if (i) CHECK(serial.hits[i - 1].article_id < serial.hits[i].article_id);
  }
}

TEST_CASE("match spans index into the cleaned text") {
  const auto cfg = default_filter_config();
  const auto hit = screen_article(article("s1", "A run on the bank began."), cfg);
  REQUIRE(hit);
  const std::string cleaned = clean_text("A run on the bank began.", cfg);
  REQUIRE_FALSE(hit->matched_spans.empty());
  for (const auto& span : hit->matched_spans) {
    REQUIRE(span.end <= cleaned.size());
    REQUIRE(span.begin < span.end);
    const std::string frag = cleaned.substr(span.begin, span.end - span.begin);
    CHECK((frag == "bank" || frag == "run"));
  }
}

TEST_CASE("window constraint requires nearby groups") {
  DetectionRule r;
  r.rule_id = RuleId::BankRun;
  r.required_groups = {{Term{{"bank"}, false}}, {Term{{"run"}, false}}};
  r.window = 3;
  FilterConfig cfg;
  cfg.rules.push_back(r);

  CHECK(match_rules("a run on the bank", cfg).count(RuleId::BankRun) == 1);
  CHECK(match_rules("the bank stood for years and years and years then a run",
                    cfg)
            .empty());
  // Any anchor occurrence within range counts.
  CHECK(match_rules("bank far far far far far far bank run", cfg)
            .count(RuleId::BankRun) == 1);
}

TEST_CASE("rule config round trips through JSON") {
  const auto cfg = default_filter_config();
  const auto path =
      (std::filesystem::temp_directory_path() / "rules_rt.json").string();
  save_filter_config(path, cfg);
  const auto loaded = load_filter_config(path);
  REQUIRE(loaded.rules.size() == cfg.rules.size());
  REQUIRE(loaded.removal_phrases.size() == cfg.removal_phrases.size());

  const char* samples[] = {
      "A run on the bank began.",
      "The bank suspended payment.",
      "Fishermen on the river bank.",
      "Large withdrawals of deposits were made.",
      "The trust company refused payment to excited depositors.",
  };
  for (const char* s : samples) {
    CHECK(match_rules(clean_text(s, cfg), cfg) ==
          match_rules(clean_text(s, loaded), loaded));
  }
  std::remove(path.c_str());
}

TEST_CASE("hits round trip through JSONL") {
  const auto cfg = default_filter_config();
  std::vector<ArticleRecord> articles = {
      article("h1", "A run on the bank began."),
      article("h2", "The bank suspended payment amid panic."),
  };
  const auto result = filter_collection(articles, cfg, 1);
  const auto path =
      (std::filesystem::temp_directory_path() / "hits_rt.jsonl").string();
  save_hits(path, result.hits);
  const auto loaded = load_hits(path);
  REQUIRE(loaded.size() == result.hits.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].article_id == result.hits[i].article_id);
    CHECK(loaded[i].matched_rules == result.hits[i].matched_rules);
    CHECK(loaded[i].matched_spans.size() == result.hits[i].matched_spans.size());
    CHECK(loaded[i].cleaned_text_hash == result.hits[i].cleaned_text_hash);
  }
  std::remove(path.c_str());
}
