#include "doctest.h"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bankdist/errors.hpp"
#include "bankdist/llmgate.hpp"

using namespace bankdist;

namespace {

ArticleRecord article(const std::string& id, const std::string& iso_date,
                      const std::string& text) {
  ArticleRecord r;
  r.article_id = id;
  r.publication_date = *Date::parse(iso_date);
  r.newspaper_name = "Test Paper";
  r.state_raw = "Ohio";
  r.city_raw = "Cincinnati";
  r.text = text;
  return r;
}

const LlmConfig kCfg;

}  // namespace

TEST_CASE("mock client serves only known digests") {
  MockLlmClient mock;
  mock.add_fixture(LlmStage::QuickScreen, "hello", "{\"keep\": true}");
  CHECK(mock.complete(LlmStage::QuickScreen, "hello", "k") == "{\"keep\": true}");
  // Same input under a different stage has a different digest.
  CHECK_THROWS_AS(mock.complete(LlmStage::ExtractEvents, "hello", "k"),
                  SchemaViolationError);
  CHECK_THROWS_AS(mock.complete(LlmStage::QuickScreen, "other", "k"),
                  SchemaViolationError);
  CHECK(MockLlmClient::digest(LlmStage::QuickScreen, "hello") !=
        MockLlmClient::digest(LlmStage::ExtractEvents, "hello"));
}

TEST_CASE("fixtures round trip through JSONL") {
  const auto path =
      (std::filesystem::temp_directory_path() / "fixtures_rt.jsonl").string();
  const std::string d = MockLlmClient::digest(LlmStage::QuickScreen, "abc");
  save_mock_fixtures(path, {{d, "{\"keep\": false, \"discard_reason\": \"fiction\"}"}});
  MockLlmClient mock(path);
  CHECK(mock.complete(LlmStage::QuickScreen, "abc", "k") ==
        "{\"keep\": false, \"discard_reason\": \"fiction\"}");
  std::remove(path.c_str());
}

TEST_CASE("quick screen verdicts") {
  const auto a = article("q1", "1893-05-04", "A run on the bank.");
  MockLlmClient mock;
  mock.add_fixture(LlmStage::QuickScreen, render_article_input(a),
                   "{\"keep\": false}");
  auto v = quick_screen(a, mock, kCfg);
  CHECK_FALSE(v.keep);
  CHECK(v.discard_reason == "other");  // defaulted when absent

  // Empty text never reaches the model.
  MockLlmClient empty_mock;
  CHECK_THROWS_AS(quick_screen(article("q2", "1893-05-04", "   "), empty_mock, kCfg),
                  SchemaViolationError);

  // Malformed verdicts are schema violations.
  const auto b = article("q3", "1893-05-04", "text");
  MockLlmClient bad;
  bad.add_fixture(LlmStage::QuickScreen, render_article_input(b), "not json");
  CHECK_THROWS_AS(quick_screen(b, bad, kCfg), SchemaViolationError);
}

TEST_CASE("event extraction parses, validates, and rejects late dates") {
  const auto a = article("e1", "1893-05-04", "The bank suspended.");
  MockLlmClient mock;
  mock.add_fixture(
      LlmStage::ExtractEvents, render_article_input(a),
      R"({"events": [
        {"bank_name": "First National Bank", "state": "Ohio", "city": "Cincinnati",
         "event_type": "suspension", "event_date": "1893-05-03", "confidence": 0.9},
        {"bank_name": "Future Bank", "event_type": "run", "event_date": "1893-07-01"},
        {"bank_name": "Notice Bank", "event_type": "suspension", "event_date": "1893-05-10"}
      ]})");
  auto result = extract_events(a, mock, kCfg);
  REQUIRE(result.events.size() == 2);
  CHECK(result.events[0].bank_name_raw == "First National Bank");
  CHECK(result.events[0].event_type == EventType::Suspension);
  CHECK(result.events[0].article_id == "e1");
  REQUIRE(result.events[0].confidence);
  CHECK(*result.events[0].confidence == doctest::Approx(0.9));
  // Six days ahead is allowed (advance notice), two months is not.
  CHECK(result.events[1].bank_name_raw == "Notice Bank");
  REQUIRE(result.rejections.size() == 1);
  CHECK(result.rejections[0].find("Future Bank") != std::string::npos);
}

TEST_CASE("extraction schema violations throw") {
  const auto a = article("e2", "1893-05-04", "text");
  const auto check_throws = [&](const std::string& response) {
    MockLlmClient mock;
    mock.add_fixture(LlmStage::ExtractEvents, render_article_input(a), response);
    CHECK_THROWS_AS(extract_events(a, mock, kCfg), SchemaViolationError);
  };
  check_throws("{}");
  check_throws(R"({"events": [{"event_type": "run", "event_date": "1893-05-01"}]})");
  check_throws(
      R"({"events": [{"bank_name": "B", "event_type": "stampede", "event_date": "1893-05-01"}]})");
  check_throws(
      R"({"events": [{"bank_name": "B", "event_type": "run", "event_date": "soon"}]})");
  check_throws(
      R"({"events": [{"bank_name": "B", "event_type": "run", "event_date": "1893-05-01", "confidence": 1.5}]})");
}

TEST_CASE("episode analysis enforces the article cap") {
  MockLlmClient mock;
  CHECK_THROWS_AS(analyze_episode({}, mock, kCfg), DataError);
  std::vector<ArticleRecord> too_many;
  for (int i = 0; i < 26; ++i) {
    too_many.push_back(article("t" + std::to_string(i), "1893-05-04", "x"));
  }
  CHECK_THROWS_AS(analyze_episode(too_many, mock, kCfg), TooManyArticlesError);
}

namespace {

const char* kAnalysisResponse = R"({
  "narrative": "A run led to suspension and reopening.",
  "events": [{"bank_name": "First National Bank", "event_type": "run",
              "event_date": "1893-05-03", "article_id": "p1"}],
  "episode_type_hint": "run_suspension_reopening",
  "responses": {"accommodated_withdrawals": true, "interbank_borrowing": false,
                "public_signal": true, "equity_injection": false,
                "partial_suspension": false, "full_suspension": true,
                "examination": false, "clearinghouse_involved": true},
  "nonfundamental": "no"
})";

}  // namespace

TEST_CASE("episode analysis parses the joint response") {
  const std::vector<ArticleRecord> articles = {
      article("p1", "1893-05-04", "A run on the bank."),
      article("p2", "1893-05-20", "The bank reopened.")};
  MockLlmClient mock;
  mock.add_fixture(LlmStage::AnalyzeEpisode, render_episode_input(articles),
                   kAnalysisResponse);
  auto analysis = analyze_episode(articles, mock, kCfg);
  CHECK(analysis.episode_type_hint == EpisodeTypeHint::RunSuspensionReopening);
  REQUIRE(analysis.reclassified_events.size() == 1);
  CHECK(analysis.reclassified_events[0].article_id == "p1");
  CHECK(analysis.response_flags.accommodated_withdrawals);
  CHECK(analysis.response_flags.full_suspension);
  CHECK_FALSE(analysis.response_flags.examination);
  CHECK(analysis.nonfundamental == TriState::No);
  CHECK(analysis.episode_narrative.find("run") != std::string::npos);
}

TEST_CASE("dual analysis flags disagreement instead of picking a winner") {
  const std::vector<ArticleRecord> articles = {
      article("d1", "1893-05-04", "A run on the bank.")};
  const std::string input = render_episode_input(articles);

  std::string second = kAnalysisResponse;
  MockLlmClient a, b, c;
  a.add_fixture(LlmStage::AnalyzeEpisode, input, kAnalysisResponse);
  b.add_fixture(LlmStage::AnalyzeEpisode, input, kAnalysisResponse);
  const auto agree = analyze_episode_dual(articles, a, b, kCfg);
  CHECK_FALSE(agree.needs_review);
  CHECK(agree.disagreement.empty());

  const auto pos = second.find("run_suspension_reopening");
  second.replace(pos, std::string("run_suspension_reopening").size(), "run_only");
  c.add_fixture(LlmStage::AnalyzeEpisode, input, second);
  const auto disagree = analyze_episode_dual(articles, a, c, kCfg);
  CHECK(disagree.needs_review);
  CHECK(disagree.disagreement == "episode_type_hint");
  // Primary verdict is preserved.
  CHECK(disagree.primary.episode_type_hint == EpisodeTypeHint::RunSuspensionReopening);
}

namespace {

// Client that fails a fixed number of times before succeeding.
class FlakyClient : public LlmClient {
 public:
  FlakyClient(int failures, std::string response)
      : failures_(failures), response_(std::move(response)) {}
  std::string complete(LlmStage, const std::string&, const std::string&) override {
    ++calls;
    if (calls <= failures_) throw LlmUnavailableError("transient");
    return response_;
  }
  int calls = 0;

 private:
  int failures_;
  std::string response_;
};

}  // namespace

TEST_CASE("retry wrapper with exponential backoff") {
  LlmConfig cfg;
  cfg.max_attempts = 3;
  cfg.backoff_initial_ms = 1;

  FlakyClient two_failures(2, "ok");
  CHECK(complete_with_retry(two_failures, cfg, LlmStage::QuickScreen, "in", "k") ==
        "ok");
  CHECK(two_failures.calls == 3);

  FlakyClient three_failures(3, "ok");
  CHECK_THROWS_AS(
      complete_with_retry(three_failures, cfg, LlmStage::QuickScreen, "in", "k"),
      LlmUnavailableError);
  CHECK(three_failures.calls == 3);
}

TEST_CASE("audit log records requests without any secrets") {
  const auto path =
      (std::filesystem::temp_directory_path() / "audit.jsonl").string();
  std::remove(path.c_str());
  LlmConfig cfg;
  cfg.audit_log_path = path;
  MockLlmClient mock;
  mock.add_fixture(LlmStage::QuickScreen, "the input", "{\"keep\": true}");
  complete_with_retry(mock, cfg, LlmStage::QuickScreen, "the input", "key-1");

  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line.find("quick_screen") != std::string::npos);
  CHECK(line.find("key-1") != std::string::npos);
  CHECK(line.find("input_digest") != std::string::npos);
  // The raw input itself is digested, not stored.
  CHECK(line.find("the input") == std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("bounded fan-out honors the concurrency cap and propagates errors") {
  MockLlmClient mock;
  mock.set_simulated_latency_ms(3);
  for (int i = 0; i < 40; ++i) {
    mock.add_fixture(LlmStage::QuickScreen, "input " + std::to_string(i), "{}");
  }
  std::atomic<int> done{0};
  parallel_for_bounded(40, 4, [&](std::size_t i) {
    mock.complete(LlmStage::QuickScreen, "input " + std::to_string(i), "k");
    done.fetch_add(1);
  });
  CHECK(done.load() == 40);
  CHECK(mock.max_observed_in_flight() <= 4);
  CHECK(mock.max_observed_in_flight() >= 1);

  CHECK_THROWS_AS(parallel_for_bounded(
                      10, 4,
                      [&](std::size_t i) {
                        if (i == 5) throw DataError("boom");
                      }),
                  DataError);
}

TEST_CASE("prompt files override the built-in text") {
  LlmConfig cfg;
  CHECK(stage_prompt(LlmStage::QuickScreen, cfg).find("JSON") != std::string::npos);

  const auto dir = std::filesystem::temp_directory_path() / "prompts_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "quick_screen.txt");
    out << "custom prompt text";
  }
  cfg.prompt_dir = dir.string();
  CHECK(stage_prompt(LlmStage::QuickScreen, cfg) == "custom prompt text");
  // Missing per-stage file is an error rather than a silent fallback.
  CHECK_THROWS_AS(stage_prompt(LlmStage::ExtractEvents, cfg), FileNotFoundError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("shipped prompt files match the built-ins") {
  LlmConfig builtin;
  LlmConfig shipped;
  shipped.prompt_dir = "data/prompts";
  if (!std::filesystem::exists("data/prompts/quick_screen.txt")) return;
  for (auto stage : {LlmStage::QuickScreen, LlmStage::ExtractEvents,
                     LlmStage::AnalyzeEpisode, LlmStage::ClassifyResponses,
                     LlmStage::ClassifyNonfundamental}) {
    CHECK(stage_prompt(stage, shipped) == stage_prompt(stage, builtin));
  }
}
