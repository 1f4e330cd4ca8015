#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bankdist/corpus.hpp"
#include "bankdist/events.hpp"

namespace bankdist {

enum class LlmStage { QuickScreen, ExtractEvents, AnalyzeEpisode, ClassifyResponses, ClassifyNonfundamental };
std::string to_string(LlmStage s);

struct LlmConfig {
  std::string base_url;            // e.g. http://localhost:8080
  std::string model = "default";
  std::string auth_token_env;      // env var holding the API token
  double timeout_seconds = 30.0;
  int max_in_flight = 4;
  int max_attempts = 3;
  int backoff_initial_ms = 250;    // doubles per retry
  double temperature = 0.0;        // recorded in provenance
  std::string prompt_dir;          // directory with one prompt file per stage
  std::string audit_log_path;      // JSONL request/response audit when set
};

// Chat-completion-style client. Implementations must be shareable across
// worker threads; per-request state is isolated.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  // Returns the model's raw text response. Throws LlmUnavailableError on
  // transport failure (retries are the caller wrapper's job).
  virtual std::string complete(LlmStage stage, const std::string& input,
                               const std::string& idempotency_key) = 0;
};

// Offline client: maps fnv1a(stage + '\n' + input) to a canned response.
// Unknown digests throw SchemaViolationError, so CI can never silently
// fall through to a network call.
class MockLlmClient : public LlmClient {
 public:
  MockLlmClient() = default;
  explicit MockLlmClient(const std::string& fixtures_jsonl_path);
  void add_fixture(LlmStage stage, const std::string& input, std::string response);
  void add_fixture_digest(std::string digest, std::string response);
  static std::string digest(LlmStage stage, const std::string& input);

  std::string complete(LlmStage stage, const std::string& input,
                       const std::string& idempotency_key) override;

  // Concurrency instrumentation for tests.
  int max_observed_in_flight() const { return max_in_flight_seen_; }
  void set_simulated_latency_ms(int ms) { latency_ms_ = ms; }

 private:
  std::map<std::string, std::string> fixtures_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_seen_{0};
  int latency_ms_ = 0;
};

void save_mock_fixtures(const std::string& path,
                        const std::map<std::string, std::string>& digest_to_response);

// HTTP client for a chat-completions endpoint; auth token read from the
// configured env var at request time, never persisted.
std::unique_ptr<LlmClient> make_http_client(const LlmConfig& config);

// Retry/backoff wrapper used by every stage.
std::string complete_with_retry(LlmClient& client, const LlmConfig& config,
                                LlmStage stage, const std::string& input,
                                const std::string& idempotency_key);

// --- Stage results ---------------------------------------------------------

struct ScreenVerdict {
  bool keep = true;
  std::string discard_reason;  // foreign, fiction, hypothetical, tangential, ...
};

struct ExtractionResult {
  std::vector<ArticleEvent> events;
  std::vector<std::string> rejections;  // invalid items with reasons
};

struct ResponseFlags {
  bool accommodated_withdrawals = false;
  bool interbank_borrowing = false;
  bool public_signal = false;
  bool equity_injection = false;
  bool partial_suspension = false;
  bool full_suspension = false;
  bool examination = false;
  bool clearinghouse_involved = false;
};

enum class TriState { Yes, No, Unclear };
std::string to_string(TriState t);
std::optional<TriState> tristate_from_string(const std::string& s);

enum class EpisodeTypeHint {
  RunOnly,
  RunSuspensionReopening,
  RunSuspensionFailure,
  FailureWithoutRun,
  SuspensionOnly,
  Other,
};
std::string to_string(EpisodeTypeHint h);
std::optional<EpisodeTypeHint> episode_type_hint_from_string(const std::string& s);

struct EpisodeAnalysis {
  std::string episode_narrative;
  std::vector<ArticleEvent> reclassified_events;
  EpisodeTypeHint episode_type_hint = EpisodeTypeHint::Other;
  ResponseFlags response_flags;
  TriState nonfundamental = TriState::Unclear;
};

// --- Operations ------------------------------------------------------------

ScreenVerdict quick_screen(const ArticleRecord& article, LlmClient& client,
                           const LlmConfig& config);

ExtractionResult extract_events(const ArticleRecord& article, LlmClient& client,
                                const LlmConfig& config);

inline constexpr std::size_t kMaxEpisodeArticles = 25;

EpisodeAnalysis analyze_episode(const std::vector<ArticleRecord>& articles,
                                LlmClient& client, const LlmConfig& config);

ResponseFlags classify_responses(const std::vector<ArticleRecord>& articles,
                                 LlmClient& client, const LlmConfig& config);

TriState classify_nonfundamental(const std::vector<ArticleRecord>& articles,
                                 LlmClient& client, const LlmConfig& config);

// Optional second-opinion pass. Disagreement on the type hint or the
// nonfundamental call flags the episode for manual review instead of
// picking a winner.
struct DualAnalysis {
  EpisodeAnalysis primary;
  bool needs_review = false;
  std::string disagreement;  // which field diverged, empty when none
};

DualAnalysis analyze_episode_dual(const std::vector<ArticleRecord>& articles,
                                  LlmClient& primary, LlmClient& secondary,
                                  const LlmConfig& config);

// Bounded-concurrency fan-out over articles; results merged in article order.
// fn(index) runs on worker threads with at most config.max_in_flight active.
void parallel_for_bounded(std::size_t count, int max_in_flight,
                          const std::function<void(std::size_t)>& fn);

// Prompt assets (loaded from config.prompt_dir when set, else built-in).
std::string stage_prompt(LlmStage stage, const LlmConfig& config);
std::string render_article_input(const ArticleRecord& article);
std::string render_episode_input(const std::vector<ArticleRecord>& articles);

}  // namespace bankdist
