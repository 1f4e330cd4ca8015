#include "bankdist/llmgate.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#if __has_include(<httplib.h>)
#define BANKDIST_HAVE_HTTPLIB 1
#include <httplib.h>
#endif

#include "json.hpp"

#include "bankdist/errors.hpp"
#include "bankdist/util.hpp"

using json = nlohmann::json;

namespace bankdist {

std::string to_string(LlmStage s) {
  switch (s) {
    case LlmStage::QuickScreen: return "quick_screen";
    case LlmStage::ExtractEvents: return "extract_events";
    case LlmStage::AnalyzeEpisode: return "analyze_episode";
    case LlmStage::ClassifyResponses: return "classify_responses";
    case LlmStage::ClassifyNonfundamental: return "classify_nonfundamental";
  }
  return "unknown";
}

std::string to_string(TriState t) {
  switch (t) {
    case TriState::Yes: return "yes";
    case TriState::No: return "no";
    case TriState::Unclear: return "unclear";
  }
  return "unclear";
}

std::optional<TriState> tristate_from_string(const std::string& s) {
  if (s == "yes") return TriState::Yes;
  if (s == "no") return TriState::No;
  if (s == "unclear") return TriState::Unclear;
  return std::nullopt;
}

std::string to_string(EpisodeTypeHint h) {
  switch (h) {
    case EpisodeTypeHint::RunOnly: return "run_only";
    case EpisodeTypeHint::RunSuspensionReopening: return "run_suspension_reopening";
    case EpisodeTypeHint::RunSuspensionFailure: return "run_suspension_failure";
    case EpisodeTypeHint::FailureWithoutRun: return "failure_without_run";
    case EpisodeTypeHint::SuspensionOnly: return "suspension_only";
    case EpisodeTypeHint::Other: return "other";
  }
  return "other";
}

std::optional<EpisodeTypeHint> episode_type_hint_from_string(const std::string& s) {
  if (s == "run_only") return EpisodeTypeHint::RunOnly;
  if (s == "run_suspension_reopening") return EpisodeTypeHint::RunSuspensionReopening;
  if (s == "run_suspension_failure") return EpisodeTypeHint::RunSuspensionFailure;
  if (s == "failure_without_run") return EpisodeTypeHint::FailureWithoutRun;
  if (s == "suspension_only") return EpisodeTypeHint::SuspensionOnly;
  if (s == "other") return EpisodeTypeHint::Other;
  return std::nullopt;
}

// --- Mock client -----------------------------------------------------------

std::string MockLlmClient::digest(LlmStage stage, const std::string& input) {
  return fnv1a_hex(to_string(stage) + "\n" + input);
}

MockLlmClient::MockLlmClient(const std::string& fixtures_jsonl_path) {
  std::ifstream in(fixtures_jsonl_path);
  if (!in) throw FileNotFoundError(fixtures_jsonl_path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.contains("digest") || !j.contains("response")) {
      throw DataError("bad fixture line " + std::to_string(lineno) + " in " +
                      fixtures_jsonl_path);
    }
    fixtures_[j["digest"].get<std::string>()] = j["response"].get<std::string>();
  }
}

void MockLlmClient::add_fixture(LlmStage stage, const std::string& input,
                                std::string response) {
  fixtures_[digest(stage, input)] = std::move(response);
}

void MockLlmClient::add_fixture_digest(std::string d, std::string response) {
  fixtures_[std::move(d)] = std::move(response);
}

std::string MockLlmClient::complete(LlmStage stage, const std::string& input,
                                    const std::string&) {
  const int now = in_flight_.fetch_add(1) + 1;
  int seen = max_in_flight_seen_.load();
  while (now > seen && !max_in_flight_seen_.compare_exchange_weak(seen, now)) {
  }
  if (latency_ms_ > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
  }
  const auto it = fixtures_.find(digest(stage, input));
  in_flight_.fetch_sub(1);
  if (it == fixtures_.end()) {
    throw SchemaViolationError("fixture", "no canned response for digest " +
                                              digest(stage, input) + " (stage " +
                                              to_string(stage) + ")");
  }
  return it->second;
}

void save_mock_fixtures(const std::string& path,
                        const std::map<std::string, std::string>& digest_to_response) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& [d, r] : digest_to_response) {
    out << json{{"digest", d}, {"response", r}}.dump() << "\n";
  }
}

// --- HTTP client -----------------------------------------------------------

namespace {

class HttpLlmClient : public LlmClient {
 public:
  explicit HttpLlmClient(LlmConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw ConfigError("llm base_url is empty");
  }

  std::string complete(LlmStage stage, const std::string& input,
                       const std::string& idempotency_key) override;

 private:
  LlmConfig config_;
};

}  // namespace

std::unique_ptr<LlmClient> make_http_client(const LlmConfig& config) {
  return std::make_unique<HttpLlmClient>(config);
}

std::string complete_with_retry(LlmClient& client, const LlmConfig& config,
                                LlmStage stage, const std::string& input,
                                const std::string& idempotency_key) {
  const int attempts = std::max(1, config.max_attempts);
  int backoff_ms = std::max(0, config.backoff_initial_ms);
  std::string response;
  for (int attempt = 1;; ++attempt) {
    try {
      response = client.complete(stage, input, idempotency_key);
      break;
    } catch (const LlmUnavailableError&) {
      if (attempt >= attempts) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms *= 2;
    }
  }
  if (!config.audit_log_path.empty()) {
    static std::mutex audit_mutex;
    std::lock_guard<std::mutex> lock(audit_mutex);
    std::ofstream out(config.audit_log_path, std::ios::app);
    if (out) {
      out << json{{"stage", to_string(stage)},
                  {"idempotency_key", idempotency_key},
                  {"model", config.model},
                  {"temperature", config.temperature},
                  {"input_digest", fnv1a_hex(input)},
                  {"response", response}}
                 .dump()
          << "\n";
    }
  }
  return response;
}

void parallel_for_bounded(std::size_t count, int max_in_flight,
                          const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, max_in_flight)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (first_error) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// --- Prompts and input rendering -------------------------------------------

namespace {

const char* builtin_prompt(LlmStage stage) {
  switch (stage) {
    case LlmStage::QuickScreen:
      return
          "You review 19th/early-20th century US newspaper articles flagged by a "
          "keyword filter for possible bank distress. Decide whether the article "
          "genuinely concerns distress (run, suspension, failure, receivership, "
          "reopening) at a real, domestic US bank. Discard articles about foreign "
          "banks, fiction, hypothetical or figurative uses, and tangential "
          "mentions. Reply with JSON only:\n"
          "{\"keep\": true|false, \"discard_reason\": \"foreign|fiction|"
          "hypothetical|tangential|other|\"}\n";
    case LlmStage::ExtractEvents:
      return
          "Extract every bank-distress event the article asserts. For each event "
          "report the bank name as printed, the state and city if given, the "
          "event type, and the event date (fall back to the publication date and "
          "mark precision \"inferred\" when no date is stated). Reply with JSON "
          "only:\n"
          "{\"events\": [{\"bank_name\": str, \"state\": str, \"city\": str, "
          "\"event_type\": \"run|suspension|partial_suspension|failure|reopening|"
          "receivership|other\", \"event_date\": \"YYYY-MM-DD\", "
          "\"date_precision\": \"day|month|year|inferred\", \"confidence\": "
          "0.0-1.0}]}\n";
    case LlmStage::AnalyzeEpisode:
      return
          "The articles below all concern one bank's distress episode. Read them "
          "jointly, write a short narrative, reclassify every event with the "
          "benefit of the full context, and label the episode. Reply with JSON "
          "only:\n"
          "{\"narrative\": str, \"events\": [same schema as extraction], "
          "\"episode_type_hint\": \"run_only|run_suspension_reopening|"
          "run_suspension_failure|failure_without_run|suspension_only|other\", "
          "\"responses\": {\"accommodated_withdrawals\": bool, "
          "\"interbank_borrowing\": bool, \"public_signal\": bool, "
          "\"equity_injection\": bool, \"partial_suspension\": bool, "
          "\"full_suspension\": bool, \"examination\": bool, "
          "\"clearinghouse_involved\": bool}, "
          "\"nonfundamental\": \"yes|no|unclear\"}\n";
    case LlmStage::ClassifyResponses:
      return
          "Identify the measures the bank or third parties took in response to "
          "the distress described below. Flags are independent; several may hold "
          "at once, or none. Reply with JSON only:\n"
          "{\"accommodated_withdrawals\": bool, \"interbank_borrowing\": bool, "
          "\"public_signal\": bool, \"equity_injection\": bool, "
          "\"partial_suspension\": bool, \"full_suspension\": bool, "
          "\"examination\": bool, \"clearinghouse_involved\": bool}\n";
    case LlmStage::ClassifyNonfundamental:
      return
          "Decide whether the run described below was triggered by a specific, "
          "discrete piece of misinformation or confusion that the source "
          "explicitly marks as false, mistaken, or later corrected. Answer "
          "\"no\" when the run is attributed to news about the bank itself, "
          "another bank's distress, systemic panic, or a local economic shock. "
          "Answer \"unclear\" when the trigger is ambiguous. Reply with JSON "
          "only:\n"
          "{\"nonfundamental\": \"yes|no|unclear\"}\n";
  }
  return "";
}

const char* prompt_filename(LlmStage stage) {
  switch (stage) {
    case LlmStage::QuickScreen: return "quick_screen.txt";
    case LlmStage::ExtractEvents: return "extract_events.txt";
    case LlmStage::AnalyzeEpisode: return "analyze_episode.txt";
    case LlmStage::ClassifyResponses: return "classify_responses.txt";
    case LlmStage::ClassifyNonfundamental: return "classify_nonfundamental.txt";
  }
  return "prompt.txt";
}

json article_to_json(const ArticleRecord& a) {
  json j{{"article_id", a.article_id},
         {"date", a.publication_date.to_iso()},
         {"newspaper", a.newspaper_name},
         {"state", a.state_raw},
         {"city", a.city_raw},
         {"text", a.text}};
  return j;
}

json parse_response(const std::string& response) {
  json j = json::parse(response, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw SchemaViolationError("response", "not a JSON object");
  }
  return j;
}

std::string require_string(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw SchemaViolationError(field, "missing or not a string");
  }
  return j[field].get<std::string>();
}

bool require_bool(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_boolean()) {
    throw SchemaViolationError(field, "missing or not a boolean");
  }
  return j[field].get<bool>();
}

ResponseFlags parse_response_flags(const json& j) {
  ResponseFlags f;
  f.accommodated_withdrawals = require_bool(j, "accommodated_withdrawals");
  f.interbank_borrowing = require_bool(j, "interbank_borrowing");
  f.public_signal = require_bool(j, "public_signal");
  f.equity_injection = require_bool(j, "equity_injection");
  f.partial_suspension = require_bool(j, "partial_suspension");
  f.full_suspension = require_bool(j, "full_suspension");
  f.examination = require_bool(j, "examination");
  f.clearinghouse_involved = require_bool(j, "clearinghouse_involved");
  return f;
}

// Parses one extracted event item. Structural problems throw; semantic
// invariant violations come back as a rejection reason instead.
std::optional<ArticleEvent> parse_event_item(const json& item,
                                             const std::string& article_id,
                                             const Date& publication_date,
                                             std::vector<std::string>& rejections) {
  if (!item.is_object()) throw SchemaViolationError("events", "item is not an object");
  ArticleEvent ev;
  ev.article_id = article_id;
  ev.bank_name_raw = require_string(item, "bank_name");
  ev.state_raw = item.value("state", std::string{});
  ev.city_raw = item.value("city", std::string{});
  const std::string type_str = require_string(item, "event_type");
  const auto type = event_type_from_string(type_str);
  if (!type) throw SchemaViolationError("event_type", "unknown value '" + type_str + "'");
  ev.event_type = *type;
  const std::string date_str = require_string(item, "event_date");
  const auto date = Date::parse(date_str);
  if (!date) throw SchemaViolationError("event_date", "unparseable '" + date_str + "'");
  ev.event_date = *date;
  ev.date_precision = date->precision;
  if (item.contains("date_precision")) {
    const auto p = precision_from_string(item["date_precision"].get<std::string>());
    if (!p) throw SchemaViolationError("date_precision", "unknown value");
    ev.date_precision = *p;
  }
  if (item.contains("confidence")) {
    if (!item["confidence"].is_number()) {
      throw SchemaViolationError("confidence", "not a number");
    }
    const double c = item["confidence"].get<double>();
    if (c < 0.0 || c > 1.0) throw SchemaViolationError("confidence", "outside [0,1]");
    ev.confidence = c;
  }
  // News reports events at or before publication; a week of slack covers
  // advance notices ("will suspend on Monday").
  if (ev.event_date.to_days() > publication_date.to_days() + 7) {
    rejections.push_back(ev.bank_name_raw + ": event_date " + ev.event_date.to_iso() +
                         " more than 7 days after publication " +
                         publication_date.to_iso());
    return std::nullopt;
  }
  return ev;
}

}  // namespace

std::string stage_prompt(LlmStage stage, const LlmConfig& config) {
  if (!config.prompt_dir.empty()) {
    const std::string path = config.prompt_dir + "/" + prompt_filename(stage);
    std::ifstream in(path);
    if (!in) throw FileNotFoundError(path);
    std::string content((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
    return content;
  }
  return builtin_prompt(stage);
}

std::string render_article_input(const ArticleRecord& article) {
  return article_to_json(article).dump();
}

std::string render_episode_input(const std::vector<ArticleRecord>& articles) {
  json arr = json::array();
  for (const auto& a : articles) arr.push_back(article_to_json(a));
  return json{{"articles", arr}}.dump();
}

// --- HTTP transport --------------------------------------------------------

std::string HttpLlmClient::complete(LlmStage stage, const std::string& input,
                                    const std::string& idempotency_key) {
  // Header-only client pulled in here so the rest of the TU stays light.
  (void)idempotency_key;
  json body{{"model", config_.model},
            {"temperature", config_.temperature},
            {"messages",
             json::array({json{{"role", "system"}, {"content", stage_prompt(stage, config_)}},
                          json{{"role", "user"}, {"content", input}}})}};
  std::string token;
  if (!config_.auth_token_env.empty()) {
    if (const char* t = std::getenv(config_.auth_token_env.c_str())) token = t;
  }
  const std::string payload = body.dump();
  const std::string response_text = [&] {
#ifdef BANKDIST_HAVE_HTTPLIB
    httplib::Client cli(config_.base_url);
    cli.set_read_timeout(std::chrono::milliseconds(
        static_cast<int>(config_.timeout_seconds * 1000)));
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    headers.emplace("Idempotency-Key", idempotency_key);
    auto res = cli.Post("/v1/chat/completions", headers, payload, "application/json");
    if (!res || res->status < 200 || res->status >= 300) {
      throw LlmUnavailableError("llm endpoint " + config_.base_url + " failed" +
                                (res ? " with status " + std::to_string(res->status)
                                     : " (no response)"));
    }
    return res->body;
#else
    (void)payload;
    throw LlmUnavailableError("built without HTTP support; use the mock client");
#endif
  }();
  json j = json::parse(response_text, nullptr, false);
  if (j.is_discarded() || !j.contains("choices") || j["choices"].empty()) {
    throw SchemaViolationError("choices", "malformed completion envelope");
  }
  return j["choices"][0]["message"]["content"].get<std::string>();
}

// --- Stage operations ------------------------------------------------------

ScreenVerdict quick_screen(const ArticleRecord& article, LlmClient& client,
                           const LlmConfig& config) {
  if (trim(article.text).empty()) {
    throw SchemaViolationError("text", "empty article text, nothing to screen");
  }
  const std::string input = render_article_input(article);
  const std::string raw = complete_with_retry(client, config, LlmStage::QuickScreen,
                                              input, "quick_screen:" + article.article_id);
  const json j = parse_response(raw);
  ScreenVerdict v;
  v.keep = require_bool(j, "keep");
  v.discard_reason = j.value("discard_reason", std::string{});
  if (!v.keep && v.discard_reason.empty()) v.discard_reason = "other";
  return v;
}

ExtractionResult extract_events(const ArticleRecord& article, LlmClient& client,
                                const LlmConfig& config) {
  const std::string input = render_article_input(article);
  const std::string raw =
      complete_with_retry(client, config, LlmStage::ExtractEvents, input,
                          "extract_events:" + article.article_id);
  const json j = parse_response(raw);
  if (!j.contains("events") || !j["events"].is_array()) {
    throw SchemaViolationError("events", "missing or not an array");
  }
  ExtractionResult result;
  for (const auto& item : j["events"]) {
    if (auto ev = parse_event_item(item, article.article_id,
                                   article.publication_date, result.rejections)) {
      result.events.push_back(std::move(*ev));
    }
  }
  return result;
}

namespace {

std::string episode_key(const std::vector<ArticleRecord>& articles) {
  std::string ids;
  for (const auto& a : articles) {
    ids += a.article_id;
    ids += ',';
  }
  return fnv1a_hex(ids);
}

}  // namespace

EpisodeAnalysis analyze_episode(const std::vector<ArticleRecord>& articles,
                                LlmClient& client, const LlmConfig& config) {
  if (articles.empty()) throw DataError("analyze_episode needs at least one article");
  if (articles.size() > kMaxEpisodeArticles) {
    throw TooManyArticlesError(articles.size());
  }
  const std::string input = render_episode_input(articles);
  const std::string raw =
      complete_with_retry(client, config, LlmStage::AnalyzeEpisode, input,
                          "analyze_episode:" + episode_key(articles));
  const json j = parse_response(raw);
  EpisodeAnalysis out;
  out.episode_narrative = require_string(j, "narrative");
  if (!j.contains("events") || !j["events"].is_array()) {
    throw SchemaViolationError("events", "missing or not an array");
  }
  // Event dates in the joint pass are validated against the latest
  // publication date in the bundle.
  Date latest = articles.front().publication_date;
  std::map<std::string, Date> pub_by_id;
  for (const auto& a : articles) {
    pub_by_id[a.article_id] = a.publication_date;
    if (a.publication_date > latest) latest = a.publication_date;
  }
  std::vector<std::string> rejections;
  for (const auto& item : j["events"]) {
    std::string article_id = item.is_object()
                                 ? item.value("article_id", articles.front().article_id)
                                 : articles.front().article_id;
    const auto it = pub_by_id.find(article_id);
    const Date pub = it != pub_by_id.end() ? it->second : latest;
    if (auto ev = parse_event_item(item, article_id, pub, rejections)) {
      out.reclassified_events.push_back(std::move(*ev));
    }
  }
  const std::string hint = require_string(j, "episode_type_hint");
  const auto parsed_hint = episode_type_hint_from_string(hint);
  if (!parsed_hint) {
    throw SchemaViolationError("episode_type_hint", "unknown value '" + hint + "'");
  }
  out.episode_type_hint = *parsed_hint;
  if (!j.contains("responses") || !j["responses"].is_object()) {
    throw SchemaViolationError("responses", "missing or not an object");
  }
  out.response_flags = parse_response_flags(j["responses"]);
  const auto nf = tristate_from_string(require_string(j, "nonfundamental"));
  if (!nf) throw SchemaViolationError("nonfundamental", "unknown value");
  out.nonfundamental = *nf;
  return out;
}

ResponseFlags classify_responses(const std::vector<ArticleRecord>& articles,
                                 LlmClient& client, const LlmConfig& config) {
  if (articles.empty()) throw DataError("classify_responses needs at least one article");
  const std::string input = render_episode_input(articles);
  const std::string raw =
      complete_with_retry(client, config, LlmStage::ClassifyResponses, input,
                          "classify_responses:" + episode_key(articles));
  return parse_response_flags(parse_response(raw));
}

TriState classify_nonfundamental(const std::vector<ArticleRecord>& articles,
                                 LlmClient& client, const LlmConfig& config) {
  if (articles.empty()) {
    throw DataError("classify_nonfundamental needs at least one article");
  }
  const std::string input = render_episode_input(articles);
  const std::string raw =
      complete_with_retry(client, config, LlmStage::ClassifyNonfundamental, input,
                          "classify_nonfundamental:" + episode_key(articles));
  const json j = parse_response(raw);
  const auto nf = tristate_from_string(require_string(j, "nonfundamental"));
  if (!nf) throw SchemaViolationError("nonfundamental", "unknown value");
  return *nf;
}

DualAnalysis analyze_episode_dual(const std::vector<ArticleRecord>& articles,
                                  LlmClient& primary, LlmClient& secondary,
                                  const LlmConfig& config) {
  DualAnalysis out;
  out.primary = analyze_episode(articles, primary, config);
  const EpisodeAnalysis second = analyze_episode(articles, secondary, config);
  if (second.episode_type_hint != out.primary.episode_type_hint) {
    out.needs_review = true;
    out.disagreement = "episode_type_hint";
  } else if (second.nonfundamental != out.primary.nonfundamental) {
    out.needs_review = true;
    out.disagreement = "nonfundamental";
  }
  return out;
}

}  // namespace bankdist
