#include "bankdist/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "bankdist/entities.hpp"
#include "bankdist/errors.hpp"
#include "bankdist/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace bankdist {

std::string PipelineConfig::stage_path(const std::string& artifact) const {
  return work_dir + "/" + artifact;
}

namespace {

json config_to_json(const PipelineConfig& c) {
  json j;
  j["work_dir"] = c.work_dir;
  j["input_path"] = c.input_path;
  j["input_format"] = c.input_format == CorpusFormat::Csv ? "csv" : "jsonl";
  j["rules_path"] = c.rules_path;
  j["registry_path"] = c.registry_path;
  j["name_crosswalk_path"] = c.name_crosswalk_path;
  j["gazetteer_path"] = c.gazetteer_path;
  j["city_crosswalk_path"] = c.city_crosswalk_path;
  j["occ_path"] = c.occ_path;
  j["balances_path"] = c.balances_path;
  j["covariates_path"] = c.covariates_path;
  j["state_failures_path"] = c.state_failures_path;
  j["national_banks_path"] = c.national_banks_path;
  j["crisis_path"] = c.crisis_path;
  j["mock_llm"] = c.mock_llm;
  j["fixtures_path"] = c.fixtures_path;
  j["jobs"] = c.jobs;
  j["seed"] = c.seed;
  j["occ_window_days"] = c.occ_window_days;
  j["fit_presets"] = c.fit_presets;
  j["llm"] = {{"base_url", c.llm.base_url},
              {"model", c.llm.model},
              {"auth_token_env", c.llm.auth_token_env},
              {"timeout_seconds", c.llm.timeout_seconds},
              {"max_in_flight", c.llm.max_in_flight},
              {"max_attempts", c.llm.max_attempts},
              {"backoff_initial_ms", c.llm.backoff_initial_ms},
              {"temperature", c.llm.temperature},
              {"prompt_dir", c.llm.prompt_dir},
              {"audit_log_path", c.llm.audit_log_path}};
  return j;
}

}  // namespace

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("bad JSON in " + path);
  PipelineConfig c;
  c.work_dir = j.value("work_dir", c.work_dir);
  c.input_path = j.value("input_path", c.input_path);
  c.input_format = j.value("input_format", "jsonl") == std::string("csv")
                       ? CorpusFormat::Csv
                       : CorpusFormat::Jsonl;
  c.rules_path = j.value("rules_path", c.rules_path);
  c.registry_path = j.value("registry_path", c.registry_path);
  c.name_crosswalk_path = j.value("name_crosswalk_path", c.name_crosswalk_path);
  c.gazetteer_path = j.value("gazetteer_path", c.gazetteer_path);
  c.city_crosswalk_path = j.value("city_crosswalk_path", c.city_crosswalk_path);
  c.occ_path = j.value("occ_path", c.occ_path);
  c.balances_path = j.value("balances_path", c.balances_path);
  c.covariates_path = j.value("covariates_path", c.covariates_path);
  c.state_failures_path = j.value("state_failures_path", c.state_failures_path);
  c.national_banks_path = j.value("national_banks_path", c.national_banks_path);
  c.crisis_path = j.value("crisis_path", c.crisis_path);
  c.mock_llm = j.value("mock_llm", c.mock_llm);
  c.fixtures_path = j.value("fixtures_path", c.fixtures_path);
  c.jobs = j.value("jobs", c.jobs);
  c.seed = j.value("seed", c.seed);
  c.occ_window_days = j.value("occ_window_days", c.occ_window_days);
  if (j.contains("fit_presets")) {
    c.fit_presets = j["fit_presets"].get<std::vector<std::string>>();
  }
  if (j.contains("llm") && j["llm"].is_object()) {
    const json& l = j["llm"];
    c.llm.base_url = l.value("base_url", c.llm.base_url);
    c.llm.model = l.value("model", c.llm.model);
    c.llm.auth_token_env = l.value("auth_token_env", c.llm.auth_token_env);
    c.llm.timeout_seconds = l.value("timeout_seconds", c.llm.timeout_seconds);
    c.llm.max_in_flight = l.value("max_in_flight", c.llm.max_in_flight);
    c.llm.max_attempts = l.value("max_attempts", c.llm.max_attempts);
    c.llm.backoff_initial_ms = l.value("backoff_initial_ms", c.llm.backoff_initial_ms);
    c.llm.temperature = l.value("temperature", c.llm.temperature);
    c.llm.prompt_dir = l.value("prompt_dir", c.llm.prompt_dir);
    c.llm.audit_log_path = l.value("audit_log_path", c.llm.audit_log_path);
  }
  if (c.jobs < 1) throw ConfigError("jobs must be >= 1");
  return c;
}

void save_config(const std::string& path, const PipelineConfig& config) {
  atomic_write(path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << config_to_json(config).dump(2) << "\n";
  });
}

std::string config_digest(const PipelineConfig& config) {
  return fnv1a_hex(config_to_json(config).dump());
}

void atomic_write(const std::string& path,
                  const std::function<void(const std::string&)>& writer) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  writer(tmp);
  fs::rename(tmp, target);
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

namespace {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json digest_pairs(const std::vector<std::pair<std::string, std::string>>& v) {
  json arr = json::array();
  for (const auto& [path, digest] : v) {
    arr.push_back(json{{"path", path}, {"digest", digest}});
  }
  return arr;
}

}  // namespace

void append_provenance(const PipelineConfig& config, const ProvenanceEntry& entry) {
  fs::create_directories(config.work_dir);
  std::ofstream out(config.stage_path("provenance.jsonl"), std::ios::app);
  if (!out) throw DataError("cannot append provenance");
  out << json{{"stage", entry.stage},
              {"timestamp_utc", entry.timestamp_utc},
              {"config_digest", entry.config_digest},
              {"inputs", digest_pairs(entry.inputs)},
              {"outputs", digest_pairs(entry.outputs)},
              {"tool_version", kToolVersion},
              {"seed", entry.seed}}
             .dump()
      << "\n";
}

std::vector<ProvenanceEntry> load_provenance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);
  std::vector<ProvenanceEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DataError("bad provenance line in " + path);
    ProvenanceEntry e;
    e.stage = j.value("stage", std::string{});
    e.timestamp_utc = j.value("timestamp_utc", std::string{});
    e.config_digest = j.value("config_digest", std::string{});
    e.seed = j.value("seed", std::uint64_t{0});
    for (const auto& p : j.value("inputs", json::array())) {
      e.inputs.emplace_back(p.value("path", ""), p.value("digest", ""));
    }
    for (const auto& p : j.value("outputs", json::array())) {
      e.outputs.emplace_back(p.value("path", ""), p.value("digest", ""));
    }
    out.push_back(std::move(e));
  }
  return out;
}

// --- Stage helpers ---------------------------------------------------------

namespace {

void require_artifact(const std::string& path, const std::string& stage,
                      const std::string& producer) {
  if (!fs::exists(path)) {
    throw MissingDependencyError("stage '" + stage + "' needs " + path +
                                 "; run '" + producer + "' first");
  }
}

void record_stage(const PipelineConfig& config, const std::string& stage,
                  const std::vector<std::string>& inputs,
                  const std::vector<std::string>& outputs) {
  ProvenanceEntry e;
  e.stage = stage;
  e.timestamp_utc = utc_now();
  e.config_digest = config_digest(config);
  e.seed = config.seed;
  for (const auto& p : inputs) {
    if (fs::exists(p)) e.inputs.emplace_back(p, file_digest(p));
  }
  for (const auto& p : outputs) {
    if (fs::exists(p)) e.outputs.emplace_back(p, file_digest(p));
  }
  append_provenance(config, e);
}

FilterConfig rules_for(const PipelineConfig& config) {
  return config.rules_path.empty() ? default_filter_config()
                                   : load_filter_config(config.rules_path);
}

std::unique_ptr<LlmClient> make_client(const PipelineConfig& config) {
  if (config.mock_llm) {
    if (config.fixtures_path.empty()) {
      throw ConfigError("mock llm needs fixtures_path");
    }
    return std::make_unique<MockLlmClient>(config.fixtures_path);
  }
  return make_http_client(config.llm);
}

void stage_ingest(const PipelineConfig& config) {
  if (config.input_path.empty()) throw ConfigError("input_path is not set");
  const auto loaded = load_articles(config.input_path, config.input_format);
  std::vector<ArticleRecord> kept;
  std::vector<RecordError> rejects = loaded.errors;
  for (const auto& rec : loaded.records) {
    auto v = validate_article(rec);
    if (auto* ok = std::get_if<ValidatedArticle>(&v)) {
      kept.push_back(std::move(ok->record));
    } else {
      rejects.push_back({0, rec.article_id, to_string(std::get<RejectReason>(v))});
    }
  }
  const std::string out_path = config.stage_path("articles.jsonl");
  const std::string err_path = config.stage_path("ingest_errors.jsonl");
  atomic_write(out_path, [&](const std::string& tmp) { save_articles(tmp, kept); });
  atomic_write(err_path, [&](const std::string& tmp) { save_errors(tmp, rejects); });
  record_stage(config, "ingest", {config.input_path}, {out_path, err_path});
}

void stage_screen(const PipelineConfig& config) {
  const std::string in_path = config.stage_path("articles.jsonl");
  require_artifact(in_path, "screen", "ingest");
  const auto articles = load_articles(in_path, CorpusFormat::Jsonl).records;
  const auto rules = rules_for(config);
  const auto result = filter_collection(articles, rules, config.jobs);
  const std::string out_path = config.stage_path("hits.jsonl");
  atomic_write(out_path, [&](const std::string& tmp) { save_hits(tmp, result.hits); });
  record_stage(config, "screen", {in_path, config.rules_path}, {out_path});
}

void stage_extract(const PipelineConfig& config) {
  const std::string hits_path = config.stage_path("hits.jsonl");
  const std::string articles_path = config.stage_path("articles.jsonl");
  require_artifact(hits_path, "extract", "screen");
  require_artifact(articles_path, "extract", "ingest");
  const auto hits = load_hits(hits_path);
  const auto articles = load_articles(articles_path, CorpusFormat::Jsonl).records;
  std::map<std::string, const ArticleRecord*> by_id;
  for (const auto& a : articles) by_id[a.article_id] = &a;

  auto client = make_client(config);
  struct PerHit {
    std::vector<ArticleEvent> events;
    std::vector<std::string> rejections;
    bool kept = false;
    std::string discard_reason;
  };
  std::vector<PerHit> results(hits.size());
  const int width = config.mock_llm ? std::max(config.jobs, 1)
                                    : config.llm.max_in_flight;
  parallel_for_bounded(hits.size(), width, [&](std::size_t i) {
    const auto it = by_id.find(hits[i].article_id);
    if (it == by_id.end()) return;
    const ArticleRecord& article = *it->second;
    const auto verdict = quick_screen(article, *client, config.llm);
    results[i].kept = verdict.keep;
    results[i].discard_reason = verdict.discard_reason;
    if (!verdict.keep) return;
    auto extraction = extract_events(article, *client, config.llm);
    results[i].events = std::move(extraction.events);
    results[i].rejections = std::move(extraction.rejections);
  });

  std::vector<ArticleEvent> events;
  json screen_log = json::array();
  std::vector<std::string> rejections;
  for (std::size_t i = 0; i < hits.size(); ++i) {
    screen_log.push_back(json{{"article_id", hits[i].article_id},
                              {"keep", results[i].kept},
                              {"discard_reason", results[i].discard_reason}});
    for (auto& ev : results[i].events) events.push_back(std::move(ev));
    for (auto& r : results[i].rejections) {
      rejections.push_back(hits[i].article_id + ": " + r);
    }
  }
  const std::string out_path = config.stage_path("events.jsonl");
  atomic_write(out_path, [&](const std::string& tmp) { save_events(tmp, events); });
  const std::string log_path = config.stage_path("screen_verdicts.jsonl");
  atomic_write(log_path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& entry : screen_log) out << entry.dump() << "\n";
  });
  const std::string rej_path = config.stage_path("extract_rejects.txt");
  atomic_write(rej_path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& r : rejections) out << r << "\n";
  });
  record_stage(config, "extract", {hits_path, articles_path, config.fixtures_path},
               {out_path, log_path, rej_path});
}

void stage_resolve(const PipelineConfig& config) {
  const std::string events_path = config.stage_path("events.jsonl");
  require_artifact(events_path, "resolve", "extract");
  if (config.registry_path.empty()) throw ConfigError("registry_path is not set");
  auto events = load_events(events_path);
  const auto registry =
      load_bank_registry(config.registry_path, config.name_crosswalk_path);
  Gazetteer gazetteer;
  if (!config.gazetteer_path.empty()) {
    gazetteer = load_gazetteer(config.gazetteer_path, config.city_crosswalk_path);
  }

  std::vector<ArticleEvent> resolved;
  json unmatched = json::array();
  for (auto& ev : events) {
    const auto state = normalize_state(ev.state_raw);
    std::vector<int> fips_candidates;
    if (state.kind == StateResult::Kind::Matched ||
        state.kind == StateResult::Kind::Candidates) {
      fips_candidates = state.fips;
    }
    MatchResult best;
    int best_fips = 0;
    std::string best_city;
    for (const int fips : fips_candidates) {
      std::string city = ev.city_raw;
      if (!gazetteer.entries.empty()) {
        const auto c = normalize_city(fips, ev.city_raw, gazetteer);
        if (c.kind == CityResult::Kind::Matched) city = c.canonical_city;
      }
      const auto m = match_bank(fips, city, ev.bank_name_raw, registry,
                                ev.event_date);
      if (m.matched && (!best.matched || m.score > best.score)) {
        best = m;
        best_fips = fips;
        best_city = city;
      } else if (!best.matched && !m.matched && best.best_candidates.empty()) {
        best.best_candidates = m.best_candidates;
        best.probable_national = m.probable_national;
      }
    }
    if (best.matched) {
      ev.bank_id = best.bank_id;
      ev.state_fips = best_fips;
      ev.canonical_city = best_city;
      resolved.push_back(ev);
    } else {
      unmatched.push_back(json{{"article_id", ev.article_id},
                               {"bank_name", ev.bank_name_raw},
                               {"state", ev.state_raw},
                               {"city", ev.city_raw},
                               {"probable_national", best.probable_national},
                               {"candidates", best.best_candidates}});
    }
  }
  const std::string out_path = config.stage_path("resolved.jsonl");
  atomic_write(out_path, [&](const std::string& tmp) { save_events(tmp, resolved); });
  const std::string un_path = config.stage_path("unmatched.jsonl");
  atomic_write(un_path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& u : unmatched) out << u.dump() << "\n";
  });
  record_stage(config, "resolve",
               {events_path, config.registry_path, config.gazetteer_path},
               {out_path, un_path});
}

std::set<std::string> load_id_set(const std::string& path) {
  std::set<std::string> out;
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto id = trim(line);
    if (!id.empty()) out.insert(id);
  }
  return out;
}

void stage_episodes(const PipelineConfig& config) {
  const std::string in_path = config.stage_path("resolved.jsonl");
  require_artifact(in_path, "episodes", "resolve");
  const auto events = load_events(in_path);
  auto episodes = group_events(events);
  BankRegistry registry;
  if (!config.registry_path.empty()) {
    registry = load_bank_registry(config.registry_path, config.name_crosswalk_path);
  }
  for (auto& ep : episodes) {
    if (const auto* bank = registry.by_id(ep.bank_id)) {
      ep.charter_type = bank->charter_type;
    }
    classify_episode(ep, /*strict=*/false);
  }
  if (!config.occ_path.empty()) {
    const auto occ = load_occ_records(config.occ_path);
    std::set<std::string> national;
    if (!config.national_banks_path.empty()) {
      national = load_id_set(config.national_banks_path);
    }
    episodes = merge_occ(std::move(episodes), occ, national,
                         {config.occ_window_days});
  }
  const std::string out_path = config.stage_path("episodes.jsonl");
  atomic_write(out_path,
               [&](const std::string& tmp) { save_episodes(tmp, episodes); });
  record_stage(config, "episodes", {in_path, config.occ_path}, {out_path});
}

void stage_tabulate(const PipelineConfig& config) {
  const std::string in_path = config.stage_path("episodes.jsonl");
  require_artifact(in_path, "tabulate", "episodes");
  const auto episodes = load_episodes(in_path);
  const auto rows = tabulate(episodes, {TabulateFilter{}});
  const std::string out_path = config.stage_path("counts.csv");
  atomic_write(out_path,
               [&](const std::string& tmp) { save_counts_csv(tmp, rows); });
  record_stage(config, "tabulate", {in_path}, {out_path});
}

std::map<std::string, BankInfo> bank_info_from_registry(const BankRegistry& registry) {
  std::map<std::string, BankInfo> info;
  for (const auto& b : registry.banks) {
    BankInfo bi;
    bi.state_fips = b.state_fips;
    bi.city_key = std::to_string(b.state_fips) + ":" + to_lower(b.canonical_city);
    bi.charter_type = b.charter_type;
    info[b.bank_id] = bi;
  }
  return info;
}

void stage_panel(const PipelineConfig& config) {
  const std::string ep_path = config.stage_path("episodes.jsonl");
  require_artifact(ep_path, "panel", "episodes");
  const auto episodes = load_episodes(ep_path);
  std::vector<BalanceSheet> balances;
  if (!config.balances_path.empty()) {
    balances = load_balance_sheets(config.balances_path);
  }
  std::map<std::string, BankInfo> info;
  if (!config.registry_path.empty()) {
    info = bank_info_from_registry(
        load_bank_registry(config.registry_path, config.name_crosswalk_path));
  }
  auto panel = build_panel(balances, episodes, info);
  if (!balances.empty()) fundamentals_index(panel.rows);
  if (!config.covariates_path.empty() || !config.state_failures_path.empty()) {
    std::vector<CovariateRow> cov;
    if (!config.covariates_path.empty()) cov = load_covariates(config.covariates_path);
    std::vector<StateFailureRow> st;
    if (!config.state_failures_path.empty()) {
      st = load_state_failures(config.state_failures_path);
    }
    attach_covariates(panel.rows, cov, st);
  } else {
    attach_covariates(panel.rows, {});
  }
  const std::string out_path = config.stage_path("panel.csv");
  atomic_write(out_path, [&](const std::string& tmp) { save_panel(tmp, panel.rows); });
  const std::string warn_path = config.stage_path("panel_warnings.txt");
  atomic_write(warn_path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::trunc);
    for (const auto& w : panel.warnings) out << w << "\n";
  });
  record_stage(config, "panel", {ep_path, config.balances_path}, {out_path, warn_path});
}

void stage_fit(const PipelineConfig& config) {
  const std::string panel_path = config.stage_path("panel.csv");
  const std::string ep_path = config.stage_path("episodes.jsonl");
  require_artifact(panel_path, "fit", "panel");
  require_artifact(ep_path, "fit", "episodes");
  auto panel = load_panel(panel_path);
  const auto episodes = load_episodes(ep_path);
  const auto known = available_fit_presets();
  std::vector<std::string> presets = config.fit_presets;
  const bool automatic = presets.empty();
  if (automatic) presets = known;
  for (const auto& p : presets) {
    if (std::find(known.begin(), known.end(), p) == known.end()) {
      throw ConfigError("unknown fit preset '" + p + "'");
    }
  }
  std::vector<TidyRow> rows;
  for (const auto& p : presets) {
    try {
      auto r = run_fit_preset(p, panel, episodes, config.crisis_path);
      rows.insert(rows.end(), r.begin(), r.end());
    } catch (const Error& e) {
      if (!automatic) throw;
      std::cerr << "fit: skipping preset " << p << ": " << e.what() << "\n";
    }
  }
  const std::string out_path = config.stage_path("fits.csv");
  atomic_write(out_path, [&](const std::string& tmp) { save_tidy_csv(tmp, rows); });
  record_stage(config, "fit", {panel_path, ep_path}, {out_path});
}

}  // namespace

void run_stage(const std::string& stage, const PipelineConfig& config) {
  fs::create_directories(config.work_dir);
  if (stage == "ingest") {
    stage_ingest(config);
  } else if (stage == "screen") {
    stage_screen(config);
  } else if (stage == "extract") {
    stage_extract(config);
  } else if (stage == "resolve") {
    stage_resolve(config);
  } else if (stage == "episodes") {
    stage_episodes(config);
  } else if (stage == "tabulate") {
    stage_tabulate(config);
  } else if (stage == "panel") {
    stage_panel(config);
  } else if (stage == "fit") {
    stage_fit(config);
  } else if (stage == "pipeline") {
    for (const char* s : {"ingest", "screen", "extract", "resolve", "episodes",
                          "tabulate", "panel", "fit"}) {
      run_stage(s, config);
    }
  } else {
    throw ConfigError("unknown stage '" + stage + "'");
  }
}

// --- Fit presets -----------------------------------------------------------

namespace {

// Failure at t+1 regressed on fundamentals ratios, with in-sample AUC.
std::vector<TidyRow> preset_table4(const std::vector<BankYearRow>& panel) {
  Dataset d = panel_dataset(panel);
  std::map<std::pair<std::string, int>, bool> fail;
  for (const auto& r : panel) fail[{r.bank_id, r.year}] = r.failure;
  std::vector<double> lead(panel.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto it = fail.find({panel[i].bank_id, panel[i].year + 1});
    if (it != fail.end()) lead[i] = it->second ? 1.0 : 0.0;
  }
  d.add_col("failure_lead", std::move(lead));
  RegressionSpec spec;
  spec.outcome = "failure_lead";
  spec.regressors = {"surplus_to_equity", "noncore_funding", "liquid_assets_ratio",
                     "deposits_to_assets"};
  spec.dk_bandwidth = 3;
  auto fit = fit_ols_dk(d, spec);
  auto rows = tidy("table4", fit);

  // In-sample discrimination of the fitted linear predictor.
  std::vector<double> scores;
  std::vector<bool> labels;
  const auto& out_col = d.col("failure_lead");
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (std::isnan(out_col[i])) continue;
    double score = 0;
    bool complete = true;
    for (std::size_t j = 0; j < fit.terms.size(); ++j) {
      const double x =
          fit.terms[j] == "(intercept)" ? 1.0 : d.col(fit.terms[j])[i];
      if (std::isnan(x)) {
        complete = false;
        break;
      }
      score += fit.coef[static_cast<Eigen::Index>(j)] * x;
    }
    if (!complete) continue;
    scores.push_back(score);
    labels.push_back(out_col[i] > 0.5);
  }
  try {
    rows.push_back({"table4", "(auc)", auc(scores, labels), 0, scores.size()});
  } catch (const DataError&) {
    // one-class sample, no AUC row
  }
  return rows;
}

std::vector<TidyRow> preset_table5(std::vector<BankYearRow>& panel) {
  std::vector<TidyRow> rows;
  {
    PassthroughOptions o;
    o.variant = PassthroughVariant::Linear;
    auto r = tidy("table5_linear", passthrough(panel, o));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  {
    PassthroughOptions o;
    o.variant = PassthroughVariant::StrongTercile;
    auto r = tidy("table5_strong_tercile", passthrough(panel, o));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  {
    PassthroughOptions o;
    o.variant = PassthroughVariant::VeryStrongDecile;
    auto r = tidy("table5_top_decile", passthrough(panel, o));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return rows;
}

// Daily cumulative failure/suspension after a run starts.
std::vector<TidyRow> preset_fig4(const std::vector<DistressEpisode>& episodes) {
  Dataset d;
  std::vector<double> run, failed_by, suspended_by;
  const int max_h = 40;
  for (const auto& ep : episodes) {
    if (!ep.has_run) continue;
    std::optional<Date> run_start;
    for (const auto& ev : ep.events) {
      if (ev.event_type == EventType::Run) {
        run_start = ev.event_date;
        break;
      }
    }
    if (!run_start) continue;
    const std::int64_t d0 = run_start->to_days();
    for (int h = 0; h <= max_h; ++h) {
      bool failed = false, suspended = false;
      for (const auto& ev : ep.events) {
        const std::int64_t off = ev.event_date.to_days() - d0;
        if (off > h) continue;
        if (ev.event_type == EventType::Failure ||
            ev.event_type == EventType::Receivership) {
          failed = true;
        }
        if (ev.event_type == EventType::Suspension ||
            ev.event_type == EventType::PartialSuspension) {
          suspended = true;
        }
      }
      d.unit.push_back(ep.episode_id);
      d.time.push_back(h);
      run.push_back(h == 0 ? 1.0 : std::numeric_limits<double>::quiet_NaN());
      failed_by.push_back(failed ? 1.0 : 0.0);
      suspended_by.push_back(suspended ? 1.0 : 0.0);
    }
  }
  d.cols["run"] = std::move(run);
  d.cols["failed_by"] = std::move(failed_by);
  d.cols["suspended_by"] = std::move(suspended_by);
  if (d.n() == 0) throw InsufficientDataError("no run episodes");

  LpSpec spec;
  spec.h_min = 0;
  spec.h_max = max_h;
  spec.shocks = {"run"};
  spec.include_intercept = false;
  spec.min_obs = 1;
  std::vector<TidyRow> rows;
  for (const char* outcome : {"failed_by", "suspended_by"}) {
    const auto lps = local_projection(d, outcome, spec);
    const std::string model = std::string("fig4_") + outcome;
    for (const auto& lp : lps) {
      if (!lp.fit) continue;
      rows.push_back({model, "h" + std::to_string(lp.horizon), lp.fit->coef[0],
                      lp.fit->se[0], lp.fit->n_obs});
    }
  }
  return rows;
}

std::vector<TidyRow> preset_fig5(const std::vector<BankYearRow>& panel) {
  std::vector<TidyRow> rows;
  for (const auto& res : decile_passthrough(panel)) {
    if (res.empty || !res.fit) continue;
    const auto pos = std::find(res.fit->terms.begin(), res.fit->terms.end(), "run");
    if (pos == res.fit->terms.end()) continue;
    const auto j = static_cast<Eigen::Index>(pos - res.fit->terms.begin());
    rows.push_back({"fig5", "decile" + std::to_string(res.decile),
                    res.fit->coef[j], res.fit->se[j], res.fit->n_obs});
  }
  if (rows.empty()) throw InsufficientDataError("no populated deciles");
  return rows;
}

// Deposit response to runs without failure, two-way fixed effects.
std::vector<TidyRow> preset_fig7(const std::vector<BankYearRow>& panel) {
  Dataset d = panel_dataset(panel);
  LpSpec spec;
  spec.h_min = -5;
  spec.h_max = 5;
  spec.shocks = {"run_no_failure"};
  spec.transform = LpTransform::ScaledChange;
  spec.scale_col = "assets";
  spec.unit_fe = true;
  spec.time_fe = true;
  spec.include_intercept = false;
  spec.dk_bandwidth = 3;
  const auto lps = local_projection(d, "deposits", spec);
  std::vector<TidyRow> rows;
  for (const auto& lp : lps) {
    if (!lp.fit) continue;
    const auto pos =
        std::find(lp.fit->terms.begin(), lp.fit->terms.end(), "run_no_failure");
    if (pos == lp.fit->terms.end()) continue;
    const auto j = static_cast<Eigen::Index>(pos - lp.fit->terms.begin());
    rows.push_back({"fig7", "h" + std::to_string(lp.horizon), lp.fit->coef[j],
                    lp.fit->se[j], lp.fit->n_obs});
  }
  if (rows.empty()) throw InsufficientDataError("no estimable horizons");
  return rows;
}

// City-level deposit growth response to tercile run exposure.
std::vector<TidyRow> preset_fig8(const std::vector<BankYearRow>& panel) {
  const auto terciles = assign_quantile_groups(panel, 3);
  const auto cities = city_shocks(panel, terciles);
  if (cities.empty()) throw InsufficientDataError("no city-year rows");
  Dataset d;
  std::vector<double> dep, weak, inter, strong;
  for (const auto& c : cities) {
    d.unit.push_back(c.city_key);
    d.time.push_back(c.year);
    dep.push_back(c.total_deposits);
    weak.push_back(c.run_weak);
    inter.push_back(c.run_intermediate);
    strong.push_back(c.run_strong);
  }
  d.cols["total_deposits"] = std::move(dep);
  d.cols["run_weak"] = std::move(weak);
  d.cols["run_intermediate"] = std::move(inter);
  d.cols["run_strong"] = std::move(strong);
  LpSpec spec;
  spec.h_min = 0;
  spec.h_max = 5;
  spec.shocks = {"run_weak", "run_intermediate", "run_strong"};
  spec.control_lags = 3;
  spec.transform = LpTransform::SymmetricGrowth;
  spec.time_fe = true;
  spec.include_intercept = false;
  spec.bw_rule = LpBandwidthRule::Ceil15H;
  const auto lps = local_projection(d, "total_deposits", spec);
  std::vector<TidyRow> rows;
  for (const auto& lp : lps) {
    if (!lp.fit) continue;
    for (const auto& shock : spec.shocks) {
      const auto pos = std::find(lp.fit->terms.begin(), lp.fit->terms.end(), shock);
      if (pos == lp.fit->terms.end()) continue;
      const auto j = static_cast<Eigen::Index>(pos - lp.fit->terms.begin());
      rows.push_back({"fig8_" + shock, "h" + std::to_string(lp.horizon),
                      lp.fit->coef[j], lp.fit->se[j], lp.fit->n_obs});
    }
  }
  if (rows.empty()) throw InsufficientDataError("no estimable horizons");
  return rows;
}

std::vector<TidyRow> preset_figA1(const std::vector<BankYearRow>& panel,
                                  const std::vector<DistressEpisode>& episodes) {
  Dataset d = panel_dataset(panel);
  const std::vector<std::pair<std::string, EpisodeType>> types = {
      {"ev_run_only", EpisodeType::RunOnly},
      {"ev_run_reopen", EpisodeType::RunSuspensionReopening},
      {"ev_run_failure", EpisodeType::RunSuspensionFailure},
      {"ev_failure_only", EpisodeType::FailureWithoutRun}};
  std::map<std::pair<std::string, int>, EpisodeType> events;
  for (const auto& ep : episodes) {
    events[{ep.bank_id, episode_year(ep)}] = ep.episode_type;
  }
  for (const auto& [name, type] : types) {
    std::vector<double> col(panel.size(), 0.0);
    for (std::size_t i = 0; i < panel.size(); ++i) {
      const auto it = events.find({panel[i].bank_id, panel[i].year});
      if (it != events.end() && it->second == type) col[i] = 1.0;
    }
    d.add_col(name, std::move(col));
  }
  EventStudySpec spec;
  spec.event_types = {"ev_run_only", "ev_run_reopen", "ev_run_failure",
                      "ev_failure_only"};
  spec.truncated_types = {"ev_run_failure", "ev_failure_only"};
  const auto cells = event_study(d, "surplus_to_equity", spec);
  std::vector<TidyRow> rows;
  for (const auto& c : cells) {
    if (!c.estimate) continue;
    rows.push_back({"figA1_" + c.event_type, "h" + std::to_string(c.horizon),
                    *c.estimate, c.se.value_or(0), 0});
  }
  if (rows.empty()) throw InsufficientDataError("no estimable event-study cells");
  return rows;
}

std::vector<TidyRow> preset_table2(const std::vector<DistressEpisode>& episodes,
                                   const std::string& crisis_csv) {
  if (crisis_csv.empty()) {
    throw MissingSeriesError("table2 needs a crisis-dummy CSV (crisis_path)");
  }
  // Crisis CSV: year,month,crisis_year,panic_month,regional_panic
  std::map<std::pair<int, int>, std::array<double, 3>> dummies;
  {
    std::ifstream in(crisis_csv);
    if (!in) throw FileNotFoundError(crisis_csv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (trim(line).empty()) continue;
      const auto f = parse_csv_line(line);
      if (f.size() < 5) throw DataError("short crisis row in " + crisis_csv);
      dummies[{std::stoi(f[0]), std::stoi(f[1])}] = {std::stod(f[2]), std::stod(f[3]),
                                                     std::stod(f[4])};
    }
  }
  // State-month distress counts from the episodes.
  std::map<std::pair<int, long>, double> counts;
  std::set<int> states;
  for (const auto& ep : episodes) {
    int fips = 0;
    for (const auto& ev : ep.events) {
      if (ev.state_fips != 0) {
        fips = ev.state_fips;
        break;
      }
    }
    if (fips == 0) continue;
    states.insert(fips);
    const long m = ep.start_date.year * 12L + (ep.start_date.month - 1);
    counts[{fips, m}] += 1.0;
  }
  if (states.empty()) throw InsufficientDataError("no state-resolved episodes");
  Dataset d;
  std::vector<double> count_col, crisis, panic, regional;
  for (const auto& [ym, dm] : dummies) {
    const long m = ym.first * 12L + (ym.second - 1);
    for (const int s : states) {
      d.unit.push_back(std::to_string(s));
      d.time.push_back(m);
      const auto it = counts.find({s, m});
      count_col.push_back(it != counts.end() ? it->second : 0.0);
      crisis.push_back(dm[0]);
      panic.push_back(dm[1]);
      regional.push_back(dm[2]);
    }
  }
  d.cols["count"] = std::move(count_col);
  d.cols["crisis_year"] = std::move(crisis);
  d.cols["panic_month"] = std::move(panic);
  d.cols["regional_panic"] = std::move(regional);
  return tidy("table2", crisis_correlation(
                            d, "count", {"crisis_year", "panic_month", "regional_panic"}));
}

std::vector<TidyRow> preset_table6(std::vector<BankYearRow>& panel) {
  PassthroughOptions o;
  o.variant = PassthroughVariant::NonfundamentalSplit;
  return tidy("table6", passthrough(panel, o));
}

std::vector<TidyRow> preset_table7(std::vector<BankYearRow>& panel) {
  PassthroughOptions o;
  o.variant = PassthroughVariant::AdverseSignal;
  return tidy("table7", passthrough(panel, o));
}

}  // namespace

std::vector<std::string> available_fit_presets() {
  return {"table2", "table4", "table5", "table6", "table7",
          "fig4",   "fig5",   "fig7",   "fig8",   "figA1"};
}

std::vector<TidyRow> run_fit_preset(const std::string& name,
                                    std::vector<BankYearRow>& panel,
                                    const std::vector<DistressEpisode>& episodes,
                                    const std::string& crisis_csv) {
  if (name == "table2") return preset_table2(episodes, crisis_csv);
  if (name == "table4") return preset_table4(panel);
  if (name == "table5") return preset_table5(panel);
  if (name == "table6") return preset_table6(panel);
  if (name == "table7") return preset_table7(panel);
  if (name == "fig4") return preset_fig4(episodes);
  if (name == "fig5") return preset_fig5(panel);
  if (name == "fig7") return preset_fig7(panel);
  if (name == "fig8") return preset_fig8(panel);
  if (name == "figA1") return preset_figA1(panel, episodes);
  throw ConfigError("unknown fit preset '" + name + "'");
}

// --- Reports ---------------------------------------------------------------

void run_report(const std::string& preset, const PipelineConfig& config) {
  const std::string csv_path = config.stage_path("report_" + preset + ".csv");
  const std::string svg_path = config.stage_path("report_" + preset + ".svg");
  if (preset == "fig1") {
    const std::string ep_path = config.stage_path("episodes.jsonl");
    require_artifact(ep_path, "report fig1", "episodes");
    const auto episodes = load_episodes(ep_path);
    std::map<int, std::pair<long, long>> by_year;  // runs without / with failure
    for (const auto& ep : episodes) {
      if (!ep.has_run) continue;
      auto& cell = by_year[episode_year(ep)];
      if (ep.has_failure) {
        ++cell.second;
      } else {
        ++cell.first;
      }
    }
    atomic_write(csv_path, [&](const std::string& tmp) {
      std::ofstream out(tmp, std::ios::trunc);
      out << "year,runs_without_failure,runs_with_failure\n";
      for (const auto& [y, c] : by_year) {
        out << y << ',' << c.first << ',' << c.second << "\n";
      }
    });
    SvgSeries without{"runs without failure", {}};
    SvgSeries with_fail{"runs with failure", {}};
    for (const auto& [y, c] : by_year) {
      without.points.emplace_back(y, static_cast<double>(c.first));
      with_fail.points.emplace_back(y, static_cast<double>(c.second));
    }
    atomic_write(svg_path, [&](const std::string& tmp) {
      write_svg_line_chart(tmp, "Bank runs per year", {without, with_fail});
    });
  } else if (preset == "fig5") {
    const std::string panel_path = config.stage_path("panel.csv");
    require_artifact(panel_path, "report fig5", "panel");
    const auto panel = load_panel(panel_path);
    const auto deciles = decile_passthrough(panel);
    std::vector<std::pair<std::string, double>> bars;
    atomic_write(csv_path, [&](const std::string& tmp) {
      std::ofstream out(tmp, std::ios::trunc);
      out << "decile,run_coefficient,se,n,empty\n";
      for (const auto& res : deciles) {
        double est = 0, se = 0;
        std::size_t n = 0;
        if (res.fit) {
          const auto pos =
              std::find(res.fit->terms.begin(), res.fit->terms.end(), "run");
          if (pos != res.fit->terms.end()) {
            const auto j = static_cast<Eigen::Index>(pos - res.fit->terms.begin());
            est = res.fit->coef[j];
            se = res.fit->se[j];
            n = res.fit->n_obs;
          }
        }
        out << res.decile << ',' << est << ',' << se << ',' << n << ','
            << (res.empty ? 1 : 0) << "\n";
        if (!res.empty) bars.emplace_back("d" + std::to_string(res.decile), est);
      }
    });
    atomic_write(svg_path, [&](const std::string& tmp) {
      write_svg_bar_chart(tmp, "Failure-given-run by fundamentals decile", bars);
    });
  } else if (preset == "fig6") {
    const std::string ep_path = config.stage_path("episodes.jsonl");
    require_artifact(ep_path, "report fig6", "episodes");
    const auto episodes = load_episodes(ep_path);
    const std::vector<std::pair<std::string, bool ResponseFlags::*>> flags = {
        {"accommodated_withdrawals", &ResponseFlags::accommodated_withdrawals},
        {"interbank_borrowing", &ResponseFlags::interbank_borrowing},
        {"public_signal", &ResponseFlags::public_signal},
        {"equity_injection", &ResponseFlags::equity_injection},
        {"partial_suspension", &ResponseFlags::partial_suspension},
        {"full_suspension", &ResponseFlags::full_suspension},
        {"examination", &ResponseFlags::examination},
        {"clearinghouse_involved", &ResponseFlags::clearinghouse_involved}};
    std::vector<std::pair<std::string, double>> bars;
    const double denom = episodes.empty() ? 1.0 : static_cast<double>(episodes.size());
    for (const auto& [name, member] : flags) {
      long count = 0;
      for (const auto& ep : episodes) {
        if (ep.response_flags.*member) ++count;
      }
      bars.emplace_back(name, static_cast<double>(count) / denom);
    }
    atomic_write(csv_path, [&](const std::string& tmp) {
      std::ofstream out(tmp, std::ios::trunc);
      out << "response,share\n";
      for (const auto& [name, share] : bars) out << name << ',' << share << "\n";
    });
    atomic_write(svg_path, [&](const std::string& tmp) {
      write_svg_bar_chart(tmp, "Share of episodes with each response", bars);
    });
  } else {
    throw ConfigError("unknown report preset '" + preset + "'");
  }
  record_stage(config, "report_" + preset, {}, {csv_path, svg_path});
}

// --- SVG -------------------------------------------------------------------

namespace {

constexpr int kW = 640, kH = 400, kMargin = 48;
const char* kPalette[] = {"#1f6f8b", "#c24d2c", "#4a7c59", "#8a6fbf", "#b08900"};

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::vector<SvgSeries>& series) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const auto px = [&](double x) {
    return kMargin + (x - xmin) / (xmax - xmin) * (kW - 2 * kMargin);
  };
  const auto py = [&](double y) {
    return kH - kMargin - (y - ymin) / (ymax - ymin) * (kH - 2 * kMargin);
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  out << "<!-- data:\nseries,x,y\n";
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      out << svg_escape(s.name) << ',' << x << ',' << y << "\n";
    }
  }
  out << "-->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << svg_escape(title) << "</text>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kH - kMargin << "\" x2=\""
      << kW - kMargin << "\" y2=\"" << kH - kMargin
      << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin
      << "\" y2=\"" << kH - kMargin << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", ymin);
  out << "<text x=\"4\" y=\"" << kH - kMargin
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%g", ymax);
  out << "<text x=\"4\" y=\"" << kMargin
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%g", xmin);
  out << "<text x=\"" << kMargin << "\" y=\"" << kH - kMargin + 14
      << "\" font-family=\"sans-serif\" font-size=\"10\">" << buf << "</text>\n";
  std::snprintf(buf, sizeof(buf), "%g", xmax);
  out << "<text x=\"" << kW - kMargin << "\" y=\"" << kH - kMargin + 14
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << buf
      << "</text>\n";
  int idx = 0;
  for (const auto& s : series) {
    const char* color = kPalette[idx % 5];
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : s.points) out << px(x) << ',' << py(y) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << kW - kMargin << "\" y=\"" << kMargin + 14 * (idx + 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
           "fill=\""
        << color << "\">" << svg_escape(s.name) << "</text>\n";
    ++idx;
  }
  out << "</svg>\n";
}

void write_svg_bar_chart(const std::string& path, const std::string& title,
                         const std::vector<std::pair<std::string, double>>& bars) {
  double ymin = 0, ymax = 0;
  for (const auto& [_, v] : bars) {
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  if (ymax == ymin) ymax = ymin + 1;
  const auto py = [&](double y) {
    return kH - kMargin - (y - ymin) / (ymax - ymin) * (kH - 2 * kMargin);
  };
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  out << "<!-- data:\nlabel,value\n";
  for (const auto& [label, v] : bars) out << svg_escape(label) << ',' << v << "\n";
  out << "-->\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << svg_escape(title) << "</text>\n";
  const double zero_y = py(0);
  out << "<line x1=\"" << kMargin << "\" y1=\"" << zero_y << "\" x2=\""
      << kW - kMargin << "\" y2=\"" << zero_y
      << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  if (!bars.empty()) {
    const double slot = static_cast<double>(kW - 2 * kMargin) / bars.size();
    const double bw = slot * 0.7;
    for (std::size_t i = 0; i < bars.size(); ++i) {
      const double v = bars[i].second;
      const double x = kMargin + slot * i + (slot - bw) / 2;
      const double top = std::min(py(v), zero_y);
      const double height = std::abs(py(v) - zero_y);
      out << "<rect x=\"" << x << "\" y=\"" << top << "\" width=\"" << bw
          << "\" height=\"" << height << "\" fill=\"" << kPalette[i % 5]
          << "\"/>\n";
      out << "<text x=\"" << x + bw / 2 << "\" y=\"" << kH - kMargin + 14
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
             "font-size=\"9\">"
          << svg_escape(bars[i].first) << "</text>\n";
    }
  }
  out << "</svg>\n";
}

// --- Synthetic inputs ------------------------------------------------------

SyntheticInputs write_synthetic_inputs(const std::string& dir, const SynthSpec& spec) {
  fs::create_directories(dir);
  SyntheticInputs out;
  out.truth = generate_synthetic(spec);

  out.articles_path = dir + "/articles_input.jsonl";
  atomic_write(out.articles_path, [&](const std::string& tmp) {
    save_articles(tmp, out.truth.articles);
  });

  // Registry: every synthetic bank, active over the whole window.
  out.registry_path = dir + "/registry.csv";
  atomic_write(out.registry_path, [&](const std::string& tmp) {
    std::ofstream reg(tmp, std::ios::trunc);
    reg << "bank_id,name,state_fips,city,charter_type,active_from,active_to\n";
    for (const auto& b : out.truth.registry) {
      const auto st = normalize_state(b.state);
      const int fips = st.fips.empty() ? 0 : st.fips.front();
      reg << b.bank_id << ',' << csv_escape(b.name) << ',' << fips << ','
          << csv_escape(b.city) << ",national,,\n";
    }
  });

  out.gazetteer_path = dir + "/gazetteer.csv";
  atomic_write(out.gazetteer_path, [&](const std::string& tmp) {
    std::ofstream gaz(tmp, std::ios::trunc);
    gaz << "state_fips,city,alt_spellings,sources\n";
    std::set<std::pair<int, std::string>> seen;
    for (const auto& b : out.truth.registry) {
      const auto st = normalize_state(b.state);
      const int fips = st.fips.empty() ? 0 : st.fips.front();
      if (seen.insert({fips, b.city}).second) {
        gaz << fips << ',' << csv_escape(b.city) << ",,synthetic\n";
      }
    }
  });

  // Canned responses: keep every article at the quick screen; extraction
  // returns exactly the planted ground truth (empty for decoys/filler).
  std::map<std::string, std::vector<const ArticleEvent*>> truth_by_article;
  for (const auto& ev : out.truth.ground_truth) {
    truth_by_article[ev.article_id].push_back(&ev);
  }
  std::map<std::string, std::string> fixtures;
  for (const auto& rec : out.truth.articles) {
    auto v = validate_article(rec);
    const auto* ok = std::get_if<ValidatedArticle>(&v);
    if (!ok) continue;
    const std::string input = render_article_input(ok->record);
    fixtures[MockLlmClient::digest(LlmStage::QuickScreen, input)] =
        json{{"keep", true}, {"discard_reason", ""}}.dump();
    json events = json::array();
    const auto it = truth_by_article.find(rec.article_id);
    if (it != truth_by_article.end()) {
      for (const auto* ev : it->second) {
        events.push_back(json{{"bank_name", ev->bank_name_raw},
                              {"state", ev->state_raw},
                              {"city", ev->city_raw},
                              {"event_type", to_string(ev->event_type)},
                              {"event_date", ev->event_date.to_iso()},
                              {"date_precision", to_string(ev->date_precision)}});
      }
    }
    fixtures[MockLlmClient::digest(LlmStage::ExtractEvents, input)] =
        json{{"events", events}}.dump();
  }
  out.fixtures_path = dir + "/fixtures.jsonl";
  atomic_write(out.fixtures_path, [&](const std::string& tmp) {
    save_mock_fixtures(tmp, fixtures);
  });
  return out;
}

}  // namespace bankdist
