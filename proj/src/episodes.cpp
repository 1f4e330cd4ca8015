#include "bankdist/episodes.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "bankdist/errors.hpp"
#include "bankdist/util.hpp"

using nlohmann::json;

namespace bankdist {

std::string to_string(EpisodeType t) {
  switch (t) {
    case EpisodeType::RunOnly: return "run_only";
    case EpisodeType::RunSuspensionReopening: return "run_suspension_reopening";
    case EpisodeType::RunSuspensionFailure: return "run_suspension_failure";
    case EpisodeType::FailureWithoutRun: return "failure_without_run";
    case EpisodeType::SuspensionOnly: return "suspension_only";
    case EpisodeType::Other: return "other";
  }
  return "other";
}

std::optional<EpisodeType> episode_type_from_string(const std::string& s) {
  if (s == "run_only") return EpisodeType::RunOnly;
  if (s == "run_suspension_reopening") return EpisodeType::RunSuspensionReopening;
  if (s == "run_suspension_failure") return EpisodeType::RunSuspensionFailure;
  if (s == "failure_without_run") return EpisodeType::FailureWithoutRun;
  if (s == "suspension_only") return EpisodeType::SuspensionOnly;
  if (s == "other") return EpisodeType::Other;
  return std::nullopt;
}

namespace {

bool event_order(const ArticleEvent& a, const ArticleEvent& b) {
  if (a.event_date != b.event_date) return a.event_date < b.event_date;
  if (a.article_id != b.article_id) return a.article_id < b.article_id;
  return to_string(a.event_type) < to_string(b.event_type);
}

}  // namespace

std::vector<DistressEpisode> group_events(const std::vector<ArticleEvent>& events,
                                          const GroupOptions& options) {
  std::map<std::string, std::vector<ArticleEvent>> by_bank;
  for (const auto& ev : events) {
    if (ev.bank_id.empty()) {
      throw UnresolvedBankError("event from article '" + ev.article_id +
                                "' has no resolved bank_id");
    }
    by_bank[ev.bank_id].push_back(ev);
  }
  std::vector<DistressEpisode> out;
  for (auto& [bank_id, evs] : by_bank) {
    std::sort(evs.begin(), evs.end(), event_order);
    std::size_t episode_no = 0;
    DistressEpisode cur;
    auto flush = [&] {
      if (cur.events.empty()) return;
      ++episode_no;
      cur.bank_id = bank_id;
      cur.episode_id = bank_id + "-" + std::to_string(episode_no);
      cur.start_date = cur.events.front().event_date;
      cur.end_date = cur.events.back().event_date;
      out.push_back(std::move(cur));
      cur = DistressEpisode{};
    };
    for (const auto& ev : evs) {
      if (!cur.events.empty()) {
        const std::int64_t anchor = options.span_cap
                                        ? cur.events.front().event_date.to_days()
                                        : cur.events.back().event_date.to_days();
        if (ev.event_date.to_days() - anchor > options.gap_days) flush();
      }
      cur.events.push_back(ev);
    }
    flush();
  }
  return out;
}

EpisodeType classify_episode(DistressEpisode& episode, bool strict) {
  episode.has_run = false;
  episode.has_suspension = false;
  episode.has_failure = false;
  episode.has_reopening = false;
  for (const auto& ev : episode.events) {
    switch (ev.event_type) {
      case EventType::Run: episode.has_run = true; break;
      case EventType::Suspension:
      case EventType::PartialSuspension: episode.has_suspension = true; break;
      case EventType::Failure:
      case EventType::Receivership: episode.has_failure = true; break;
      case EventType::Reopening: episode.has_reopening = true; break;
      case EventType::Other: break;
    }
  }
  const bool occ_confirmed = episode.occ_confirmed_failure.value_or(false);
  if (occ_confirmed) episode.has_failure = true;
  if (episode.has_failure && !episode.has_suspension && !occ_confirmed) {
    if (strict) {
      throw InconsistentEventsError("episode '" + episode.episode_id +
                                    "' records a failure with no suspension "
                                    "event and no receivership confirmation");
    }
    episode.needs_review = true;
  }
  // A bank must suspend before or at failure.
  if (episode.has_failure) episode.has_suspension = true;

  if (episode.has_run && episode.has_failure) {
    episode.episode_type = EpisodeType::RunSuspensionFailure;
  } else if (episode.has_failure) {
    episode.episode_type = EpisodeType::FailureWithoutRun;
  } else if (episode.has_run && episode.has_suspension) {
    // The bank eventually reopens and does not fail.
    episode.episode_type = EpisodeType::RunSuspensionReopening;
  } else if (episode.has_run) {
    episode.episode_type = EpisodeType::RunOnly;
  } else if (episode.has_suspension) {
    episode.episode_type = EpisodeType::SuspensionOnly;
  } else {
    episode.episode_type = EpisodeType::Other;
  }
  return episode.episode_type;
}

std::vector<DistressEpisode> merge_occ(std::vector<DistressEpisode> episodes,
                                       const std::vector<OccRecord>& occ_records,
                                       const std::set<std::string>& national_bank_ids,
                                       const MergeOccOptions& options) {
  std::map<std::string, std::vector<std::size_t>> occ_by_bank;
  for (std::size_t i = 0; i < occ_records.size(); ++i) {
    occ_by_bank[occ_records[i].bank_id].push_back(i);
  }
  const auto is_national = [&](const std::string& bank_id) {
    return national_bank_ids.empty() ? occ_by_bank.count(bank_id) > 0
                                     : national_bank_ids.count(bank_id) > 0;
  };
  std::vector<bool> used(occ_records.size(), false);
  for (auto& ep : episodes) {
    if (ep.newspaper_silent || !is_national(ep.bank_id)) continue;
    bool confirmed = false;
    const auto it = occ_by_bank.find(ep.bank_id);
    if (it != occ_by_bank.end()) {
      const std::int64_t lo = ep.start_date.to_days() - options.window_days;
      const std::int64_t hi = ep.end_date.to_days() + options.window_days;
      for (const std::size_t i : it->second) {
        const std::int64_t d = occ_records[i].receivership_date.to_days();
        if (d >= lo && d <= hi) {
          confirmed = true;
          used[i] = true;
        }
      }
    }
    ep.occ_confirmed_failure = confirmed;
    classify_episode(ep, false);
  }
  for (std::size_t i = 0; i < occ_records.size(); ++i) {
    if (used[i]) continue;
    const auto& rec = occ_records[i];
    DistressEpisode ep;
    ep.bank_id = rec.bank_id;
    ep.episode_id = rec.bank_id + "-occ-" + rec.receivership_date.to_iso();
    ep.start_date = rec.receivership_date;
    ep.end_date = rec.receivership_date;
    ep.occ_confirmed_failure = true;
    ep.newspaper_silent = true;
    ep.charter_type = CharterType::National;
    classify_episode(ep, false);  // failure_without_run via the OCC confirmation
    episodes.push_back(std::move(ep));
  }
  std::sort(episodes.begin(), episodes.end(),
            [](const DistressEpisode& a, const DistressEpisode& b) {
              if (a.bank_id != b.bank_id) return a.bank_id < b.bank_id;
              if (a.start_date != b.start_date) return a.start_date < b.start_date;
              return a.episode_id < b.episode_id;
            });
  return episodes;
}

std::vector<ArticleRecord> select_articles_for_analysis(
    std::vector<ArticleRecord> articles, std::size_t cap) {
  std::sort(articles.begin(), articles.end(),
            [](const ArticleRecord& a, const ArticleRecord& b) {
              if (a.text.size() != b.text.size()) return a.text.size() > b.text.size();
              if (a.publication_date != b.publication_date) {
                return a.publication_date < b.publication_date;
              }
              return a.article_id < b.article_id;
            });
  if (articles.size() > cap) articles.resize(cap);
  // Hand the selection back in reading order.
  std::sort(articles.begin(), articles.end(),
            [](const ArticleRecord& a, const ArticleRecord& b) {
              if (a.publication_date != b.publication_date) {
                return a.publication_date < b.publication_date;
              }
              return a.article_id < b.article_id;
            });
  return articles;
}

// --- Aggregation -----------------------------------------------------------

int episode_year(const DistressEpisode& e) { return e.start_date.year; }

namespace {

bool filter_accepts(const TabulateFilter& f, const DistressEpisode& e) {
  const int y = episode_year(e);
  if (f.year_min && y < *f.year_min) return false;
  if (f.year_max && y > *f.year_max) return false;
  if (f.years && !f.years->count(y)) return false;
  if (f.charter && e.charter_type != *f.charter) return false;
  return true;
}

}  // namespace

EpisodeCounts count_episodes(const std::vector<DistressEpisode>& episodes,
                             const TabulateFilter& filter) {
  EpisodeCounts c;
  for (const auto& e : episodes) {
    if (!filter_accepts(filter, e)) continue;
    switch (e.episode_type) {
      case EpisodeType::RunOnly: ++c.run_only; break;
      case EpisodeType::RunSuspensionReopening: ++c.run_suspension_reopening; break;
      case EpisodeType::RunSuspensionFailure: ++c.run_suspension_failure; break;
      case EpisodeType::FailureWithoutRun: ++c.failure_without_run; break;
      case EpisodeType::SuspensionOnly: ++c.suspension_only; break;
      case EpisodeType::Other: ++c.other; break;
    }
  }
  return c;
}

std::vector<CountsRow> tabulate(const std::vector<DistressEpisode>& episodes,
                                const std::vector<TabulateFilter>& filters,
                                const std::map<int, long>& banks_per_year) {
  std::vector<CountsRow> rows;
  for (const auto& f : filters) {
    CountsRow row;
    row.label = f.label;
    row.counts = count_episodes(episodes, f);
    if (!banks_per_year.empty()) {
      // Rate denominator: bank-years over the cell's coverage window.
      std::set<int> years;
      if (f.years) {
        years = *f.years;
      } else if (f.year_min && f.year_max) {
        for (int y = *f.year_min; y <= *f.year_max; ++y) years.insert(y);
      } else {
        for (const auto& e : episodes) {
          if (filter_accepts(f, e)) years.insert(episode_year(e));
        }
      }
      long denom = 0;
      for (const int y : years) {
        const auto it = banks_per_year.find(y);
        if (it == banks_per_year.end()) {
          throw MissingDenominatorError("no bank count for year " + std::to_string(y) +
                                        " in cell '" + f.label + "'");
        }
        denom += it->second;
      }
      if (denom > 0) {
        row.run_rate = static_cast<double>(row.counts.runs()) / denom;
        row.failure_rate = static_cast<double>(row.counts.failures()) / denom;
        row.suspension_rate = static_cast<double>(row.counts.suspensions()) / denom;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void save_counts_csv(const std::string& path, const std::vector<CountsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "label,runs,run_only,run_suspension_reopening,run_suspension_failure,"
         "failure_without_run,suspension_only,other,failures,suspensions";
  const bool with_rates =
      std::any_of(rows.begin(), rows.end(), [](const CountsRow& r) {
        return r.run_rate.has_value();
      });
  if (with_rates) out << ",run_rate,failure_rate,suspension_rate";
  out << "\n";
  char buf[64];
  for (const auto& r : rows) {
    out << csv_escape(r.label) << ',' << r.counts.runs() << ',' << r.counts.run_only
        << ',' << r.counts.run_suspension_reopening << ','
        << r.counts.run_suspension_failure << ',' << r.counts.failure_without_run
        << ',' << r.counts.suspension_only << ',' << r.counts.other << ','
        << r.counts.failures() << ',' << r.counts.suspensions();
    if (with_rates) {
      for (const auto& rate : {r.run_rate, r.failure_rate, r.suspension_rate}) {
        out << ',';
        if (rate) {
          std::snprintf(buf, sizeof(buf), "%.6f", *rate);
          out << buf;
        }
      }
    }
    out << "\n";
  }
}

// --- Persistence -----------------------------------------------------------

namespace {

json event_to_json(const ArticleEvent& ev) {
  json j{{"article_id", ev.article_id},
         {"bank_name", ev.bank_name_raw},
         {"state", ev.state_raw},
         {"city", ev.city_raw},
         {"event_type", to_string(ev.event_type)},
         {"event_date", ev.event_date.to_iso()},
         {"date_precision", to_string(ev.date_precision)}};
  if (ev.confidence) j["confidence"] = *ev.confidence;
  if (!ev.bank_id.empty()) j["bank_id"] = ev.bank_id;
  if (ev.state_fips != 0) j["state_fips"] = ev.state_fips;
  if (!ev.canonical_city.empty()) j["canonical_city"] = ev.canonical_city;
  return j;
}

ArticleEvent event_from_json(const json& j) {
  ArticleEvent ev;
  ev.article_id = j.value("article_id", std::string{});
  ev.bank_name_raw = j.value("bank_name", std::string{});
  ev.state_raw = j.value("state", std::string{});
  ev.city_raw = j.value("city", std::string{});
  const auto type = event_type_from_string(j.value("event_type", std::string{}));
  if (!type) throw DataError("bad event_type in event record");
  ev.event_type = *type;
  const auto date = Date::parse(j.value("event_date", std::string{}));
  if (!date) throw DataError("bad event_date in event record");
  ev.event_date = *date;
  if (j.contains("date_precision")) {
    const auto p = precision_from_string(j["date_precision"].get<std::string>());
    if (!p) throw DataError("bad date_precision in event record");
    ev.date_precision = *p;
  } else {
    ev.date_precision = date->precision;
  }
  if (j.contains("confidence")) ev.confidence = j["confidence"].get<double>();
  ev.bank_id = j.value("bank_id", std::string{});
  ev.state_fips = j.value("state_fips", 0);
  ev.canonical_city = j.value("canonical_city", std::string{});
  return ev;
}

json flags_to_json(const ResponseFlags& f) {
  return json{{"accommodated_withdrawals", f.accommodated_withdrawals},
              {"interbank_borrowing", f.interbank_borrowing},
              {"public_signal", f.public_signal},
              {"equity_injection", f.equity_injection},
              {"partial_suspension", f.partial_suspension},
              {"full_suspension", f.full_suspension},
              {"examination", f.examination},
              {"clearinghouse_involved", f.clearinghouse_involved}};
}

ResponseFlags flags_from_json(const json& j) {
  ResponseFlags f;
  f.accommodated_withdrawals = j.value("accommodated_withdrawals", false);
  f.interbank_borrowing = j.value("interbank_borrowing", false);
  f.public_signal = j.value("public_signal", false);
  f.equity_injection = j.value("equity_injection", false);
  f.partial_suspension = j.value("partial_suspension", false);
  f.full_suspension = j.value("full_suspension", false);
  f.examination = j.value("examination", false);
  f.clearinghouse_involved = j.value("clearinghouse_involved", false);
  return f;
}

}  // namespace

void save_events(const std::string& path, const std::vector<ArticleEvent>& events) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& ev : events) out << event_to_json(ev).dump() << "\n";
}

std::vector<ArticleEvent> load_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);
  std::vector<ArticleEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError("bad JSON at " + path + ":" + std::to_string(lineno));
    }
    out.push_back(event_from_json(j));
  }
  return out;
}

void save_episodes(const std::string& path, const std::vector<DistressEpisode>& episodes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& e : episodes) {
    json j{{"episode_id", e.episode_id},
           {"bank_id", e.bank_id},
           {"start_date", e.start_date.to_iso()},
           {"end_date", e.end_date.to_iso()},
           {"episode_type", to_string(e.episode_type)},
           {"has_run", e.has_run},
           {"has_suspension", e.has_suspension},
           {"has_failure", e.has_failure},
           {"has_reopening", e.has_reopening},
           {"responses", flags_to_json(e.response_flags)},
           {"nonfundamental", to_string(e.nonfundamental)},
           {"needs_review", e.needs_review},
           {"newspaper_silent", e.newspaper_silent},
           {"charter_type", to_string(e.charter_type)}};
    if (e.occ_confirmed_failure) j["occ_confirmed_failure"] = *e.occ_confirmed_failure;
    json evs = json::array();
    for (const auto& ev : e.events) evs.push_back(event_to_json(ev));
    j["events"] = std::move(evs);
    out << j.dump() << "\n";
  }
}

std::vector<DistressEpisode> load_episodes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);
  std::vector<DistressEpisode> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw DataError("bad JSON at " + path + ":" + std::to_string(lineno));
    }
    DistressEpisode e;
    e.episode_id = j.value("episode_id", std::string{});
    e.bank_id = j.value("bank_id", std::string{});
    const auto start = Date::parse(j.value("start_date", std::string{}));
    const auto end = Date::parse(j.value("end_date", std::string{}));
    if (!start || !end) throw DataError("bad episode dates at line " + std::to_string(lineno));
    e.start_date = *start;
    e.end_date = *end;
    const auto type = episode_type_from_string(j.value("episode_type", std::string{}));
    if (!type) throw DataError("bad episode_type at line " + std::to_string(lineno));
    e.episode_type = *type;
    e.has_run = j.value("has_run", false);
    e.has_suspension = j.value("has_suspension", false);
    e.has_failure = j.value("has_failure", false);
    e.has_reopening = j.value("has_reopening", false);
    if (j.contains("responses")) e.response_flags = flags_from_json(j["responses"]);
    if (const auto nf = tristate_from_string(j.value("nonfundamental", "unclear"))) {
      e.nonfundamental = *nf;
    }
    e.needs_review = j.value("needs_review", false);
    e.newspaper_silent = j.value("newspaper_silent", false);
    if (const auto ct = charter_type_from_string(j.value("charter_type", "unknown"))) {
      e.charter_type = *ct;
    }
    if (j.contains("occ_confirmed_failure")) {
      e.occ_confirmed_failure = j["occ_confirmed_failure"].get<bool>();
    }
    for (const auto& ev : j.value("events", json::array())) {
      e.events.push_back(event_from_json(ev));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<OccRecord> load_occ_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFoundError(path);
  std::vector<OccRecord> out;
  std::string line;
  bool header = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (header) {
      header = false;
      continue;
    }
    if (trim(line).empty()) continue;
    const auto fields = parse_csv_line(line);
    if (fields.size() < 2) {
      throw DataError("bad receivership row at " + path + ":" + std::to_string(lineno));
    }
    OccRecord rec;
    rec.bank_id = fields[0];
    const auto d = Date::parse(fields[1]);
    if (!d) throw DataError("bad receivership date at line " + std::to_string(lineno));
    rec.receivership_date = *d;
    if (fields.size() > 2 && !fields[2].empty()) {
      rec.deposits_at_suspension = std::stod(fields[2]);
    }
    if (fields.size() > 3) rec.outcome = fields[3];
    out.push_back(std::move(rec));
  }
  return out;
}

void save_occ_records(const std::string& path, const std::vector<OccRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << "bank_id,receivership_date,deposits_at_suspension,outcome\n";
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.2f", r.deposits_at_suspension);
    out << csv_escape(r.bank_id) << ',' << r.receivership_date.to_iso() << ',' << buf
        << ',' << csv_escape(r.outcome) << "\n";
  }
}

}  // namespace bankdist
