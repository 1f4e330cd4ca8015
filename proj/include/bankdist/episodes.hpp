#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "bankdist/corpus.hpp"
#include "bankdist/entities.hpp"
#include "bankdist/events.hpp"
#include "bankdist/llmgate.hpp"

namespace bankdist {

enum class EpisodeType {
  RunOnly,
  RunSuspensionReopening,
  RunSuspensionFailure,
  FailureWithoutRun,
  SuspensionOnly,  // suspension without run or failure
  Other,
};
std::string to_string(EpisodeType t);
std::optional<EpisodeType> episode_type_from_string(const std::string& s);

struct DistressEpisode {
  std::string episode_id;
  std::string bank_id;
  std::vector<ArticleEvent> events;  // time ordered
  Date start_date;
  Date end_date;
  EpisodeType episode_type = EpisodeType::Other;
  bool has_run = false;
  bool has_suspension = false;
  bool has_failure = false;
  bool has_reopening = false;
  ResponseFlags response_flags;
  TriState nonfundamental = TriState::Unclear;
  bool needs_review = false;
  std::optional<bool> occ_confirmed_failure;  // national banks only
  bool newspaper_silent = false;              // synthetic episode from an OCC record
  CharterType charter_type = CharterType::Unknown;
};

struct OccRecord {
  std::string bank_id;
  Date receivership_date;
  double deposits_at_suspension = 0.0;
  std::string outcome;
};

struct GroupOptions {
  int gap_days = 365;
  // Alternative reading of the grouping rule: cap the total episode span at
  // gap_days instead of each consecutive gap.
  bool span_cap = false;
};

// Clusters resolved events into per-bank episodes. A new episode starts when
// the gap to the previous event exceeds gap_days (boundary inclusive: a gap
// of exactly gap_days stays in the episode). Output order and content are
// independent of input order. Throws UnresolvedBankError on empty bank_id.
std::vector<DistressEpisode> group_events(const std::vector<ArticleEvent>& events,
                                          const GroupOptions& options = {});

// Derives the has_* flags from the event list (plus any OCC confirmation) and
// assigns the episode type. When strict, a failure with no suspension
// evidence and no OCC confirmation throws InconsistentEventsError; otherwise
// the suspension is imputed and the episode is flagged needs_review.
EpisodeType classify_episode(DistressEpisode& episode, bool strict = true);

struct MergeOccOptions {
  int window_days = 90;  // configurable up to 540 for 1933-34 receiverships
};

// Annotates national-bank episodes with OCC confirmation and appends
// synthetic failure_without_run episodes for receiverships the newspapers
// never reported. Never drops or edits newspaper events.
std::vector<DistressEpisode> merge_occ(std::vector<DistressEpisode> episodes,
                                       const std::vector<OccRecord>& occ_records,
                                       const std::set<std::string>& national_bank_ids,
                                       const MergeOccOptions& options = {});

// Picks the episode's articles for the capped joint query: longest text
// first, ties broken by earlier publication date, then article_id.
std::vector<ArticleRecord> select_articles_for_analysis(
    std::vector<ArticleRecord> articles, std::size_t cap = kMaxEpisodeArticles);

// --- Aggregation -----------------------------------------------------------

struct EpisodeCounts {
  long run_only = 0;
  long run_suspension_reopening = 0;
  long run_suspension_failure = 0;
  long failure_without_run = 0;
  long suspension_only = 0;
  long other = 0;

  long runs() const {
    return run_only + run_suspension_reopening + run_suspension_failure;
  }
  long failures() const { return run_suspension_failure + failure_without_run; }
  long suspensions() const {
    return run_suspension_reopening + run_suspension_failure +
           failure_without_run + suspension_only;
  }
  long total() const {
    return run_only + run_suspension_reopening + run_suspension_failure +
           failure_without_run + suspension_only + other;
  }
};

struct TabulateFilter {
  std::string label = "all";
  std::optional<int> year_min;
  std::optional<int> year_max;
  std::optional<std::set<int>> years;  // e.g. crisis years
  std::optional<CharterType> charter;
};

// Episode year = calendar year of the first event.
int episode_year(const DistressEpisode& e);

EpisodeCounts count_episodes(const std::vector<DistressEpisode>& episodes,
                             const TabulateFilter& filter = {});

struct CountsRow {
  std::string label;
  EpisodeCounts counts;
  // Average annual rates per bank, present when a denominator was supplied.
  std::optional<double> run_rate;
  std::optional<double> failure_rate;
  std::optional<double> suspension_rate;
};

// One row per filter. banks_per_year supplies the rate denominator (number
// of active banks); throws MissingDenominatorError when a covered year is
// absent from a non-empty denominator map.
std::vector<CountsRow> tabulate(const std::vector<DistressEpisode>& episodes,
                                const std::vector<TabulateFilter>& filters,
                                const std::map<int, long>& banks_per_year = {});

void save_counts_csv(const std::string& path, const std::vector<CountsRow>& rows);

// --- Persistence -----------------------------------------------------------

void save_episodes(const std::string& path, const std::vector<DistressEpisode>& episodes);
std::vector<DistressEpisode> load_episodes(const std::string& path);

void save_events(const std::string& path, const std::vector<ArticleEvent>& events);
std::vector<ArticleEvent> load_events(const std::string& path);

std::vector<OccRecord> load_occ_records(const std::string& path);  // CSV
void save_occ_records(const std::string& path, const std::vector<OccRecord>& records);

}  // namespace bankdist
