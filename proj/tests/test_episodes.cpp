#include "doctest.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <random>

#include "bankdist/episodes.hpp"
#include "bankdist/errors.hpp"

using namespace bankdist;

namespace {

ArticleEvent event(const std::string& bank_id, const std::string& iso_date,
                   EventType type, const std::string& article_id = "") {
  ArticleEvent ev;
  ev.article_id = article_id.empty() ? bank_id + "-" + iso_date : article_id;
  ev.bank_id = bank_id;
  ev.bank_name_raw = "Bank " + bank_id;
  ev.event_type = type;
  ev.event_date = *Date::parse(iso_date);
  return ev;
}

}  // namespace

TEST_CASE("grouping splits on gaps above the threshold, boundary inclusive") {
  // 365-day gap stays together; 366 splits.
  auto joined = group_events({event("A", "1893-05-04", EventType::Run),
                              event("A", "1894-05-04", EventType::Suspension)});
  REQUIRE(joined.size() == 1);
  CHECK(joined[0].events.size() == 2);
  CHECK(joined[0].episode_id == "A-1");
  CHECK(joined[0].start_date == Date{1893, 5, 4});
  CHECK(joined[0].end_date == Date{1894, 5, 4});

  auto split = group_events({event("A", "1893-05-04", EventType::Run),
                             event("A", "1894-05-05", EventType::Suspension)});
  REQUIRE(split.size() == 2);
  CHECK(split[0].episode_id == "A-1");
  CHECK(split[1].episode_id == "A-2");

  // Consecutive-gap chaining: each link is 300 days so the chain spans
  // more than a year yet stays one episode.
  auto chain = group_events({event("A", "1890-01-01", EventType::Run),
                             event("A", "1890-10-28", EventType::Suspension),
                             event("A", "1891-08-24", EventType::Reopening)});
  CHECK(chain.size() == 1);

  // The span-cap alternative splits the same chain.
  GroupOptions cap;
  cap.span_cap = true;
  auto capped = group_events({event("A", "1890-01-01", EventType::Run),
                              event("A", "1890-10-28", EventType::Suspension),
                              event("A", "1891-08-24", EventType::Reopening)},
                             cap);
  CHECK(capped.size() == 2);
}

TEST_CASE("grouping is a partition and input-order independent") {
  std::vector<ArticleEvent> events;
  std::mt19937_64 rng(99);
  const char* banks[] = {"A", "B", "C"};
  for (int i = 0; i < 120; ++i) {
    const auto day = static_cast<std::int64_t>(rng() % 8000);
    events.push_back(event(banks[rng() % 3],
                           Date{1880, 1, 1}.add_days(day).to_iso(), EventType::Run,
                           "art-" + std::to_string(i)));
  }
  auto baseline = group_events(events);

  // Every event appears in exactly one episode of its own bank.
  std::size_t total = 0;
  for (const auto& ep : baseline) {
    total += ep.events.size();
    for (const auto& ev : ep.events) CHECK(ev.bank_id == ep.bank_id);
    for (std::size_t i = 1; i < ep.events.size(); ++i) {
      CHECK(ep.events[i - 1].event_date <= ep.events[i].event_date);
      CHECK(ep.events[i].event_date.to_days() -
                ep.events[i - 1].event_date.to_days() <=
            365);
    }
  }
  CHECK(total == events.size());

  auto shuffled = events;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  auto again = group_events(shuffled);
  REQUIRE(again.size() == baseline.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].episode_id == baseline[i].episode_id);
    REQUIRE(again[i].events.size() == baseline[i].events.size());
    for (std::size_t j = 0; j < again[i].events.size(); ++j) {
      CHECK(again[i].events[j].article_id == baseline[i].events[j].article_id);
    }
  }
}

TEST_CASE("grouping rejects unresolved events") {
  ArticleEvent ev = event("A", "1893-05-04", EventType::Run);
  ev.bank_id.clear();
  CHECK_THROWS_AS(group_events({ev}), UnresolvedBankError);
}

TEST_CASE("classification covers the type lattice") {
  const auto classify = [](std::vector<EventType> types) {
    DistressEpisode ep;
    int day = 1;
    for (auto t : types) {
      ep.events.push_back(event("X", Date{1893, 5, day++}.to_iso(), t));
    }
    return classify_episode(ep);
  };
  CHECK(classify({EventType::Run}) == EpisodeType::RunOnly);
  CHECK(classify({EventType::Run, EventType::Suspension}) ==
        EpisodeType::RunSuspensionReopening);
  CHECK(classify({EventType::Run, EventType::Suspension, EventType::Failure}) ==
        EpisodeType::RunSuspensionFailure);
  CHECK(classify({EventType::Suspension, EventType::Failure}) ==
        EpisodeType::FailureWithoutRun);
  CHECK(classify({EventType::Suspension}) == EpisodeType::SuspensionOnly);
  CHECK(classify({EventType::PartialSuspension}) == EpisodeType::SuspensionOnly);
  CHECK(classify({EventType::Other}) == EpisodeType::Other);
  CHECK(classify({EventType::Suspension, EventType::Receivership}) ==
        EpisodeType::FailureWithoutRun);
}

TEST_CASE("failure without suspension evidence") {
  DistressEpisode strict_ep;
  strict_ep.events.push_back(event("X", "1893-05-04", EventType::Failure));
  CHECK_THROWS_AS(classify_episode(strict_ep), InconsistentEventsError);

  DistressEpisode lenient_ep;
  lenient_ep.events.push_back(event("X", "1893-05-04", EventType::Failure));
  CHECK(classify_episode(lenient_ep, false) == EpisodeType::FailureWithoutRun);
  CHECK(lenient_ep.needs_review);
  CHECK(lenient_ep.has_suspension);  // imputed

  // A receivership confirmation legitimizes the missing suspension report.
  DistressEpisode confirmed;
  confirmed.events.push_back(event("X", "1893-05-04", EventType::Failure));
  confirmed.occ_confirmed_failure = true;
  CHECK(classify_episode(confirmed) == EpisodeType::FailureWithoutRun);
  CHECK_FALSE(confirmed.needs_review);
}

TEST_CASE("classification is idempotent") {
  DistressEpisode ep;
  ep.events.push_back(event("X", "1893-05-01", EventType::Run));
  ep.events.push_back(event("X", "1893-05-02", EventType::Suspension));
  const auto first = classify_episode(ep);
  const auto second = classify_episode(ep);
  CHECK(first == second);
  CHECK(ep.has_run);
  CHECK_FALSE(ep.has_failure);
}

TEST_CASE("receivership merge confirms, refutes, and backfills") {
  auto episodes = group_events({event("N1", "1893-05-04", EventType::Run),
                                event("N1", "1893-05-10", EventType::Suspension),
                                event("N2", "1893-06-01", EventType::Run),
                                event("S1", "1893-07-01", EventType::Run)});
  for (auto& ep : episodes) classify_episode(ep);

  std::vector<OccRecord> occ;
  occ.push_back({"N1", Date{1893, 6, 20}, 150000.0, "receivership"});
  occ.push_back({"N3", Date{1893, 9, 1}, 80000.0, "receivership"});

  const auto merged = merge_occ(episodes, occ, {"N1", "N2", "N3"}, {90});
  REQUIRE(merged.size() == 4);

  const auto find = [&](const std::string& bank) -> const DistressEpisode& {
    for (const auto& ep : merged) {
      if (ep.bank_id == bank) return ep;
    }
    throw std::runtime_error("missing " + bank);
  };

  // In-window receivership upgrades the episode to a failure.
  const auto& n1 = find("N1");
  REQUIRE(n1.occ_confirmed_failure);
  CHECK(*n1.occ_confirmed_failure);
  CHECK(n1.episode_type == EpisodeType::RunSuspensionFailure);
  CHECK(n1.events.size() == 2);  // newspaper events untouched

  // National bank with no matching record: affirmatively not a failure.
  const auto& n2 = find("N2");
  REQUIRE(n2.occ_confirmed_failure);
  CHECK_FALSE(*n2.occ_confirmed_failure);
  CHECK(n2.episode_type == EpisodeType::RunOnly);

  // Non-national banks are never annotated.
  CHECK_FALSE(find("S1").occ_confirmed_failure.has_value());

  // Unreported receivership appears as a newspaper-silent episode.
  const auto& n3 = find("N3");
  CHECK(n3.newspaper_silent);
  CHECK(n3.episode_type == EpisodeType::FailureWithoutRun);
  CHECK(n3.charter_type == CharterType::National);
  CHECK(n3.start_date == Date{1893, 9, 1});
}

TEST_CASE("merge window boundaries") {
  auto base = group_events({event("N1", "1893-05-04", EventType::Run)});
  classify_episode(base[0]);
  const auto at_edge =
      merge_occ(base, {{"N1", Date{1893, 5, 4}.add_days(90), 0.0, ""}}, {"N1"}, {90});
  REQUIRE(at_edge.size() == 1);
  CHECK(*at_edge[0].occ_confirmed_failure);

  auto base2 = group_events({event("N1", "1893-05-04", EventType::Run)});
  classify_episode(base2[0]);
  const auto past_edge =
      merge_occ(base2, {{"N1", Date{1893, 5, 4}.add_days(91), 0.0, ""}}, {"N1"}, {90});
  // Outside the window: unconfirmed episode plus a silent failure.
  REQUIRE(past_edge.size() == 2);
  CHECK_FALSE(*past_edge[0].occ_confirmed_failure);
  CHECK(past_edge[1].newspaper_silent);
}

TEST_CASE("article selection for the joint query") {
  std::vector<ArticleRecord> articles;
  for (int i = 0; i < 30; ++i) {
    ArticleRecord a;
    a.article_id = "a" + std::to_string(i);
    a.publication_date = Date{1893, 5, 1}.add_days(i);
    a.text = std::string(static_cast<std::size_t>(10 + (i * 7) % 30), 'x');
    articles.push_back(std::move(a));
  }
  const auto picked = select_articles_for_analysis(articles, 25);
  CHECK(picked.size() == 25);
  // Reading order.
  for (std::size_t i = 1; i < picked.size(); ++i) {
    CHECK(picked[i - 1].publication_date <= picked[i].publication_date);
  }
  // The shortest articles were the ones cut.
  std::size_t shortest_kept = 1000;
  for (const auto& a : picked) shortest_kept = std::min(shortest_kept, a.text.size());
  std::size_t longest_cut = 0;
  for (const auto& a : articles) {
    const bool kept = std::any_of(picked.begin(), picked.end(), [&](const auto& p) {
      return p.article_id == a.article_id;
    });
    if (!kept) longest_cut = std::max(longest_cut, a.text.size());
  }
  CHECK(longest_cut <= shortest_kept);
}

TEST_CASE("count identities and filters") {
  std::vector<DistressEpisode> episodes;
  const auto add = [&](EpisodeType t, int year, CharterType ct) {
    DistressEpisode ep;
    ep.episode_type = t;
    ep.start_date = Date{year, 6, 1};
    ep.end_date = ep.start_date;
    ep.charter_type = ct;
    episodes.push_back(std::move(ep));
  };
  add(EpisodeType::RunOnly, 1893, CharterType::National);
  add(EpisodeType::RunOnly, 1893, CharterType::State);
  add(EpisodeType::RunSuspensionReopening, 1893, CharterType::National);
  add(EpisodeType::RunSuspensionFailure, 1894, CharterType::State);
  add(EpisodeType::FailureWithoutRun, 1894, CharterType::National);
  add(EpisodeType::SuspensionOnly, 1895, CharterType::State);
  add(EpisodeType::Other, 1895, CharterType::National);

  const auto all = count_episodes(episodes);
  CHECK(all.runs() == 4);
  CHECK(all.failures() == 2);
  CHECK(all.suspensions() == 4);
  CHECK(all.total() == 7);

  TabulateFilter y93;
  y93.year_min = 1893;
  y93.year_max = 1893;
  CHECK(count_episodes(episodes, y93).total() == 3);

  TabulateFilter crisis;
  crisis.years = std::set<int>{1893, 1895};
  CHECK(count_episodes(episodes, crisis).total() == 5);

  TabulateFilter national;
  national.charter = CharterType::National;
  CHECK(count_episodes(episodes, national).total() == 4);

  // Rates divide by summed bank-years of the covered window.
  const std::map<int, long> denom = {{1893, 100}, {1894, 200}, {1895, 100}};
  const auto rows = tabulate(episodes, {y93}, denom);
  REQUIRE(rows.size() == 1);
  REQUIRE(rows[0].run_rate);
  CHECK(*rows[0].run_rate == doctest::Approx(3.0 / 100));

  TabulateFilter wide;
  wide.year_min = 1893;
  wide.year_max = 1896;  // 1896 missing from the denominator
  CHECK_THROWS_AS(tabulate(episodes, {wide}, denom), MissingDenominatorError);
  // Without a denominator the same filter is fine.
  CHECK(tabulate(episodes, {wide}).size() == 1);
}

TEST_CASE("episodes survive a save and load round trip") {
  auto episodes = group_events({event("A", "1893-05-04", EventType::Run),
                                event("A", "1893-05-10", EventType::Suspension),
                                event("B", "1901-02-01", EventType::Failure)});
  for (auto& ep : episodes) classify_episode(ep, false);
  episodes[0].response_flags.clearinghouse_involved = true;
  episodes[0].nonfundamental = TriState::Yes;
  episodes[1].occ_confirmed_failure = true;

  const auto path =
      (std::filesystem::temp_directory_path() / "episodes_rt.jsonl").string();
  save_episodes(path, episodes);
  const auto loaded = load_episodes(path);
  REQUIRE(loaded.size() == episodes.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].episode_id == episodes[i].episode_id);
    CHECK(loaded[i].bank_id == episodes[i].bank_id);
    CHECK(loaded[i].episode_type == episodes[i].episode_type);
    CHECK(loaded[i].start_date == episodes[i].start_date);
    CHECK(loaded[i].end_date == episodes[i].end_date);
    CHECK(loaded[i].needs_review == episodes[i].needs_review);
    CHECK(loaded[i].events.size() == episodes[i].events.size());
    CHECK(loaded[i].occ_confirmed_failure == episodes[i].occ_confirmed_failure);
    CHECK(loaded[i].nonfundamental == episodes[i].nonfundamental);
    CHECK(loaded[i].response_flags.clearinghouse_involved ==
          episodes[i].response_flags.clearinghouse_involved);
  }
  std::remove(path.c_str());
}

TEST_CASE("receivership records round trip through CSV") {
  const auto path =
      (std::filesystem::temp_directory_path() / "occ_rt.csv").string();
  std::vector<OccRecord> records = {{"N1", Date{1893, 6, 20}, 150000.25, "receivership"},
                                    {"N2", Date{1901, 1, 2}, 0.0, "restored"}};
  save_occ_records(path, records);
  const auto loaded = load_occ_records(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].bank_id == "N1");
  CHECK(loaded[0].receivership_date == Date{1893, 6, 20});
  CHECK(loaded[0].deposits_at_suspension == doctest::Approx(150000.25));
  CHECK(loaded[0].outcome == "receivership");
  std::remove(path.c_str());
}
