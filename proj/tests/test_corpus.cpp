#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "bankdist/corpus.hpp"
#include "bankdist/errors.hpp"

using namespace bankdist;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

ArticleRecord make_record(const std::string& id, const std::string& iso_date,
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

}  // namespace

TEST_CASE("jsonl round trip sorts by date then id") {
  const std::string path = temp_file("corpus_rt.jsonl");
  save_articles(path, {make_record("b", "1893-06-01", "later text"),
                       make_record("a", "1893-05-01", "earlier text"),
                       make_record("c", "1893-05-01", "same day text")});
  const auto loaded = load_articles(path, CorpusFormat::Jsonl);
  CHECK(loaded.errors.empty());
  REQUIRE(loaded.records.size() == 3);
  CHECK(loaded.records[0].article_id == "a");
  CHECK(loaded.records[1].article_id == "c");
  CHECK(loaded.records[2].article_id == "b");
  CHECK(loaded.records[0].text == "earlier text");
  CHECK(loaded.records[0].newspaper_name == "Test Paper");
  std::remove(path.c_str());
}

TEST_CASE("duplicate ids and malformed lines become errors not aborts") {
  const std::string path = temp_file("corpus_bad.jsonl");
  {
    std::ofstream out(path);
    out << R"({"article_id":"x","date":"1893-05-01","text":"one"})" << "\n";
    out << "this is not json\n";
    out << R"({"article_id":"x","date":"1893-05-02","text":"dup"})" << "\n";
    out << R"({"article_id":"y","date":"nonsense","text":"bad date"})" << "\n";
  }
  const auto loaded = load_articles(path, CorpusFormat::Jsonl);
  CHECK(loaded.records.size() == 1);
  REQUIRE(loaded.errors.size() == 3);
  CHECK(loaded.errors[0].line == 2);
  CHECK(loaded.errors[1].line == 3);
  CHECK(loaded.errors[1].article_id == "x");
  std::remove(path.c_str());
}

TEST_CASE("csv corpus uses the header row") {
  const std::string path = temp_file("corpus.csv");
  {
    std::ofstream out(path);
    out << "article_id,date,text,state,city,ocr_quality\n";
    out << "c1,1893-05-01,\"run on the bank, panic\",Ohio,Cincinnati,0.9\n";
    out << "c2,1893-05-02,quiet day,Ohio,Cincinnati,\n";
  }
  const auto loaded = load_articles(path, CorpusFormat::Csv);
  CHECK(loaded.errors.empty());
  REQUIRE(loaded.records.size() == 2);
  CHECK(loaded.records[0].article_id == "c1");
  CHECK(loaded.records[0].text == "run on the bank, panic");
  REQUIRE(loaded.records[0].ocr_quality);
  CHECK(*loaded.records[0].ocr_quality == doctest::Approx(0.9));
  CHECK_FALSE(loaded.records[1].ocr_quality);
  std::remove(path.c_str());
}

TEST_CASE("missing corpus file throws") {
  CHECK_THROWS_AS(load_articles(temp_file("no_such_corpus.jsonl"), CorpusFormat::Jsonl),
                  FileNotFoundError);
}

TEST_CASE("validation rejects and normalizes") {
  auto ok = validate_article(make_record("v1", "1893-05-01", "  a\n run  here "));
  auto* v = std::get_if<ValidatedArticle>(&ok);
  REQUIRE(v);
  CHECK(v->record.text == "a run here");

  auto empty = validate_article(make_record("v2", "1893-05-01", "   \n\t "));
  CHECK(std::get<RejectReason>(empty) == RejectReason::EmptyText);

  auto early = validate_article(make_record("v3", "1799-01-01", "text"));
  CHECK(std::get<RejectReason>(early) == RejectReason::DateOutOfRange);
  auto late = validate_article(make_record("v4", "1968-01-01", "text"));
  CHECK(std::get<RejectReason>(late) == RejectReason::DateOutOfRange);

  auto bad = validate_article(make_record("v5", "1893-05-01", "broken \xff byte"));
  CHECK(std::get<RejectReason>(bad) == RejectReason::BadEncoding);
}

TEST_CASE("synthetic generator is deterministic and honors counts") {
  SynthSpec spec;
  spec.n_articles = 200;
  spec.n_planted_events = 40;
  spec.noise_rate = 0.25;
  spec.rng_seed = 42;
  spec.event_mix = {{EventType::Run, 0.5},
                    {EventType::Suspension, 0.3},
                    {EventType::Failure, 0.2}};
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.articles.size() == 200);
  CHECK(a.ground_truth.size() == 40);
  REQUIRE(a.articles.size() == b.articles.size());
  for (std::size_t i = 0; i < a.articles.size(); ++i) {
    CHECK(a.articles[i].article_id == b.articles[i].article_id);
    CHECK(a.articles[i].text == b.articles[i].text);
    CHECK(a.articles[i].publication_date == b.articles[i].publication_date);
  }

  // Different seed moves the content.
  spec.rng_seed = 43;
  const auto c = generate_synthetic(spec);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.articles.size(); ++i) {
    if (a.articles[i].text != c.articles[i].text) any_diff = true;
  }
  CHECK(any_diff);

  // Ground truth points at real articles and registry banks.
  for (const auto& ev : a.ground_truth) {
    bool found = false;
    for (const auto& rec : a.articles) {
      if (rec.article_id == ev.article_id) {
        found = true;
        CHECK(rec.publication_date == ev.event_date);
      }
    }
    CHECK(found);
    bool in_registry = false;
    for (const auto& bank : a.registry) {
      if (bank.name == ev.bank_name_raw) in_registry = true;
    }
    CHECK(in_registry);
  }
}

TEST_CASE("synthetic generator validates its spec") {
  SynthSpec spec;
  spec.n_articles = 10;
  spec.n_planted_events = 8;
  spec.noise_rate = 0.5;  // 8 planted + 5 decoys > 10
  CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpecError);

  spec.noise_rate = 1.5;
  CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpecError);

  spec.noise_rate = 0.0;
  spec.event_mix = {{EventType::Run, 0.4}, {EventType::Failure, 0.4}};
  CHECK_THROWS_AS(generate_synthetic(spec), InvalidSpecError);
}
