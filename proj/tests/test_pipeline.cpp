#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "bankdist/errors.hpp"
#include "bankdist/pipeline.hpp"

using namespace bankdist;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str(const std::string& leaf = "") const {
    return leaf.empty() ? path.string() : (path / leaf).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config round trips through JSON and digests deterministically") {
  TempDir dir("bankdist_cfg_test");
  PipelineConfig c;
  c.work_dir = dir.str("out");
  c.input_path = "articles.csv";
  c.input_format = CorpusFormat::Csv;
  c.registry_path = "reg.csv";
  c.fit_presets = {"table4", "fig4"};
  c.jobs = 3;
  c.seed = 99;
  c.mock_llm = true;
  c.fixtures_path = "fx.jsonl";
  c.llm.model = "local-test";

  const auto path = dir.str("config.json");
  save_config(path, c);
  const auto loaded = load_config(path);
  CHECK(loaded.work_dir == c.work_dir);
  CHECK(loaded.input_format == CorpusFormat::Csv);
  CHECK(loaded.fit_presets == c.fit_presets);
  CHECK(loaded.jobs == 3);
  CHECK(loaded.seed == 99);
  CHECK(loaded.llm.model == "local-test");
  CHECK(config_digest(loaded) == config_digest(c));

  auto changed = c;
  changed.seed = 100;
  CHECK(config_digest(changed) != config_digest(c));

  std::ofstream bad(dir.str("bad.json"));
  bad << "not json";
  bad.close();
  CHECK_THROWS_AS(load_config(dir.str("bad.json")), ConfigError);
  CHECK_THROWS_AS(load_config(dir.str("missing.json")), ConfigError);

  std::ofstream zero(dir.str("zero.json"));
  zero << "{\"jobs\": 0}";
  zero.close();
  CHECK_THROWS_AS(load_config(dir.str("zero.json")), ConfigError);
}

TEST_CASE("atomic write lands complete files and leaves nothing on failure") {
  TempDir dir("bankdist_atomic_test");
  const auto target = dir.str("artifact.txt");
  atomic_write(target, [](const std::string& tmp) {
    std::ofstream out(tmp);
    out << "payload";
  });
  CHECK(slurp(target) == "payload");
  CHECK_FALSE(fs::exists(target + ".tmp"));

  const auto doomed = dir.str("doomed.txt");
  CHECK_THROWS_AS(atomic_write(doomed,
                               [](const std::string&) {
                                 throw DataError("writer failed");
                               }),
                  DataError);
  CHECK_FALSE(fs::exists(doomed));

  // Overwrite replaces the old content in one step.
  atomic_write(target, [](const std::string& tmp) {
    std::ofstream out(tmp);
    out << "second";
  });
  CHECK(slurp(target) == "second");
}

TEST_CASE("file digest tracks content") {
  TempDir dir("bankdist_digest_test");
  std::ofstream(dir.str("a.txt")) << "same";
  std::ofstream(dir.str("b.txt")) << "same";
  std::ofstream(dir.str("c.txt")) << "different";
  CHECK(file_digest(dir.str("a.txt")) == file_digest(dir.str("b.txt")));
  CHECK(file_digest(dir.str("a.txt")) != file_digest(dir.str("c.txt")));
  CHECK_THROWS_AS(file_digest(dir.str("nope.txt")), FileNotFoundError);
}

TEST_CASE("provenance appends and loads in order") {
  TempDir dir("bankdist_prov_test");
  PipelineConfig c;
  c.work_dir = dir.str("out");
  ProvenanceEntry e1;
  e1.stage = "ingest";
  e1.timestamp_utc = "2026-01-01T00:00:00Z";
  e1.config_digest = config_digest(c);
  e1.inputs = {{"in.jsonl", "abc"}};
  e1.outputs = {{"out.jsonl", "def"}};
  e1.seed = 7;
  append_provenance(c, e1);
  ProvenanceEntry e2 = e1;
  e2.stage = "screen";
  append_provenance(c, e2);

  const auto entries = load_provenance(c.stage_path("provenance.jsonl"));
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].stage == "ingest");
  CHECK(entries[1].stage == "screen");
  CHECK(entries[0].config_digest == config_digest(c));
  CHECK(entries[0].inputs == e1.inputs);
  CHECK(entries[0].outputs == e1.outputs);
  CHECK(entries[0].seed == 7);
  CHECK_THROWS_AS(load_provenance(dir.str("missing.jsonl")), FileNotFoundError);
}

TEST_CASE("stages demand their upstream artifacts by producer name") {
  TempDir dir("bankdist_dep_test");
  PipelineConfig c;
  c.work_dir = dir.str("out");
  c.fixtures_path = dir.str("fx.jsonl");
  std::ofstream(c.fixtures_path) << "";
  try {
    run_stage("screen", c);
    FAIL("expected MissingDependencyError");
  } catch (const MissingDependencyError& e) {
    CHECK(std::string(e.what()).find("ingest") != std::string::npos);
  }
  CHECK_THROWS_AS(run_stage("extract", c), MissingDependencyError);
  CHECK_THROWS_AS(run_stage("tabulate", c), MissingDependencyError);
  CHECK_THROWS_AS(run_stage("fit", c), MissingDependencyError);
  CHECK_THROWS_AS(run_stage("nonsense", c), ConfigError);

  // The mock client refuses to run without canned responses.
  PipelineConfig nofx;
  nofx.work_dir = dir.str("out2");
  nofx.input_path = dir.str("empty.jsonl");
  std::ofstream(nofx.input_path) << "";
  run_stage("ingest", nofx);
  run_stage("screen", nofx);
  CHECK_THROWS_AS(run_stage("extract", nofx), ConfigError);
}

TEST_CASE("full offline pipeline over a synthetic corpus") {
  TempDir dir("bankdist_e2e_test");
  SynthSpec spec;
  spec.n_articles = 80;
  spec.n_planted_events = 16;
  spec.noise_rate = 0.5;
  spec.rng_seed = 21;
  const auto inputs = write_synthetic_inputs(dir.str("inputs"), spec);
  CHECK(fs::exists(inputs.articles_path));
  CHECK(fs::exists(inputs.registry_path));
  CHECK(fs::exists(inputs.gazetteer_path));
  CHECK(fs::exists(inputs.fixtures_path));
  REQUIRE(inputs.truth.ground_truth.size() == 16);

  PipelineConfig c;
  c.work_dir = dir.str("out");
  c.input_path = inputs.articles_path;
  c.registry_path = inputs.registry_path;
  c.gazetteer_path = inputs.gazetteer_path;
  c.fixtures_path = inputs.fixtures_path;
  c.mock_llm = true;
  c.jobs = 2;
  c.seed = 21;
  run_stage("pipeline", c);

  for (const char* artifact :
       {"articles.jsonl", "ingest_errors.jsonl", "hits.jsonl", "events.jsonl",
        "screen_verdicts.jsonl", "extract_rejects.txt", "resolved.jsonl",
        "unmatched.jsonl", "episodes.jsonl", "counts.csv", "panel.csv",
        "panel_warnings.txt", "fits.csv", "provenance.jsonl"}) {
    CHECK(fs::exists(c.stage_path(artifact)));
  }

  // Every planted event came back resolved to a registry bank.
  const auto resolved = load_events(c.stage_path("resolved.jsonl"));
  CHECK(resolved.size() == inputs.truth.ground_truth.size());
  std::set<std::string> registry_ids;
  for (const auto& b : inputs.truth.registry) registry_ids.insert(b.bank_id);
  std::set<std::string> truth_articles;
  for (const auto& ev : inputs.truth.ground_truth) truth_articles.insert(ev.article_id);
  for (const auto& ev : resolved) {
    CHECK(registry_ids.count(ev.bank_id) == 1);
    CHECK(truth_articles.count(ev.article_id) == 1);
  }

  // Episodes cover exactly the resolved banks and carry run evidence.
  const auto episodes = load_episodes(c.stage_path("episodes.jsonl"));
  CHECK_FALSE(episodes.empty());
  std::size_t events_in_episodes = 0;
  for (const auto& ep : episodes) {
    CHECK(registry_ids.count(ep.bank_id) == 1);
    CHECK(ep.has_run);
    events_in_episodes += ep.events.size();
  }
  CHECK(events_in_episodes == resolved.size());

  // The counts table reports one aggregate row whose total matches.
  const auto counts = slurp(c.stage_path("counts.csv"));
  CHECK(counts.find("label") != std::string::npos);
  CHECK(counts.find("all") != std::string::npos);

  // Provenance records one entry per stage, in execution order, under the
  // digest of the config that ran.
  const auto prov = load_provenance(c.stage_path("provenance.jsonl"));
  REQUIRE(prov.size() == 8);
  const std::vector<std::string> expected = {"ingest", "screen", "extract",
                                             "resolve", "episodes", "tabulate",
                                             "panel", "fit"};
  for (std::size_t i = 0; i < prov.size(); ++i) {
    CHECK(prov[i].stage == expected[i]);
    CHECK(prov[i].config_digest == config_digest(c));
    CHECK(prov[i].seed == 21);
    CHECK_FALSE(prov[i].outputs.empty());
  }

  // Re-running a single stage appends new provenance with fresh digests.
  run_stage("tabulate", c);
  CHECK(load_provenance(c.stage_path("provenance.jsonl")).size() == 9);

  // Reports render from the assembled artifacts.
  run_report("fig1", c);
  run_report("fig6", c);
  for (const char* name : {"report_fig1", "report_fig6"}) {
    const auto csv = slurp(c.stage_path(std::string(name) + ".csv"));
    CHECK_FALSE(csv.empty());
    const auto svg = slurp(c.stage_path(std::string(name) + ".svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("<!-- data:") != std::string::npos);
  }
  CHECK_THROWS_AS(run_report("figZ", c), ConfigError);

  // Serial and parallel screening agree end to end.
  PipelineConfig serial = c;
  serial.work_dir = dir.str("out_serial");
  serial.jobs = 1;
  run_stage("pipeline", serial);
  CHECK(file_digest(serial.stage_path("hits.jsonl")) ==
        file_digest(c.stage_path("hits.jsonl")));
  CHECK(file_digest(serial.stage_path("resolved.jsonl")) ==
        file_digest(c.stage_path("resolved.jsonl")));
  CHECK(file_digest(serial.stage_path("episodes.jsonl")) ==
        file_digest(c.stage_path("episodes.jsonl")));
}

TEST_CASE("explicit unknown fit preset is a configuration error") {
  TempDir dir("bankdist_fitcfg_test");
  SynthSpec spec;
  spec.n_articles = 20;
  spec.n_planted_events = 4;
  spec.rng_seed = 2;
  const auto inputs = write_synthetic_inputs(dir.str("inputs"), spec);
  PipelineConfig c;
  c.work_dir = dir.str("out");
  c.input_path = inputs.articles_path;
  c.registry_path = inputs.registry_path;
  c.gazetteer_path = inputs.gazetteer_path;
  c.fixtures_path = inputs.fixtures_path;
  c.fit_presets = {"tableX"};
  CHECK_THROWS_AS(run_stage("pipeline", c), ConfigError);

  const auto known = available_fit_presets();
  CHECK_FALSE(known.empty());
  for (const char* p : {"table2", "table4", "table5", "table6", "table7",
                        "fig4", "fig5", "fig7", "fig8", "figA1"}) {
    CHECK(std::find(known.begin(), known.end(), p) != known.end());
  }
}

TEST_CASE("svg charts embed their data tables") {
  TempDir dir("bankdist_svg_test");
  const auto line_path = dir.str("line.svg");
  write_svg_line_chart(line_path, "Runs & failures <by year>",
                       {{"runs", {{1890, 3}, {1891, 5}, {1893, 12}}},
                        {"failures", {{1890, 1}, {1891, 2}, {1893, 9}}}});
  const auto line = slurp(line_path);
  CHECK(line.find("<svg") != std::string::npos);
  CHECK(line.find("</svg>") != std::string::npos);
  CHECK(line.find("<!-- data:") != std::string::npos);
  // Titles are escaped, never raw markup.
  CHECK(line.find("<by year>") == std::string::npos);
  CHECK(line.find("&amp;") != std::string::npos);
  CHECK(line.find("1893") != std::string::npos);

  const auto bar_path = dir.str("bar.svg");
  write_svg_bar_chart(bar_path, "Decile pass-through",
                      {{"d1", 0.4}, {"d2", 0.1}, {"d10", -0.05}});
  const auto bar = slurp(bar_path);
  CHECK(bar.find("<svg") != std::string::npos);
  CHECK(bar.find("<!-- data:") != std::string::npos);
  CHECK(bar.find("d10") != std::string::npos);
}
