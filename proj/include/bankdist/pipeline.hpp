#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bankdist/corpus.hpp"
#include "bankdist/episodes.hpp"
#include "bankdist/llmgate.hpp"
#include "bankdist/metrics.hpp"
#include "bankdist/panel.hpp"
#include "bankdist/textfilter.hpp"

namespace bankdist {

inline constexpr const char* kToolVersion = "0.1.0";

struct PipelineConfig {
  std::string work_dir = "out";

  // Inputs
  std::string input_path;
  CorpusFormat input_format = CorpusFormat::Jsonl;
  std::string rules_path;          // empty: built-in rule set
  std::string registry_path;
  std::string name_crosswalk_path;
  std::string gazetteer_path;
  std::string city_crosswalk_path;
  std::string occ_path;
  std::string balances_path;
  std::string covariates_path;
  std::string state_failures_path;
  std::string national_banks_path;  // one bank_id per line
  std::string crisis_path;          // monthly crisis dummies for table2

  // LLM
  LlmConfig llm;
  bool mock_llm = true;
  std::string fixtures_path;       // canned responses for the mock client

  int jobs = 1;
  std::uint64_t seed = 0;
  int occ_window_days = 90;
  std::vector<std::string> fit_presets;  // empty: every feasible preset

  std::string stage_path(const std::string& artifact) const;
};

PipelineConfig load_config(const std::string& path);  // JSON
void save_config(const std::string& path, const PipelineConfig& config);

// Serializes the config deterministically; digest goes into provenance.
std::string config_digest(const PipelineConfig& config);

// Writes via a temp file in the same directory and renames into place, so
// an interrupted run never leaves a partial artifact at the final path.
void atomic_write(const std::string& path,
                  const std::function<void(const std::string& tmp_path)>& writer);

struct ProvenanceEntry {
  std::string stage;
  std::string timestamp_utc;
  std::string config_digest;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, digest
  std::vector<std::pair<std::string, std::string>> outputs;  // path, digest
  std::uint64_t seed = 0;
};

void append_provenance(const PipelineConfig& config, const ProvenanceEntry& entry);
std::vector<ProvenanceEntry> load_provenance(const std::string& path);
std::string file_digest(const std::string& path);

// Stage names: ingest, screen, extract, resolve, episodes, tabulate, panel,
// fit, pipeline (= all of the preceding in order). Throws
// MissingDependencyError when a required earlier artifact is absent.
void run_stage(const std::string& stage, const PipelineConfig& config);

// Report presets: fig1 (run-rate time series), fig5 (decile pass-through
// bars), fig6 (response-measure shares). Emits a tidy CSV and an SVG.
void run_report(const std::string& preset, const PipelineConfig& config);

// Named regression presets over the assembled panel/episodes. table2 needs
// a monthly crisis-dummy CSV (year,month,crisis_year,panic_month,
// regional_panic).
std::vector<std::string> available_fit_presets();
std::vector<TidyRow> run_fit_preset(const std::string& name,
                                    std::vector<BankYearRow>& panel,
                                    const std::vector<DistressEpisode>& episodes,
                                    const std::string& crisis_csv = "");

// --- SVG plots -------------------------------------------------------------

struct SvgSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// Self-contained SVG line chart; the data table rides along as an XML
// comment so the artifact is diffable without a renderer.
void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::vector<SvgSeries>& series);

void write_svg_bar_chart(const std::string& path, const std::string& title,
                         const std::vector<std::pair<std::string, double>>& bars);

// --- Synthetic end-to-end inputs -------------------------------------------

struct SyntheticInputs {
  std::string articles_path;
  std::string registry_path;
  std::string gazetteer_path;
  std::string fixtures_path;
  SynthResult truth;
};

// Generates a synthetic corpus plus the matching registry, gazetteer, and
// mock-client fixtures so the whole pipeline can run offline.
SyntheticInputs write_synthetic_inputs(const std::string& dir, const SynthSpec& spec);

}  // namespace bankdist
