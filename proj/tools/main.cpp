#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bankdist/errors.hpp"
#include "bankdist/pipeline.hpp"

using namespace bankdist;

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Newspaper-based bank distress pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  int jobs = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool mock_llm = false;
  bool real_llm = false;
  app.add_option("--config", config_path, "JSON config file")->envname("BANKDIST_CONFIG");
  app.add_option("--jobs", jobs, "worker threads for CPU-bound stages");
  app.add_option_function<std::uint64_t>(
      "--seed", [&](std::uint64_t v) { seed = v; seed_set = true; },
      "RNG seed recorded in provenance");
  app.add_flag("--mock-llm,!--no-mock-llm", mock_llm,
               "use canned responses instead of a live model");

  const auto load = [&]() {
    PipelineConfig c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
    if (jobs > 0) c.jobs = jobs;
    if (seed_set) c.seed = seed;
    if (app.count("--mock-llm") || app.count("--no-mock-llm")) c.mock_llm = mock_llm;
    return c;
  };

  // One subcommand per stage; "pipeline" chains them all.
  for (const char* stage : {"ingest", "screen", "extract", "resolve", "episodes",
                            "tabulate", "panel", "fit", "pipeline"}) {
    auto* sub = app.add_subcommand(stage, std::string("run the ") + stage + " stage");
    sub->callback([&load, stage] { run_stage(stage, load()); });
  }

  auto* report = app.add_subcommand("report", "render a figure preset (CSV + SVG)");
  std::string report_preset;
  report->add_option("preset", report_preset, "fig1, fig5 or fig6")->required();
  report->callback([&] { run_report(report_preset, load()); });

  auto* synth = app.add_subcommand("synth", "write a synthetic test corpus");
  std::string synth_dir = "synth";
  std::size_t n_articles = 1000, n_planted = 100;
  double noise = 0.5;
  synth->add_option("--out-dir", synth_dir, "output directory");
  synth->add_option("--articles", n_articles, "total articles");
  synth->add_option("--planted", n_planted, "planted distress events");
  synth->add_option("--noise", noise, "decoy share");
  synth->callback([&] {
    SynthSpec spec;
    spec.n_articles = n_articles;
    spec.n_planted_events = n_planted;
    spec.noise_rate = noise;
    spec.rng_seed = seed;
    const auto inputs = write_synthetic_inputs(synth_dir, spec);
    std::cout << inputs.articles_path << "\n"
              << inputs.registry_path << "\n"
              << inputs.gazetteer_path << "\n"
              << inputs.fixtures_path << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidSpecError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingDependencyError& e) {
    std::cerr << "missing dependency: " << e.what() << "\n";
    return 3;
  } catch (const LlmUnavailableError& e) {
    std::cerr << "llm unavailable: " << e.what() << "\n";
    return 5;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
