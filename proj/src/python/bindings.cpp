#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bankdist/entities.hpp"
#include "bankdist/errors.hpp"
#include "bankdist/metrics.hpp"
#include "bankdist/panel.hpp"
#include "bankdist/pipeline.hpp"
#include "bankdist/textfilter.hpp"
#include "bankdist/util.hpp"

namespace py = pybind11;
using namespace bankdist;

PYBIND11_MODULE(_bankdist, m) {
  m.doc() = "Bank distress pipeline core";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "BankdistError");

  m.def("symmetric_growth", &symmetric_growth, py::arg("y_from"), py::arg("y_to"),
        "Symmetric growth rate, bounded in [-2, 2]");
  m.def("auc", &auc, py::arg("scores"), py::arg("labels"),
        "Exact Mann-Whitney AUC with midpoint tie handling");
  m.def("edit_distance", &edit_distance, py::arg("a"), py::arg("b"));
  m.def("normalize_bank_name", &normalize_bank_name, py::arg("raw"), py::arg("city"));
  m.def("fnv1a_hex", [](const std::string& s) { return fnv1a_hex(s); }, py::arg("data"));

  m.def(
      "clean_text",
      [](const std::string& text) { return clean_text(text, default_filter_config()); },
      py::arg("text"), "Clean with the shipped removal phrases");
  m.def(
      "match_rules",
      [](const std::string& text) {
        const auto config = default_filter_config();
        std::vector<std::string> out;
        for (const auto r : match_rules(clean_text(text, config), config)) {
          out.push_back(to_string(r));
        }
        return out;
      },
      py::arg("text"), "Names of the keyword rules the text triggers");

  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config_path) {
        run_stage(stage, load_config(config_path));
      },
      py::arg("stage"), py::arg("config_path"));

  m.def(
      "write_synthetic_inputs",
      [](const std::string& dir, std::size_t n_articles, std::size_t n_planted,
         double noise_rate, std::uint64_t seed) {
        SynthSpec spec;
        spec.n_articles = n_articles;
        spec.n_planted_events = n_planted;
        spec.noise_rate = noise_rate;
        spec.rng_seed = seed;
        const auto r = write_synthetic_inputs(dir, spec);
        return py::dict(py::arg("articles") = r.articles_path,
                        py::arg("registry") = r.registry_path,
                        py::arg("gazetteer") = r.gazetteer_path,
                        py::arg("fixtures") = r.fixtures_path,
                        py::arg("n_ground_truth") = r.truth.ground_truth.size());
      },
      py::arg("dir"), py::arg("n_articles"), py::arg("n_planted"),
      py::arg("noise_rate") = 0.0, py::arg("seed") = 0);
}
