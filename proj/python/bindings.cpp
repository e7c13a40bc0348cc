#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "textcausal/dataset.hpp"
#include "textcausal/effects.hpp"
#include "textcausal/estimators.hpp"
#include "textcausal/harness.hpp"
#include "textcausal/structured.hpp"

namespace py = pybind11;
using namespace textcausal;

namespace {

py::dict report_dict(const EstimateReport& r) {
  py::dict d;
  d["method"] = r.method;
  d["dgp"] = r.dgp;
  d["structured_seed"] = r.structured_seed;
  d["text_seed"] = r.text_seed;
  d["tau_word"] = r.tau_word;
  d["delta_word"] = r.delta_word;
  d["tau_second"] = r.tau_second;
  d["delta_second"] = r.delta_second;
  d["n"] = r.n;
  d["estimate"] = r.estimate;
  d["oracle"] = r.oracle;
  d["abs_error"] = r.abs_error;
  d["ci_low"] = r.ci_low;
  d["ci_high"] = r.ci_high;
  d["classifier_accuracy"] = r.classifier_accuracy;
  d["diagnostics"] = r.diagnostics;
  return d;
}

py::dict structured_dict(const StructuredParams& p) {
  py::dict d;
  d["p_c"] = p.p_c;
  d["p_u_given_c"] = p.p_u_given_c;
  d["p_a_given_cu"] = p.p_a_given_cu;
  d["p_y_given_acu"] = p.p_y_given_acu;
  d["seed"] = p.seed;
  return d;
}

StructuredParams structured_from(const py::dict& d) {
  StructuredParams p;
  p.p_c = d["p_c"].cast<double>();
  p.p_u_given_c = d["p_u_given_c"].cast<std::array<double, 2>>();
  p.p_a_given_cu = d["p_a_given_cu"].cast<std::array<double, 4>>();
  p.p_y_given_acu = d["p_y_given_acu"].cast<std::array<double, 8>>();
  if (d.contains("seed")) p.seed = d["seed"].cast<Seed>();
  p.validate();
  return p;
}

ExperimentConfig config_from(const std::string& text, const std::vector<std::string>& overrides) {
  auto cfg = parse_config(text);
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.validate();
  return cfg;
}

py::list summaries_list(const GridReport& report) {
  py::list out;
  for (const auto& s : report.summaries()) {
    py::dict d;
    d["cell"] = report.config.cells.at(s.cell).label();
    d["method"] = s.method;
    d["budget"] = s.budget;
    d["runs"] = s.runs;
    d["failures"] = s.failures;
    d["mean_abs_error"] = s.mean_abs_error;
    d["mean_estimate"] = s.mean_estimate;
    d["mean_accuracy"] = s.mean_accuracy;
    d["ci_low"] = s.ci_low;
    d["ci_high"] = s.ci_high;
    out.append(d);
  }
  return out;
}

EffectForm form_from(const std::string& name) { return effect_form_from_string(name); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Synthetic text causal-inference benchmark";

  py::register_exception<EstimationError>(m, "EstimationError", PyExc_RuntimeError);

  m.def("kendall_tau",
        [](std::vector<std::uint32_t> a, std::vector<std::uint32_t> b) {
          return kendall_tau(VocabOrdering(std::move(a)), VocabOrdering(std::move(b)));
        },
        py::arg("ranks_a"), py::arg("ranks_b"), "Kendall tau between two 1-based rank vectors.");

  m.def("sample_ordering_pair",
        [](std::size_t n, double tau, Seed seed) {
          const auto p = sample_ordering_pair(n, tau, seed);
          return py::make_tuple(p.v0.ranks(), p.v1.ranks(), p.achieved_tau_correlation);
        },
        py::arg("n"), py::arg("tau"), py::arg("seed"), "(ranks_v0, ranks_v1, achieved correlation).");

  m.def("apply_effect",
        [](const std::vector<double>& probs, std::vector<std::uint32_t> ranks, double delta, const std::string& form) {
          return apply_effect(clamp_normalize(probs), VocabOrdering(std::move(ranks)), delta, form_from(form)).probs();
        },
        py::arg("probs"), py::arg("ranks"), py::arg("delta"), py::arg("form") = "equation");

  m.def("h",
        [](const std::vector<double>& probs, double tau, double delta, Seed seed, const std::string& form) {
          const auto pair = h(clamp_normalize(probs), tau, delta, sample_ordering_pair(probs.size(), tau, seed),
                              form_from(form));
          return py::make_tuple(pair.p0.probs(), pair.p1.probs());
        },
        py::arg("probs"), py::arg("tau"), py::arg("delta"), py::arg("seed"), py::arg("form") = "equation",
        "(p(V|U=0), p(V|U=1)) with orderings sampled from seed.");

  m.def("sample_structured_params", [](Seed seed) { return structured_dict(sample_structured_params(seed)); },
        py::arg("seed"));
  m.def("oracle_ate", [](const py::dict& p) { return oracle_ate(structured_from(p)); }, py::arg("params"));
  m.def("naive_adjusted_ate", [](const py::dict& p) { return naive_adjusted_ate(structured_from(p)); },
        py::arg("params"));

  py::class_<Dataset>(m, "Dataset")
      .def_static("from_text", [](const std::string& text) { return parse_dataset(text); }, py::arg("text"))
      .def_static("read", [](const std::filesystem::path& p) { return read_dataset(p); }, py::arg("path"))
      .def("to_text", [](const Dataset& d) { return serialize_dataset(d); })
      .def("write", [](const Dataset& d, const std::filesystem::path& p) { write_dataset(p, d); }, py::arg("path"))
      .def("__len__", &Dataset::size)
      .def_property_readonly("dgp", [](const Dataset& d) { return std::string(to_string(d.meta.dgp)); })
      .def_property_readonly("vocab", [](const Dataset& d) { return d.meta.vocab.tokens(); })
      .def_property_readonly("oracle_ate", [](const Dataset& d) { return oracle_ate(d.meta.structured); })
      .def_property_readonly("structured", [](const Dataset& d) { return structured_dict(d.meta.structured); })
      .def("columns",
           [](const Dataset& d) {
             py::dict out;
             std::vector<int> c, u, a, y;
             std::vector<std::vector<TokenId>> tokens;
             for (const auto& r : d.records) {
               c.push_back(r.c);
               u.push_back(r.u);
               a.push_back(r.a);
               y.push_back(r.y);
               tokens.push_back(r.tokens.ids);
             }
             out["c"] = c;
             out["u"] = u;
             out["a"] = a;
             out["y"] = y;
             out["tokens"] = tokens;
             return out;
           },
           "Column lists c, u, a, y and token ids.");

  m.def("config_keys", &config_keys);
  m.def("normalize_config",
        [](const std::string& text, const std::vector<std::string>& overrides) {
          return config_from(text, overrides).to_text();
        },
        py::arg("text"), py::arg("overrides") = std::vector<std::string>{},
        "Parses, applies key=value overrides, validates and prints every key.");

  m.def("make_dataset",
        [](const std::string& config, std::size_t cell, std::size_t structured_index, std::size_t text_index,
           const std::vector<std::string>& overrides) {
          GeneratorFactory factory(config_from(config, overrides));
          py::gil_scoped_release release;
          return make_dataset(factory, cell, structured_index, text_index);
        },
        py::arg("config"), py::arg("cell") = 0, py::arg("structured_index") = 0, py::arg("text_index") = 0,
        py::arg("overrides") = std::vector<std::string>{}, "Dataset of one grid cell, exactly as the grid builds it.");

  m.def("estimate",
        [](const Dataset& d, const std::string& method, Seed seed, std::optional<std::size_t> budget,
           std::size_t bootstrap) {
          EstimatorConfig cfg;
          cfg.seed = seed;
          cfg.bootstrap = bootstrap;
          EstimateReport r;
          {
            py::gil_scoped_release release;
            r = estimate_by_name(d, method, budget, cfg);
          }
          return report_dict(r);
        },
        py::arg("dataset"), py::arg("method"), py::arg("seed") = 0, py::arg("labeled_budget") = std::nullopt,
        py::arg("bootstrap") = 100);

  m.def("run_grid",
        [](const std::string& config, const std::vector<std::string>& overrides, bool ablation) {
          const auto cfg = config_from(config, overrides);
          GridReport report;
          {
            py::gil_scoped_release release;
            report = ablation ? run_ablation(cfg) : run_grid(cfg);
            emit_report(report, cfg.output / "report");
          }
          return summaries_list(report);
        },
        py::arg("config"), py::arg("overrides") = std::vector<std::string>{}, py::arg("ablation") = false,
        "Runs (or resumes) a grid, writes <output>/report and returns per-cell summaries.");

  m.def("pearson",
        [](const std::vector<double>& x, const std::vector<double>& y) { return pearson(x, y); }, py::arg("x"),
        py::arg("y"));
}
