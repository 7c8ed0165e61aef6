#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <sstream>

#include "knowdis/pipeline.hpp"
#include "knowdis/synthetic.hpp"

namespace py = pybind11;
using namespace knowdis;

namespace {

using TextPairs = std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>>;

std::vector<Lemma> lemmas_of(const std::vector<std::string>& words) {
  std::vector<Lemma> out;
  for (const auto& w : words) out.emplace_back(w);
  return out;
}

CooccurrenceTable table_of(const TextPairs& pairs) {
  std::vector<CausePairText> texts;
  for (const auto& [c, e] : pairs) texts.push_back({lemmas_of(c), lemmas_of(e), TextSource::copa});
  return build_table(texts);
}

CSParams params_of(double alpha, double lambda_interp) {
  CSParams p;
  p.alpha = alpha;
  p.lambda_interp = lambda_interp;
  p.validate();
  return p;
}

// json -> python through the json module keeps the binding free of a
// converter for every nested type
py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

PipelineConfig config_of(const std::filesystem::path& path, std::optional<std::uint64_t> seed,
                         std::optional<std::size_t> workers, const std::map<std::string, bool>& ablation) {
  auto c = PipelineConfig::load(path);
  if (seed) {
    c.set_seed(*seed);
    c.overrides["seed"] = *seed;
  }
  if (workers) {
    c.workers = *workers;
    c.overrides["workers"] = *workers;
  }
  const std::map<std::string, bool AblationSwitches::*> fields{
      {"distant", &AblationSwitches::distant},       {"extracted_pairs", &AblationSwitches::extracted_pairs},
      {"filter", &AblationSwitches::filter},         {"connectives", &AblationSwitches::connectives},
      {"cs_scoring", &AblationSwitches::cs_scoring}, {"relabel", &AblationSwitches::relabel},
      {"annealing", &AblationSwitches::annealing},
  };
  for (const auto& [k, v] : ablation) {
    auto it = fields.find(k);
    if (it == fields.end()) throw ConfigError("unknown ablation switch '" + k + "'");
    c.ablation.*(it->second) = v;
  }
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_knowdis, m) {
  m.doc() = "knowdis: distant data augmentation for event causality detection";

  auto base = py::register_exception<Error>(m, "KnowdisError");
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DependencyError>(m, "DependencyError", base.ptr());

  m.def(
      "causal_strength",
      [](const TextPairs& pairs, const std::string& cause, const std::string& effect, double alpha,
         double lambda_interp) {
        return causal_strength(Lemma(cause), Lemma(effect), table_of(pairs), params_of(alpha, lambda_interp));
      },
      py::arg("pairs"), py::arg("cause"), py::arg("effect"), py::arg("alpha") = 0.5, py::arg("lambda_interp") = 0.5,
      "CS(cause, effect) over (cause words, effect words) text pairs.");

  m.def(
      "span_strength",
      [](const TextPairs& pairs, const std::vector<std::string>& cause_span, const std::vector<std::string>& effect_span,
         double alpha, double lambda_interp) {
        auto cs = lemmas_of(cause_span), es = lemmas_of(effect_span);
        return span_strength(cs, es, table_of(pairs), params_of(alpha, lambda_interp));
      },
      py::arg("pairs"), py::arg("cause_span"), py::arg("effect_span"), py::arg("alpha") = 0.5,
      py::arg("lambda_interp") = 0.5);

  m.def("anneal_count", &anneal_count, py::arg("epoch"), py::arg("beta"), py::arg("total"));

  m.def(
      "expand",
      [](const std::vector<std::tuple<std::string, std::string, std::string>>& gold, const std::string& synsets,
         const std::string& verbclasses) {
        std::ostringstream g;
        for (const auto& [c, e, l] : gold) g << c << '\t' << e << '\t' << l << '\n';
        std::istringstream gin(g.str()), sin(synsets), vin(verbclasses);
        auto out = expand_all(parse_gold_pairs(gin), parse_synset_index(sin), parse_verbclass_index(vin));
        std::vector<std::tuple<std::string, std::string, std::string>> rows;
        for (const auto& p : out) rows.emplace_back(p.cause.str(), p.effect.str(), std::string(to_string(p.provenance)));
        return rows;
      },
      py::arg("gold"), py::arg("synsets") = "", py::arg("verbclasses") = "",
      "Expand (cause, effect, label) gold pairs with synset and verb-class fixture text.");

  m.def(
      "load_config",
      [](const std::filesystem::path& path) {
        auto c = PipelineConfig::load(path);
        c.validate();
        py::dict d;
        d["seed"] = c.seed;
        d["workers"] = c.workers;
        d["folds"] = c.folds;
        d["output_dir"] = c.paths.output_dir;
        d["ablation"] = c.ablation.tag();
        d["source_text"] = c.source_text;
        return d;
      },
      py::arg("path"));

  m.def(
      "run_stage",
      [](const std::string& stage, const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         std::optional<std::size_t> workers) {
        auto c = config_of(config, seed, workers, {});
        DatasetManifest manifest;
        {
          py::gil_scoped_release release;
          manifest = run_stage(parse_stage(stage), c);
        }
        return to_python(manifest.to_json());
      },
      py::arg("stage"), py::arg("config"), py::arg("seed") = py::none(), py::arg("workers") = py::none(),
      "Run one pipeline stage and return its manifest as a dict.");

  m.def(
      "cross_validate",
      [](const std::filesystem::path& config, std::optional<std::uint64_t> seed,
         const std::map<std::string, bool>& ablation) {
        auto c = config_of(config, std::nullopt, std::nullopt, ablation);
        EvalReport report;
        {
          py::gil_scoped_release release;
          report = cross_validate(c, seed.value_or(c.seed));
        }
        return to_python(report.to_json());
      },
      py::arg("config"), py::arg("seed") = py::none(), py::arg("ablation") = std::map<std::string, bool>{},
      "Cross-validated P/R/F1, optionally with ablation switches turned off, e.g. {'relabel': False}.");

  m.def(
      "write_synthetic",
      [](const std::filesystem::path& dir, std::uint64_t seed, std::size_t clusters, std::size_t gold_docs,
         std::size_t corpus_sentences) {
        SyntheticOptions o;
        o.seed = seed;
        o.clusters = clusters;
        o.gold_docs = gold_docs;
        o.corpus_sentences = corpus_sentences;
        write_benchmark(make_benchmark(o), dir);
        return dir / "knowdis.ini";
      },
      py::arg("dir"), py::arg("seed") = 2024, py::arg("clusters") = 20, py::arg("gold_docs") = 15,
      py::arg("corpus_sentences") = 4000, "Write the synthetic benchmark; returns the config path.");

  m.def(
      "toy_ranking_recall",
      [](std::uint64_t seed) {
        auto task = make_toy_embedding_task(seed);
        MarginConfig c;
        c.seed = seed;
        auto space = train_embedding(task.positives, task.negatives, c);
        auto kept = filter_top(rank_candidates(space, task.candidates).ranked, 0.10);
        std::size_t hit = 0;
        for (const auto& p : kept) hit += task.planted.contains(p);
        return static_cast<double>(hit) / static_cast<double>(task.planted.size());
      },
      py::arg("seed"), "Share of planted pairs kept by filter_top(0.10) on the toy ranking task.");
}
