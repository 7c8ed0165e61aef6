// knowdis <stage> --config <file> [--repeats N] [--seed S] [--workers W]
//
// Exit codes: 0 ok, 1 other failure, 2 config/input error, 3 missing upstream stage.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "knowdis/pipeline.hpp"
#include "knowdis/synthetic.hpp"

namespace {

constexpr int kConfigExit = 2;
constexpr int kDependencyExit = 3;

void report(const knowdis::DatasetManifest& m) {
  std::cout << m.stage << "  " << m.output_hash;
  for (const auto& [k, v] : m.counts) std::cout << "  " << k << '=' << v;
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"knowdis: distant data augmentation for event causality detection"};
  std::string stage;
  std::string config_path;
  std::optional<int> repeats;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string synth_out = "synthetic";
  app.add_option("stage", stage,
                 "expand | train-embed | annotate | build-cs | filter | relabel | train | evaluate | audit-sample | "
                 "all | synth")
      ->required();
  app.add_option("--config,-c", config_path, "pipeline config (INI)");
  app.add_option("--repeats", repeats, "evaluate: independent repeats averaged into the report");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--workers", workers, "override the worker count");
  knowdis::SyntheticOptions synth;
  app.add_option("--out", synth_out, "synth: output directory");
  app.add_option("--clusters", synth.clusters, "synth: event clusters");
  app.add_option("--gold-docs", synth.gold_docs, "synth: gold documents");
  app.add_option("--corpus-sentences", synth.corpus_sentences, "synth: corpus size");
  app.add_option("--corpus-fraction", synth.corpus_fraction, "synth: corpus_fraction written to the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigExit;
  }

  try {
    if (stage == "synth") {
      if (seed) synth.seed = *seed;
      knowdis::write_benchmark(knowdis::make_benchmark(synth), synth_out);
      std::cout << "wrote synthetic benchmark to " << synth_out << '\n';
      return 0;
    }
    if (config_path.empty()) throw knowdis::ConfigError("--config is required");
    auto config = knowdis::PipelineConfig::load(config_path);
    if (seed) {
      config.set_seed(*seed);
      config.overrides["seed"] = *seed;
    }
    if (workers) {
      config.workers = *workers;
      config.overrides["workers"] = *workers;
    }
    if (repeats) {
      config.repeats = *repeats;
      config.overrides["repeats"] = *repeats;
    }
    config.validate();

    if (stage == "all") {
      for (auto s : knowdis::chain_stages()) report(knowdis::run_stage(s, config));
      return 0;
    }
    report(knowdis::run_stage(knowdis::parse_stage(stage), config));
    if (stage == "evaluate") {
      auto m = knowdis::DatasetManifest::load(knowdis::manifest_path(config, knowdis::Stage::evaluate));
      auto tp = m.counts["tp"], fp = m.counts["fp"], fn = m.counts["fn"];
      auto r = knowdis::EvalReport::from_confusion(
          {static_cast<std::size_t>(tp), static_cast<std::size_t>(fp), static_cast<std::size_t>(fn), 0});
      std::cout << "P=" << r.precision << " R=" << r.recall << " F1=" << r.f1 << '\n';
    }
    return 0;
  } catch (const knowdis::DependencyError& e) {
    std::cerr << "dependency error: " << e.what() << '\n';
    return kDependencyExit;
  } catch (const knowdis::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const knowdis::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
