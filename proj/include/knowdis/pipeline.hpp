#pragma once

// Stage orchestration, configuration, cross-validation and audit sampling.
//
// Every file-backed stage reads its inputs, writes its outputs into the
// configured output directory and leaves `<stage>.manifest.json` beside them.
// Downstream stages refuse to run until the manifests they read from exist.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "knowdis/annotator.hpp"
#include "knowdis/causal_strength.hpp"
#include "knowdis/detector.hpp"
#include "knowdis/embedding.hpp"
#include "knowdis/lexicon.hpp"
#include "knowdis/manifest.hpp"

namespace knowdis {

enum class Stage { expand, train_embed, annotate, build_cs, filter, relabel, train, evaluate, audit_sample };

std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view name);
const std::vector<Stage>& upstream_stages(Stage s);
/// expand .. train, then audit-sample. evaluate is separate.
const std::vector<Stage>& chain_stages();

struct PipelinePaths {
  std::filesystem::path gold_pairs;
  std::filesystem::path gold_sentences;
  std::filesystem::path corpus;
  std::filesystem::path synsets;
  std::filesystem::path verbclasses;
  std::filesystem::path lemma_table;   // optional
  std::filesystem::path copa;
  std::filesystem::path connectives;   // optional; built-in list when empty
  std::filesystem::path dev_sentences; // optional; enables early stopping
  std::filesystem::path output_dir;
};

/// Switches for the ablation runs. All true is the full pipeline.
struct AblationSwitches {
  bool distant = true;          // false: gold-only training
  bool extracted_pairs = true;  // false: distant labels from gold pairs only
  bool filter = true;           // false: train on all of D_n
  bool connectives = true;      // false: no connective partition or split
  bool cs_scoring = true;       // false: random retention instead of CS rank
  bool relabel = true;
  bool annealing = true;

  std::string tag() const;
};

struct PipelineConfig {
  PipelinePaths paths;
  double pair_keep_fraction = 0.10;
  double corpus_fraction = 0.05;
  double keep_c = 0.50;
  double keep_nc = 0.10;
  CSParams cs;
  MarginConfig margin;
  TrainConfig train;
  AblationSwitches ablation;
  std::uint64_t seed = 13;
  std::size_t workers = 1;
  int folds = 5;
  std::size_t audit_size = 100;
  int repeats = 1;

  std::string source_text;  // echoed verbatim into manifests
  nlohmann::json overrides = nlohmann::json::object();

  /// INI text with [paths] [pipeline] [causal_strength] [embedding] [detector]
  /// [ablation] sections. Relative paths resolve against `base_dir`.
  static PipelineConfig parse(std::string_view text, const std::filesystem::path& base_dir);
  static PipelineConfig load(const std::filesystem::path& path);

  /// Re-derives component seeds from `seed`.
  void set_seed(std::uint64_t s);
  void validate() const;
};

/// Gold pairs recovered from annotated sentences: a pair is causal if any
/// sentence labels it causal, noncausal otherwise.
PairSet derive_gold_pairs(const Dataset& gold_sentences);

struct EmbeddingOutcome {
  EmbeddingSpace space;
  Ranking ranking;
  PairSet kept;
};

/// Trains on gold causal (positives) vs gold noncausal (negatives), ranks the
/// candidates and keeps the top fraction.
EmbeddingOutcome embed_and_filter(const PairSet& gold, const PairSet& candidates, const MarginConfig& config,
                                  double keep_fraction);

/// Gold causal pairs plus (optionally) the filtered extracted pairs.
PairSet annotation_pairs(const PairSet& gold, const PairSet& filtered, bool use_extracted);

CooccurrenceTable build_cs_table(const std::vector<CopaRecord>& copa, const Dataset& gold_sentences,
                                 const LemmaTable& table, std::size_t workers);

/// Fills cs_score and connective on every instance according to the ablation
/// switches. With connectives disabled, spans split at the midpoint and the
/// connective field is left empty.
void attach_evidence(Dataset& data, const CooccurrenceTable& table, const CSParams& params,
                     const ConnectiveLexicon& lexicon, const AblationSwitches& ablation, std::size_t workers);

/// Connective detection only, used to restore the detector's connective
/// feature after a connective-blind filter.
void attach_connectives(Dataset& data, const ConnectiveLexicon& lexicon);

/// D_n -> D_r. Expects evidence already attached.
FilterResult refine(Dataset dn, const PipelineConfig& config, const ConnectiveLexicon& lexicon);

struct RelabelOutcome {
  DetectorModel pretrained;
  Dataset drr;  // ordered highest confidence first
  std::size_t dropped = 0;
};

RelabelOutcome relabel_distant(const Dataset& gold, const Dataset& dr, const PipelineConfig& config);

DetectorModel train_detector(const Dataset& gold, const Dataset& drr, const PipelineConfig& config,
                             const Dataset* dev = nullptr);

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  Confusion counts;
  std::vector<EvalReport> folds;

  static EvalReport from_confusion(const Confusion& c);
  nlohmann::json to_json() const;
};

/// P/R/F1 on the causal class at threshold 0.5. P = 0 with no predicted
/// positives; F1 = 0 when P + R = 0.
EvalReport evaluate(const DetectorModel& model, const Dataset& test);

struct Fold {
  std::vector<std::string> train_docs;
  std::vector<std::string> test_docs;
  Dataset train;
  Dataset test;
};

/// Document-level split: every sentence of a document lands in the same fold.
std::vector<Fold> kfold_split(const Dataset& gold, int k, std::uint64_t seed);

/// Cross-validated evaluation running the whole distant chain inside every
/// fold from that fold's training pairs only. Test-fold pairs are removed
/// from the fold's expansion seeds and annotation pairs. `fold_log`, when
/// given, receives per-fold pair lists for leakage audits.
EvalReport cross_validate(const PipelineConfig& config, std::uint64_t seed, nlohmann::json* fold_log = nullptr);

/// Uniform sample without replacement, returned in input order.
Dataset audit_sample(const Dataset& data, std::size_t n, std::uint64_t seed);
/// Plain text; the cause token is shown as [CAUSE:tok], the effect as [EFFECT:tok].
void write_audit(std::ostream& out, const Dataset& sample);

/// Runs one file-backed stage. Throws DependencyError when an upstream
/// manifest is missing and ConfigError for unusable configuration.
DatasetManifest run_stage(Stage stage, const PipelineConfig& config);

std::filesystem::path manifest_path(const PipelineConfig& config, Stage stage);

}  // namespace knowdis
