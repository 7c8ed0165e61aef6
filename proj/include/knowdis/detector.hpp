#pragma once

// Sparse-feature logistic event-causality detector, the self-training relabel
// pass and the annealed training schedule.
//
// The classifier sits behind a small train/predict contract so a neural
// encoder could replace it without touching the data pipeline.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "knowdis/annotator.hpp"

namespace knowdis {

using FeatureId = std::uint64_t;

/// Sorted by id, duplicates merged.
struct FeatureVector {
  std::vector<std::pair<FeatureId, double>> entries;
};

struct FeatureContext {
  std::uint64_t hash_seed = 0x6b6e6f77646973ULL;
  std::array<double, 3> cs_bucket_edges{0.0, 0.0, 0.0};
};

/// Human-readable feature strings before hashing, e.g. "CONN=because",
/// "DIST=2-3", "CTX_C=storm".
std::vector<std::string> feature_strings(const LabeledSentence& instance, const std::array<double, 3>& cs_edges);

FeatureVector featurize(const LabeledSentence& instance, const FeatureContext& context);

/// Token-distance bucket label: "1", "2-3", "4-7" or "8+".
std::string_view distance_bucket(std::size_t distance);

/// Quartile edges (25th, 50th, 75th percentiles) of the cs_scores present in
/// `data`; zeros when none are present.
std::array<double, 3> cs_quartile_edges(const Dataset& data);

struct DetectorModel {
  std::unordered_map<FeatureId, double> weights;
  double bias = 0.0;
  std::uint64_t hash_seed = FeatureContext{}.hash_seed;
  std::array<double, 3> cs_bucket_edges{0.0, 0.0, 0.0};

  FeatureContext context() const { return {hash_seed, cs_bucket_edges}; }
  double score(const FeatureVector& x) const;
};

struct TrainConfig {
  double learning_rate = 0.1;
  double l2_penalty = 1e-4;
  int epochs = 10;
  std::uint64_t seed = 0;
  double beta = 0.1;              // annealing proportion per epoch
  double relabel_threshold = 0.5;
  int patience = 0;               // epochs without dev-F1 gain before stopping; 0 disables
  std::uint64_t hash_seed = FeatureContext{}.hash_seed;

  void validate() const;
};

struct Example {
  FeatureVector x;
  bool positive = false;
};

/// Plain weights for the objective J = mean log-loss + (l2 / 2) * ||w||^2.
/// The bias is not regularized.
struct LinearParams {
  std::unordered_map<FeatureId, double> weights;
  double bias = 0.0;
};

double regularized_log_loss(const LinearParams& params, std::span<const Example> data, double l2);
LinearParams regularized_log_loss_gradient(const LinearParams& params, std::span<const Example> data, double l2);

/// Sigmoid of the linear score, clamped strictly inside (0, 1).
double predict(const DetectorModel& model, const LabeledSentence& instance);
double predict(const DetectorModel& model, const FeatureVector& x);

/// SGD on the regularized log-loss. Targets come from pair.label. Throws
/// TrainingError unless both classes are present.
DetectorModel train_plain(const Dataset& data, const TrainConfig& config);

struct RelabelResult {
  Dataset kept;  // predictions >= threshold, relabeled causal
  std::size_t dropped = 0;
};

RelabelResult relabel(const DetectorModel& model, const Dataset& refined, double threshold);

/// floor(min(1, (epoch - 1) * beta) * total) for epoch >= 1.
std::size_t anneal_count(int epoch, double beta, std::size_t total);

/// Epoch e trains on gold plus the first anneal_count(e, beta, |distant|)
/// distant instances (callers order them by confidence), reshuffled with a
/// generator derived from (seed, e). With an empty distant set this is
/// weight-identical to train_plain(gold). When `dev` is non-null and
/// patience > 0, keeps the best-dev-F1 weights and stops early.
DetectorModel train_annealed(const Dataset& gold, const Dataset& distant, const TrainConfig& config,
                             const Dataset* dev = nullptr);

struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Confusion confusion(const DetectorModel& model, const Dataset& test, double threshold = 0.5);

nlohmann::json model_to_json(const DetectorModel& model);
DetectorModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const DetectorModel& model);
DetectorModel load_model(const std::filesystem::path& path);

}  // namespace knowdis
