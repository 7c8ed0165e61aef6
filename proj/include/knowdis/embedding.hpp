#pragma once

// Translation embedding over event lemmas with a single causal relation.
// A pair scores ||v(cause) + r - v(effect)||_2; small means likely causal.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "knowdis/common.hpp"

namespace knowdis {

enum class NegativeStrategy { annotated_negatives, corruption };

struct MarginConfig {
  std::size_t dim = 100;
  double margin = 1.0;
  double learning_rate = 0.01;
  int epochs = 200;
  std::uint64_t seed = 0;
  NegativeStrategy negative_strategy = NegativeStrategy::annotated_negatives;
  /// When false the relation vector stays at zero and d = ||v(cause) - v(effect)||.
  bool learn_relation = true;

  void validate() const;
};

class EmbeddingSpace {
 public:
  explicit EmbeddingSpace(std::size_t dim);

  std::size_t dim() const { return dim_; }
  bool contains(const Lemma& lemma) const { return entity_.contains(lemma); }
  /// Throws MissingEmbeddingError for unknown lemmas.
  std::span<const double> vector(const Lemma& lemma) const;
  std::span<double> mutable_vector(const Lemma& lemma);
  void set_vector(const Lemma& lemma, std::vector<double> v);

  std::span<const double> relation() const { return relation_; }
  std::span<double> mutable_relation() { return relation_; }
  void set_relation(std::vector<double> v);

  const std::map<Lemma, std::vector<double>>& entities() const { return entity_; }
  /// Multiplies every entity vector and the relation by `factor`.
  void scale(double factor);

 private:
  std::size_t dim_;
  std::map<Lemma, std::vector<double>> entity_;
  std::vector<double> relation_;
};

double translation_distance(std::span<const double> cause, std::span<const double> relation,
                            std::span<const double> effect);

double distance(const EmbeddingSpace& space, const EventPair& pair);

struct PairVectors {
  std::span<const double> cause;
  std::span<const double> effect;
};

/// Value and gradient of [margin + d(pos) - d(neg)]_+ with respect to each of
/// the five vectors involved. Gradients are zero when the hinge is inactive.
struct HingeTerm {
  double loss = 0.0;
  std::vector<double> pos_cause, pos_effect, neg_cause, neg_effect, relation;
};

HingeTerm hinge_term(const PairVectors& pos, const PairVectors& neg, std::span<const double> relation,
                     double margin);

/// Fits the embedding by SGD on sum_pos sum_neg [margin + d(pos) - d(neg)]_+.
/// Each epoch renormalizes entity vectors, then visits every positive once in
/// shuffled order with one sampled negative. Deterministic for a fixed seed.
EmbeddingSpace train_embedding(const PairSet& positives, const PairSet& negatives, const MarginConfig& config);

struct ScoredPair {
  EventPair pair;
  double distance;
};

struct Ranking {
  std::vector<ScoredPair> ranked;
  /// Candidates skipped because a lemma has no vector.
  std::size_t dropped = 0;
};

/// Ascending by distance, ties by (cause, effect).
Ranking rank_candidates(const EmbeddingSpace& space, const PairSet& candidates);

/// First ceil(fraction * n) ranked pairs. Requires 0 < fraction <= 1.
PairSet filter_top(std::span<const ScoredPair> ranked, double fraction = 0.10);

/// `# knowdis-embedding v1 dim=<d>` header, then `lemma<TAB>v1,...,vd` rows
/// and one `__relation__` row. Values use shortest round-trip formatting.
void save_embedding(std::ostream& out, const EmbeddingSpace& space);
EmbeddingSpace load_embedding(std::istream& in, const std::string& source = "<embedding>");

}  // namespace knowdis
