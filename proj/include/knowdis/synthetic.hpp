#pragma once

// Planted-signal fixtures. Event lemmas come in clusters; pairs inside a
// cluster are causal, pairs across clusters are not. A subset of the causal
// pairs is withheld from the gold pair list so the expansion and embedding
// filter have something to recover.

#include <cstdint>
#include <filesystem>
#include <string>

#include "knowdis/common.hpp"

namespace knowdis {

struct SyntheticOptions {
  std::uint64_t seed = 2024;
  std::size_t clusters = 20;
  std::size_t events_per_side = 3;  // causes (and effects) per cluster
  std::size_t gold_docs = 15;
  std::size_t sentences_per_doc = 6;
  std::size_t corpus_sentences = 4000;
  std::size_t copa_records = 200;
  double cross_link_rate = 0.3;     // chance of a misleading cross-cluster synonym per lemma
  double corpus_fraction = 0.5;     // written into the generated config
};

struct SyntheticBenchmark {
  std::string gold_pairs;
  std::string gold_sentences;
  std::string corpus;
  std::string synsets;
  std::string verbclasses;
  std::string lemma_table;
  std::string copa;
  std::string connectives;
  std::string config;
  PairSet hidden_causal;  // within-cluster causal pairs left out of gold_pairs
};

SyntheticBenchmark make_benchmark(const SyntheticOptions& options = {});

/// Writes every fixture plus knowdis.ini (relative paths, output_dir = out).
void write_benchmark(const SyntheticBenchmark& bench, const std::filesystem::path& dir);

/// Small separable ranking task: each cluster has three causes and three
/// effects; eight of the nine within-cluster pairs are positives and the last
/// is planted among cross-cluster candidates (planted pairs are exactly 10% of
/// the candidates). Negatives are as many cross-cluster pairs as candidates.
struct ToyEmbeddingTask {
  PairSet positives;
  PairSet negatives;
  PairSet candidates;
  PairSet planted;
};

ToyEmbeddingTask make_toy_embedding_task(std::uint64_t seed, std::size_t clusters = 20);

}  // namespace knowdis
