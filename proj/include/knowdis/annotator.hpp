#pragma once

// Corpus sampling, tokenization and distant labeling.
//
// Corpus input is JSON lines {doc_id, sent_id, text}. Every sentence that
// contains both lemmas of a known causal pair at distinct positions becomes
// one LabeledSentence per matched pair.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "knowdis/common.hpp"
#include "knowdis/manifest.hpp"

namespace knowdis {

struct RawSentence {
  std::string doc_id;
  std::int64_t sent_id = 0;
  std::string text;
};

struct SentenceRecord {
  std::string doc_id;
  std::int64_t sent_id = 0;
  std::string text;
  std::vector<std::string> tokens;
  std::vector<Lemma> lemmas;  // parallel to tokens
};

/// surface form -> lemma, keyed on the lowercased surface.
class LemmaTable {
 public:
  void add(std::string_view surface, const Lemma& lemma);
  std::optional<Lemma> lookup(std::string_view surface) const;
  std::size_t size() const { return map_.size(); }

 private:
  std::unordered_map<std::string, Lemma> map_;
};

LemmaTable parse_lemma_table(std::istream& in, const std::string& source = "<lemma table>");
LemmaTable load_lemma_table(const std::filesystem::path& path);

/// Suffix-stripping fallback for words missing from the lemma table:
/// -ies -> y, -es after a sibilant, -s, -ed and -ing (undoing a doubled final
/// consonant). Input must already be lowercase.
std::string fallback_lemma(std::string_view word);

struct Tokenized {
  std::vector<std::string> tokens;
  std::vector<Lemma> lemmas;
};

/// Whitespace split, edge punctuation stripped, empty tokens dropped.
Tokenized tokenize_and_lemmatize(std::string_view text, const LemmaTable& table);

enum class PairSource { gold, extracted };
enum class Orientation { cause_first, effect_first };

std::string_view to_string(PairSource s);
std::string_view to_string(Orientation o);

struct LabeledSentence {
  SentenceRecord sentence;
  std::size_t cause_idx = 0;
  std::size_t effect_idx = 0;
  EventPair pair;
  PairSource pair_source = PairSource::gold;
  Orientation orientation = Orientation::cause_first;
  std::optional<std::string> connective;
  std::optional<double> cs_score;
};

using Dataset = std::vector<LabeledSentence>;

/// Index bounds, distinct event positions, and lemmas at the positions equal
/// to the pair's lemmas.
bool satisfies_invariants(const LabeledSentence& s);

/// Causal pairs grouped by cause lemma for constant-time lookup. A
/// (cause, effect) listed with gold provenance shadows an extracted duplicate.
class PairIndex {
 public:
  explicit PairIndex(const PairSet& pairs);
  const std::vector<EventPair>* by_cause(const Lemma& cause) const;
  std::size_t size() const { return size_; }

 private:
  std::unordered_map<Lemma, std::vector<EventPair>> by_cause_;
  std::size_t size_ = 0;
};

/// One instance per pair whose lemmas both occur at distinct positions,
/// anchored at the first occurrence of each lemma.
std::vector<LabeledSentence> annotate(const SentenceRecord& sentence, const PairIndex& pairs);

/// Keep decision for one sentence; depends only on (seed, doc_id, sent_id).
bool sample_keep(std::string_view doc_id, std::int64_t sent_id, double fraction, std::uint64_t seed);
std::vector<RawSentence> sample_corpus(std::span<const RawSentence> corpus, double fraction, std::uint64_t seed);

RawSentence parse_corpus_line(std::string_view line, const std::string& source, std::size_t line_no);

struct AnnotateOptions {
  double fraction = 0.05;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::size_t max_tokens = 128;
  std::size_t batch_size = 8192;
};

struct DistantDataset {
  Dataset instances;         // canonical order
  DatasetManifest manifest;  // stage "annotate", output dn.jsonl
};

/// Streams the corpus through sampling, tokenization and annotation.
/// `pairs` should hold the gold causal pairs plus the filtered extracted ones.
DistantDataset build_dn(std::istream& corpus, const PairSet& pairs, const LemmaTable& table,
                        const AnnotateOptions& options, const std::string& source = "<corpus>");

/// Orders by (doc_id, sent_id, cause, effect, cause_idx, effect_idx).
void canonical_sort(Dataset& data);

nlohmann::json to_json(const LabeledSentence& s);
LabeledSentence labeled_from_json(const nlohmann::json& j);

std::string serialize_jsonl(const Dataset& data);
Dataset read_jsonl(std::istream& in, const std::string& source = "<dataset>");
Dataset load_jsonl(const std::filesystem::path& path);
std::string dataset_hash(const Dataset& data);

/// Gold sentences as JSON lines {doc_id, sent_id, text, cause_idx, effect_idx,
/// label}. Indices refer to tokens produced by tokenize_and_lemmatize.
Dataset parse_gold_sentences(std::istream& in, const LemmaTable& table, const std::string& source = "<gold>");
Dataset load_gold_sentences(const std::filesystem::path& path, const LemmaTable& table);

}  // namespace knowdis
