#pragma once

// Causal-strength statistics over cause-related / effect-related text, span
// scoring of distantly labeled sentences, connective detection, and the
// partition-and-keep refinement that turns D_n into D_r.
//
// With f(i,j) the co-occurrence count of cause word i and effect word j,
// M = sum of all counts and N = number of ingested (cause text, effect text)
// pairs:
//
//   p(i) = row(i) / M     p(j) = col(j) / M     p(i,j) = f(i,j) / N
//   nec  = p(i,j) / (p(i)^alpha * p(j))
//   suf  = p(i,j) / (p(i) * p(j)^alpha)
//   CS   = nec^lambda * suf^(1 - lambda)
//
// The joint uses N while the marginals use M. This is intentional.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "knowdis/annotator.hpp"
#include "knowdis/common.hpp"

namespace knowdis {

enum class TextSource { copa, annotated };

struct CausePairText {
  std::vector<Lemma> cause_tokens;
  std::vector<Lemma> effect_tokens;
  TextSource source = TextSource::copa;
};

struct CopaRecord {
  std::string premise;
  std::string alt1;
  std::string alt2;
  int correct = 1;                // 1 or 2
  std::string asks_for = "cause";  // "cause" or "effect"
};

/// JSON lines {premise, alt1, alt2, correct, asks_for}.
std::vector<CopaRecord> read_copa(std::istream& in, const std::string& source = "<copa>");
std::vector<CopaRecord> load_copa(const std::filesystem::path& path);

/// asks_for = cause: the correct alternative is cause text, the premise effect
/// text; asks_for = effect: the reverse. The wrong alternative is dropped.
std::vector<CausePairText> extract_copa_pairs(std::span<const CopaRecord> records, const LemmaTable& table);

/// First token index of the right-hand segment when no connective separates
/// the events: floor((cause_idx + effect_idx) / 2) + 1.
std::size_t midpoint_boundary(std::size_t cause_idx, std::size_t effect_idx);

/// Splits causal gold sentences at the event midpoint; the segment holding
/// the cause becomes cause text. Noncausal instances are skipped.
std::vector<CausePairText> extract_annotated_pairs(std::span<const LabeledSentence> gold);

class CooccurrenceTable {
 public:
  /// Counts every (cause token, effect token) occurrence combination.
  void add(const CausePairText& pair);
  void merge(const CooccurrenceTable& other);

  std::uint64_t count(const Lemma& cause, const Lemma& effect) const;
  std::uint64_t row_sum(const Lemma& cause) const;
  std::uint64_t col_sum(const Lemma& effect) const;
  std::uint64_t total() const { return total_; }           // M
  std::uint64_t pair_count() const { return pair_count_; }  // N
  std::vector<Lemma> vocabulary() const;                    // W, sorted

  struct Entry {
    Lemma cause;
    Lemma effect;
    std::uint64_t count;
  };
  /// All nonzero counts ordered by (cause, effect).
  std::vector<Entry> entries() const;

  /// Header `#N<TAB><n>` then `cause<TAB>effect<TAB>count` rows in order.
  void save(std::ostream& out) const;
  static CooccurrenceTable load(std::istream& in, const std::string& source = "<cooccurrence>");

 private:
  void bump(const Lemma& cause, const Lemma& effect, std::uint64_t by);

  std::unordered_map<Lemma, std::unordered_map<Lemma, std::uint64_t>> counts_;
  std::unordered_map<Lemma, std::uint64_t> rows_;
  std::unordered_map<Lemma, std::uint64_t> cols_;
  std::uint64_t total_ = 0;
  std::uint64_t pair_count_ = 0;
};

/// Partial tables over contiguous chunks, merged in chunk order.
CooccurrenceTable build_table(std::span<const CausePairText> pairs, std::size_t workers = 1);

struct CSParams {
  double alpha = 0.5;          // penalty exponent on the high-frequency marginal, (0, 1]
  double lambda_interp = 0.5;  // necessity/sufficiency interpolation, [0, 1]
  double epsilon = 0.0;        // probability floor; 0 means absent terms score 0

  void validate() const;
};

/// CS(i_c, j_e). Zero when f(i,j) or a marginal is zero (and epsilon is 0),
/// or when the table is empty.
double causal_strength(const Lemma& cause, const Lemma& effect, const CooccurrenceTable& table,
                       const CSParams& params);

/// sum_{i in sp1} sum_{j in sp2} CS(i, j) / (|sp1| + |sp2|); 0 if both empty.
double span_strength(std::span<const Lemma> cause_span, std::span<const Lemma> effect_span,
                     const CooccurrenceTable& table, const CSParams& params);

class ConnectiveLexicon {
 public:
  struct Phrase {
    std::string text;
    std::vector<Lemma> lemmas;
  };

  /// Each phrase is lemmatized the same way as corpus text.
  static ConnectiveLexicon from_phrases(const std::vector<std::string>& phrases, const LemmaTable& table);
  /// One phrase per line; `#` starts a comment line.
  static ConnectiveLexicon parse(std::istream& in, const LemmaTable& table);
  static ConnectiveLexicon load(const std::filesystem::path& path, const LemmaTable& table);
  static const std::vector<std::string>& default_phrases();

  const std::vector<Phrase>& phrases() const { return phrases_; }
  bool empty() const { return phrases_.empty(); }

 private:
  std::vector<Phrase> phrases_;
};

struct ConnectiveMatch {
  std::string phrase;
  std::size_t begin = 0;
  std::size_t length = 0;
};

/// Longest lexicon phrase whose lemmas match contiguously strictly between
/// the two events. Ties go to the earliest position.
std::optional<ConnectiveMatch> find_connective(const LabeledSentence& instance, const ConnectiveLexicon& lexicon);
std::optional<std::string> detect_connective(const LabeledSentence& instance, const ConnectiveLexicon& lexicon);

struct SentenceScore {
  double score = 0.0;
  bool empty_span = false;
};

/// Splits the sentence into the cause-side and effect-side spans, at the
/// detected connective (whose tokens belong to neither span) or at the event
/// midpoint, and scores them with span_strength. Writes cs_score and
/// connective into `instance`. A null lexicon disables connective detection.
SentenceScore score_sentence(LabeledSentence& instance, const CooccurrenceTable& table, const CSParams& params,
                             const ConnectiveLexicon* lexicon);

struct PartitionOptions {
  double keep_c = 0.50;
  double keep_nc = 0.10;
  /// When false, each partition is ordered by a seeded hash of the instance
  /// key instead of cs_score (random retention, used for ablations).
  bool rank_by_score = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FilterResult {
  Dataset kept;  // canonical order
  std::size_t connective_total = 0;
  std::size_t connective_kept = 0;
  std::size_t plain_total = 0;
  std::size_t plain_kept = 0;
};

/// Instances with a connective form one partition, the rest another. Each
/// partition is sorted by descending cs_score (ties by instance key) and the
/// first ceil(keep * size) are retained.
FilterResult partition_and_keep(Dataset scored, const PartitionOptions& options = {});

/// Descending cs_score, ties by canonical instance key.
void order_by_confidence(Dataset& data);

}  // namespace knowdis
