#pragma once

// Lexical knowledge fixtures (synsets, verb classes) and gold-pair expansion.
//
// Fixture formats, one record per line:
//   synsets       lemma<TAB>syn:a,b,...<TAB>hyp:c,d,...
//   verb classes  classid<TAB>member1,member2,...
//   gold pairs    cause<TAB>effect<TAB>causal|noncausal
// Blank lines are ignored. Multi-word gold events reduce to their head word.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <string_view>

#include "knowdis/common.hpp"

namespace knowdis {

class SynsetIndex {
 public:
  /// Merges by set union. A lemma is never recorded as its own synonym or
  /// hypernym.
  void add(const Lemma& lemma, const std::set<Lemma>& synonyms, const std::set<Lemma>& hypernyms);

  const std::set<Lemma>& synonyms(const Lemma& lemma) const;
  const std::set<Lemma>& hypernyms(const Lemma& lemma) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  struct Entry {
    std::set<Lemma> synonyms;
    std::set<Lemma> hypernyms;
  };
  std::map<Lemma, Entry> entries_;
};

class VerbClassIndex {
 public:
  void add_class(const std::string& class_id, const std::set<Lemma>& members);

  const std::set<std::string>& classes(const Lemma& lemma) const;
  const std::set<Lemma>& members(const std::string& class_id) const;
  const std::map<std::string, std::set<Lemma>>& all_classes() const { return members_; }
  std::size_t class_count() const { return members_.size(); }

 private:
  std::map<Lemma, std::set<std::string>> classes_;
  std::map<std::string, std::set<Lemma>> members_;
};

SynsetIndex parse_synset_index(std::istream& in, const std::string& source = "<synsets>");
SynsetIndex load_synset_index(const std::filesystem::path& path);

VerbClassIndex parse_verbclass_index(std::istream& in, const std::string& source = "<verbclasses>");
VerbClassIndex load_verbclass_index(const std::filesystem::path& path);

PairSet parse_gold_pairs(std::istream& in, const std::string& source = "<gold pairs>");
PairSet load_gold_pairs(const std::filesystem::path& path);

/// Writes `cause<TAB>effect<TAB>provenance<TAB>label` lines in set order.
void write_pairs(std::ostream& out, const PairSet& pairs);
PairSet read_pairs(std::istream& in, const std::string& source = "<pairs>");

/// Cross product of {cause} ∪ syn ∪ hyp with the same group for the effect,
/// minus the input pair.
PairSet expand_wordnet(const EventPair& pair, const SynsetIndex& index);

/// Cross product of the verb-class co-members of each side (each side keeps
/// its own lemma), minus the input pair.
PairSet expand_verbnet(const EventPair& pair, const VerbClassIndex& index);

/// Union of both expansions over the causal pairs in `gold`, deduplicated on
/// (cause, effect). Pairs found by both sources carry Provenance::both. Any
/// (cause, effect) already in `gold` is excluded.
PairSet expand_all(const PairSet& gold, const SynsetIndex& synsets, const VerbClassIndex& verbclasses);

}  // namespace knowdis
