#include "knowdis/lexicon.hpp"

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <utility>

namespace knowdis {

namespace {

const std::set<Lemma> kNoLemmas;
const std::set<std::string> kNoClasses;

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

std::set<Lemma> parse_lemma_list(std::string_view csv, const std::string& source, std::size_t line_no) {
  std::set<Lemma> out;
  if (trim(csv).empty()) return out;
  for (const auto& item : split(csv, ',')) {
    try {
      out.emplace(item);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

std::string_view strip_prefix(std::string_view field, std::string_view prefix, const std::string& source,
                              std::size_t line_no) {
  if (field.substr(0, prefix.size()) != prefix) {
    throw ParseError(source, line_no, "expected field starting with '" + std::string(prefix) + "'");
  }
  return field.substr(prefix.size());
}

std::set<Lemma> group(const Lemma& head, const std::set<Lemma>& a, const std::set<Lemma>& b) {
  std::set<Lemma> g = a;
  g.insert(b.begin(), b.end());
  g.insert(head);
  return g;
}

PairSet cross_minus_original(const EventPair& pair, const std::set<Lemma>& causes,
                             const std::set<Lemma>& effects, Provenance provenance) {
  PairSet out;
  for (const auto& c : causes) {
    for (const auto& e : effects) {
      if (c == pair.cause && e == pair.effect) continue;
      out.insert(EventPair{c, e, provenance, Label::causal});
    }
  }
  return out;
}

void require_causal(const EventPair& pair) {
  if (pair.label != Label::causal) {
    throw std::invalid_argument("expansion requires a causal pair, got (" + pair.cause.str() + ", " +
                                pair.effect.str() + ")");
  }
}

}  // namespace

void SynsetIndex::add(const Lemma& lemma, const std::set<Lemma>& synonyms, const std::set<Lemma>& hypernyms) {
  auto& entry = entries_[lemma];
  for (const auto& s : synonyms) {
    if (s != lemma) entry.synonyms.insert(s);
  }
  for (const auto& h : hypernyms) {
    if (h != lemma) entry.hypernyms.insert(h);
  }
}

const std::set<Lemma>& SynsetIndex::synonyms(const Lemma& lemma) const {
  auto it = entries_.find(lemma);
  return it == entries_.end() ? kNoLemmas : it->second.synonyms;
}

const std::set<Lemma>& SynsetIndex::hypernyms(const Lemma& lemma) const {
  auto it = entries_.find(lemma);
  return it == entries_.end() ? kNoLemmas : it->second.hypernyms;
}

void VerbClassIndex::add_class(const std::string& class_id, const std::set<Lemma>& members) {
  auto& m = members_[class_id];
  for (const auto& l : members) {
    m.insert(l);
    classes_[l].insert(class_id);
  }
}

const std::set<std::string>& VerbClassIndex::classes(const Lemma& lemma) const {
  auto it = classes_.find(lemma);
  return it == classes_.end() ? kNoClasses : it->second;
}

const std::set<Lemma>& VerbClassIndex::members(const std::string& class_id) const {
  auto it = members_.find(class_id);
  return it == members_.end() ? kNoLemmas : it->second;
}

SynsetIndex parse_synset_index(std::istream& in, const std::string& source) {
  SynsetIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(source, line_no, "expected 3 tab-separated fields, got " + std::to_string(fields.size()));
    }
    std::optional<Lemma> lemma;
    try {
      lemma.emplace(fields[0]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
    auto syn = parse_lemma_list(strip_prefix(fields[1], "syn:", source, line_no), source, line_no);
    auto hyp = parse_lemma_list(strip_prefix(fields[2], "hyp:", source, line_no), source, line_no);
    index.add(*lemma, syn, hyp);
  }
  return index;
}

SynsetIndex load_synset_index(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_synset_index(in, path.string());
}

VerbClassIndex parse_verbclass_index(std::istream& in, const std::string& source) {
  VerbClassIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2) {
      throw ParseError(source, line_no, "expected 2 tab-separated fields, got " + std::to_string(fields.size()));
    }
    std::string id(trim(fields[0]));
    if (id.empty()) throw ParseError(source, line_no, "empty class id");
    index.add_class(id, parse_lemma_list(fields[1], source, line_no));
  }
  return index;
}

VerbClassIndex load_verbclass_index(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_verbclass_index(in, path.string());
}

PairSet parse_gold_pairs(std::istream& in, const std::string& source) {
  PairSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw ParseError(source, line_no, "expected cause<TAB>effect<TAB>label");
    }
    try {
      out.insert(EventPair{head_word(fields[0]), head_word(fields[1]), Provenance::gold,
                           parse_label(trim(fields[2]))});
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

PairSet load_gold_pairs(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_gold_pairs(in, path.string());
}

void write_pairs(std::ostream& out, const PairSet& pairs) {
  for (const auto& p : pairs) {
    out << p.cause.str() << '\t' << p.effect.str() << '\t' << to_string(p.provenance) << '\t'
        << to_string(p.label) << '\n';
  }
}

PairSet read_pairs(std::istream& in, const std::string& source) {
  PairSet out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 4) throw ParseError(source, line_no, "expected 4 tab-separated fields");
    try {
      out.insert(EventPair{Lemma(fields[0]), Lemma(fields[1]), parse_provenance(fields[2]), parse_label(fields[3])});
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

PairSet expand_wordnet(const EventPair& pair, const SynsetIndex& index) {
  require_causal(pair);
  auto causes = group(pair.cause, index.synonyms(pair.cause), index.hypernyms(pair.cause));
  auto effects = group(pair.effect, index.synonyms(pair.effect), index.hypernyms(pair.effect));
  return cross_minus_original(pair, causes, effects, Provenance::wordnet);
}

PairSet expand_verbnet(const EventPair& pair, const VerbClassIndex& index) {
  require_causal(pair);
  auto side = [&](const Lemma& head) {
    std::set<Lemma> g{head};
    for (const auto& cls : index.classes(head)) {
      const auto& m = index.members(cls);
      g.insert(m.begin(), m.end());
    }
    return g;
  };
  return cross_minus_original(pair, side(pair.cause), side(pair.effect), Provenance::verbnet);
}

PairSet expand_all(const PairSet& gold, const SynsetIndex& synsets, const VerbClassIndex& verbclasses) {
  std::set<std::pair<Lemma, Lemma>> gold_keys;
  for (const auto& g : gold) gold_keys.emplace(g.cause, g.effect);

  std::map<std::pair<Lemma, Lemma>, Provenance> merged;
  auto absorb = [&](const PairSet& found) {
    for (const auto& p : found) {
      std::pair<Lemma, Lemma> key{p.cause, p.effect};
      if (gold_keys.contains(key)) continue;
      auto [it, inserted] = merged.emplace(key, p.provenance);
      if (!inserted && it->second != p.provenance) it->second = Provenance::both;
    }
  };
  for (const auto& g : gold) {
    if (g.label != Label::causal) continue;
    absorb(expand_wordnet(g, synsets));
    absorb(expand_verbnet(g, verbclasses));
  }

  PairSet out;
  for (const auto& [key, prov] : merged) out.insert(EventPair{key.first, key.second, prov, Label::causal});
  return out;
}

}  // namespace knowdis
