#include "knowdis/annotator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>

#include "knowdis/parallel.hpp"

namespace knowdis {

namespace {

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string undouble(std::string stem) {
  std::size_t n = stem.size();
  if (n >= 3 && stem[n - 1] == stem[n - 2] && std::isalpha(static_cast<unsigned char>(stem[n - 1])) &&
      !is_vowel(stem[n - 1]) && stem[n - 1] != 'l' && stem[n - 1] != 's' && stem[n - 1] != 'z') {
    stem.pop_back();
  }
  return stem;
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    auto u = static_cast<unsigned char>(c);
    if (u < 128) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

std::string fraction_error(double fraction) {
  return "sampling fraction must lie in (0, 1], got " + std::to_string(fraction);
}

}  // namespace

void LemmaTable::add(std::string_view surface, const Lemma& lemma) {
  map_.insert_or_assign(lowercase(trim(surface)), lemma);
}

std::optional<Lemma> LemmaTable::lookup(std::string_view surface) const {
  auto it = map_.find(lowercase(surface));
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

LemmaTable parse_lemma_table(std::istream& in, const std::string& source) {
  LemmaTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split(line, '\t');
    if (fields.size() != 2 || trim(fields[0]).empty()) {
      throw ParseError(source, line_no, "expected surface<TAB>lemma");
    }
    try {
      table.add(fields[0], Lemma(fields[1]));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return table;
}

LemmaTable load_lemma_table(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return parse_lemma_table(in, path.string());
}

std::string fallback_lemma(std::string_view word) {
  std::string w(word);
  const std::size_t n = w.size();
  if (n > 4 && ends_with(w, "ies")) return w.substr(0, n - 3) + "y";
  if (n > 4 && ends_with(w, "es")) {
    std::string_view stem(w.data(), n - 2);
    if (ends_with(stem, "s") || ends_with(stem, "x") || ends_with(stem, "z") || ends_with(stem, "ch") ||
        ends_with(stem, "sh")) {
      return std::string(stem);
    }
  }
  if (n > 3 && ends_with(w, "s") && !ends_with(w, "ss") && !ends_with(w, "us") && !ends_with(w, "is")) {
    return w.substr(0, n - 1);
  }
  if (n > 4 && ends_with(w, "ed")) return undouble(w.substr(0, n - 2));
  if (n > 5 && ends_with(w, "ing")) return undouble(w.substr(0, n - 3));
  return w;
}

Tokenized tokenize_and_lemmatize(std::string_view text, const LemmaTable& table) {
  Tokenized out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (start == i) break;
    std::string_view raw = text.substr(start, i - start);

    std::size_t b = 0, e = raw.size();
    auto punct = [](char c) {
      auto u = static_cast<unsigned char>(c);
      return u < 128 && std::ispunct(u);
    };
    while (b < e && punct(raw[b])) ++b;
    while (e > b && punct(raw[e - 1])) --e;
    if (b == e) continue;
    std::string token(raw.substr(b, e - b));

    std::optional<Lemma> lemma = table.lookup(token);
    if (!lemma) {
      std::string lower = lowercase(token);
      try {
        lemma.emplace(fallback_lemma(lower));
      } catch (const std::invalid_argument&) {
        lemma.emplace(lower);
      }
    }
    out.tokens.push_back(std::move(token));
    out.lemmas.push_back(std::move(*lemma));
  }
  return out;
}

std::string_view to_string(PairSource s) { return s == PairSource::gold ? "gold" : "extracted"; }

std::string_view to_string(Orientation o) {
  return o == Orientation::cause_first ? "cause_first" : "effect_first";
}

bool satisfies_invariants(const LabeledSentence& s) {
  const auto& lemmas = s.sentence.lemmas;
  if (s.sentence.tokens.size() != lemmas.size()) return false;
  if (s.cause_idx == s.effect_idx) return false;
  if (s.cause_idx >= lemmas.size() || s.effect_idx >= lemmas.size()) return false;
  return lemmas[s.cause_idx] == s.pair.cause && lemmas[s.effect_idx] == s.pair.effect;
}

PairIndex::PairIndex(const PairSet& pairs) {
  std::map<std::pair<Lemma, Lemma>, EventPair> dedup;
  for (const auto& p : pairs) {
    if (p.label != Label::causal) continue;
    std::pair<Lemma, Lemma> key{p.cause, p.effect};
    auto it = dedup.find(key);
    if (it == dedup.end()) {
      dedup.emplace(key, p);
    } else if (p.provenance == Provenance::gold) {
      it->second = p;
    }
  }
  for (const auto& [key, p] : dedup) by_cause_[p.cause].push_back(p);
  size_ = dedup.size();
}

const std::vector<EventPair>* PairIndex::by_cause(const Lemma& cause) const {
  auto it = by_cause_.find(cause);
  return it == by_cause_.end() ? nullptr : &it->second;
}

std::vector<LabeledSentence> annotate(const SentenceRecord& sentence, const PairIndex& pairs) {
  std::unordered_map<Lemma, std::size_t> first, second;
  for (std::size_t i = 0; i < sentence.lemmas.size(); ++i) {
    if (!first.try_emplace(sentence.lemmas[i], i).second) second.try_emplace(sentence.lemmas[i], i);
  }

  std::vector<LabeledSentence> out;
  for (const auto& [lemma, cause_idx] : first) {
    const auto* candidates = pairs.by_cause(lemma);
    if (!candidates) continue;
    for (const auto& p : *candidates) {
      // a self pair takes the lemma's second occurrence as the effect
      const auto& where = p.effect == p.cause ? second : first;
      auto it = where.find(p.effect);
      if (it == where.end()) continue;
      std::size_t effect_idx = it->second;
      out.push_back(LabeledSentence{
          .sentence = sentence,
          .cause_idx = cause_idx,
          .effect_idx = effect_idx,
          .pair = p,
          .pair_source = p.provenance == Provenance::gold ? PairSource::gold : PairSource::extracted,
          .orientation = cause_idx < effect_idx ? Orientation::cause_first : Orientation::effect_first,
          .connective = std::nullopt,
          .cs_score = std::nullopt,
      });
    }
  }
  std::sort(out.begin(), out.end(), [](const LabeledSentence& a, const LabeledSentence& b) {
    return std::tie(a.pair.cause, a.pair.effect) < std::tie(b.pair.cause, b.pair.effect);
  });
  return out;
}

bool sample_keep(std::string_view doc_id, std::int64_t sent_id, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError(fraction_error(fraction));
  std::uint64_t h = hash_combine(stable_hash(doc_id, seed), mix64(static_cast<std::uint64_t>(sent_id)));
  return unit_interval(h) < fraction;
}

std::vector<RawSentence> sample_corpus(std::span<const RawSentence> corpus, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError(fraction_error(fraction));
  std::vector<RawSentence> out;
  for (const auto& s : corpus) {
    if (sample_keep(s.doc_id, s.sent_id, fraction, seed)) out.push_back(s);
  }
  return out;
}

RawSentence parse_corpus_line(std::string_view line, const std::string& source, std::size_t line_no) {
  try {
    auto j = nlohmann::json::parse(line);
    RawSentence r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.sent_id = j.at("sent_id").get<std::int64_t>();
    r.text = j.at("text").get<std::string>();
    if (r.sent_id < 0) throw ParseError(source, line_no, "sent_id must be >= 0");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, line_no, e.what());
  }
}

DistantDataset build_dn(std::istream& corpus, const PairSet& pairs, const LemmaTable& table,
                        const AnnotateOptions& options, const std::string& source) {
  if (!(options.fraction > 0.0 && options.fraction <= 1.0)) throw ConfigError(fraction_error(options.fraction));
  const PairIndex index(pairs);

  std::int64_t seen = 0, sampled = 0, skipped_empty = 0, skipped_long = 0;
  Dataset instances;
  std::vector<RawSentence> batch;

  auto flush = [&] {
    std::vector<std::vector<LabeledSentence>> found(batch.size());
    std::vector<int> status(batch.size(), 0);
    parallel_for(batch.size(), options.workers, [&](std::size_t i) {
      auto tk = tokenize_and_lemmatize(batch[i].text, table);
      if (tk.tokens.empty()) {
        status[i] = 1;
        return;
      }
      if (tk.tokens.size() > options.max_tokens) {
        status[i] = 2;
        return;
      }
      SentenceRecord rec{batch[i].doc_id, batch[i].sent_id, batch[i].text, std::move(tk.tokens),
                         std::move(tk.lemmas)};
      found[i] = annotate(rec, index);
    });
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (status[i] == 1) ++skipped_empty;
      if (status[i] == 2) ++skipped_long;
      for (auto& s : found[i]) instances.push_back(std::move(s));
    }
    batch.clear();
  };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(corpus, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    RawSentence r = parse_corpus_line(line, source, line_no);
    ++seen;
    if (!sample_keep(r.doc_id, r.sent_id, options.fraction, options.seed)) continue;
    ++sampled;
    batch.push_back(std::move(r));
    if (batch.size() >= options.batch_size) flush();
  }
  flush();
  canonical_sort(instances);

  DistantDataset out;
  out.instances = std::move(instances);
  std::int64_t gold = 0, extracted = 0;
  for (const auto& s : out.instances) (s.pair_source == PairSource::gold ? gold : extracted)++;
  auto& m = out.manifest;
  m.stage = "annotate";
  m.output_files["dn.jsonl"] = dataset_hash(out.instances);
  m.counts = {{"corpus_sentences", seen},
              {"sampled_sentences", sampled},
              {"skipped_empty", skipped_empty},
              {"skipped_long", skipped_long},
              {"instances", static_cast<std::int64_t>(out.instances.size())},
              {"gold_instances", gold},
              {"extracted_instances", extracted},
              {"pairs", static_cast<std::int64_t>(index.size())}};
  m.seal();
  m.timestamp = utc_timestamp();
  return out;
}

void canonical_sort(Dataset& data) {
  std::sort(data.begin(), data.end(), [](const LabeledSentence& a, const LabeledSentence& b) {
    return std::tie(a.sentence.doc_id, a.sentence.sent_id, a.pair.cause, a.pair.effect, a.cause_idx,
                    a.effect_idx) < std::tie(b.sentence.doc_id, b.sentence.sent_id, b.pair.cause, b.pair.effect,
                                             b.cause_idx, b.effect_idx);
  });
}

nlohmann::json to_json(const LabeledSentence& s) {
  nlohmann::json j;
  j["doc_id"] = s.sentence.doc_id;
  j["sent_id"] = s.sentence.sent_id;
  j["text"] = s.sentence.text;
  j["tokens"] = s.sentence.tokens;
  auto& lemmas = j["lemmas"] = nlohmann::json::array();
  for (const auto& l : s.sentence.lemmas) lemmas.push_back(l.str());
  j["cause_idx"] = s.cause_idx;
  j["effect_idx"] = s.effect_idx;
  j["cause"] = s.pair.cause.str();
  j["effect"] = s.pair.effect.str();
  j["provenance"] = std::string(to_string(s.pair.provenance));
  j["label"] = std::string(to_string(s.pair.label));
  j["pair_source"] = std::string(to_string(s.pair_source));
  j["orientation"] = std::string(to_string(s.orientation));
  j["connective"] = s.connective ? nlohmann::json(*s.connective) : nlohmann::json(nullptr);
  j["cs_score"] = s.cs_score ? nlohmann::json(*s.cs_score) : nlohmann::json(nullptr);
  return j;
}

LabeledSentence labeled_from_json(const nlohmann::json& j) {
  SentenceRecord rec;
  rec.doc_id = j.at("doc_id").get<std::string>();
  rec.sent_id = j.at("sent_id").get<std::int64_t>();
  rec.text = j.at("text").get<std::string>();
  rec.tokens = j.at("tokens").get<std::vector<std::string>>();
  for (const auto& l : j.at("lemmas")) rec.lemmas.emplace_back(l.get<std::string>());
  LabeledSentence s{
      .sentence = std::move(rec),
      .cause_idx = j.at("cause_idx").get<std::size_t>(),
      .effect_idx = j.at("effect_idx").get<std::size_t>(),
      .pair = EventPair{Lemma(j.at("cause").get<std::string>()), Lemma(j.at("effect").get<std::string>()),
                        parse_provenance(j.at("provenance").get<std::string>()),
                        parse_label(j.at("label").get<std::string>())},
      .pair_source = j.at("pair_source").get<std::string>() == "gold" ? PairSource::gold : PairSource::extracted,
      .orientation = j.at("orientation").get<std::string>() == "cause_first" ? Orientation::cause_first
                                                                             : Orientation::effect_first,
      .connective = std::nullopt,
      .cs_score = std::nullopt,
  };
  if (!j.at("connective").is_null()) s.connective = j["connective"].get<std::string>();
  if (!j.at("cs_score").is_null()) s.cs_score = j["cs_score"].get<double>();
  return s;
}

std::string serialize_jsonl(const Dataset& data) {
  std::string out;
  for (const auto& s : data) {
    out += to_json(s).dump();
    out.push_back('\n');
  }
  return out;
}

Dataset read_jsonl(std::istream& in, const std::string& source) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto s = labeled_from_json(nlohmann::json::parse(line));
      if (!satisfies_invariants(s)) throw ParseError(source, line_no, "instance violates index/lemma invariants");
      out.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_jsonl(in, path.string());
}

std::string dataset_hash(const Dataset& data) { return sha256_hex(serialize_jsonl(data)); }

Dataset parse_gold_sentences(std::istream& in, const LemmaTable& table, const std::string& source) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      SentenceRecord rec;
      rec.doc_id = j.at("doc_id").get<std::string>();
      rec.sent_id = j.at("sent_id").get<std::int64_t>();
      rec.text = j.at("text").get<std::string>();
      auto tk = tokenize_and_lemmatize(rec.text, table);
      rec.tokens = std::move(tk.tokens);
      rec.lemmas = std::move(tk.lemmas);
      auto c = j.at("cause_idx").get<std::size_t>();
      auto e = j.at("effect_idx").get<std::size_t>();
      if (c >= rec.tokens.size() || e >= rec.tokens.size() || c == e) {
        throw ParseError(source, line_no, "event indices out of range or equal");
      }
      Label label = parse_label(j.at("label").get<std::string>());
      EventPair pair{rec.lemmas[c], rec.lemmas[e], Provenance::gold, label};
      out.push_back(LabeledSentence{
          .sentence = std::move(rec),
          .cause_idx = c,
          .effect_idx = e,
          .pair = std::move(pair),
          .pair_source = PairSource::gold,
          .orientation = c < e ? Orientation::cause_first : Orientation::effect_first,
          .connective = std::nullopt,
          .cs_score = std::nullopt,
      });
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

Dataset load_gold_sentences(const std::filesystem::path& path, const LemmaTable& table) {
  auto in = open_or_throw(path);
  return parse_gold_sentences(in, table, path.string());
}

}  // namespace knowdis
