#include "knowdis/causal_strength.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>

#include "knowdis/parallel.hpp"

namespace knowdis {

namespace {

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

std::uint64_t lookup(const std::unordered_map<Lemma, std::uint64_t>& m, const Lemma& key) {
  auto it = m.find(key);
  return it == m.end() ? 0 : it->second;
}

bool key_less(const LabeledSentence& a, const LabeledSentence& b) {
  return std::tie(a.sentence.doc_id, a.sentence.sent_id, a.pair.cause, a.pair.effect, a.cause_idx, a.effect_idx) <
         std::tie(b.sentence.doc_id, b.sentence.sent_id, b.pair.cause, b.pair.effect, b.cause_idx, b.effect_idx);
}

double score_or_floor(const LabeledSentence& s) {
  return s.cs_score.value_or(-std::numeric_limits<double>::infinity());
}

std::uint64_t instance_hash(const LabeledSentence& s, std::uint64_t seed) {
  std::string key = s.sentence.doc_id + '\x1f' + std::to_string(s.sentence.sent_id) + '\x1f' + s.pair.cause.str() +
                    '\x1f' + s.pair.effect.str() + '\x1f' + std::to_string(s.cause_idx) + '\x1f' +
                    std::to_string(s.effect_idx);
  return stable_hash(key, seed);
}

std::vector<Lemma> lemmas_of(std::string_view text, const LemmaTable& table) {
  return tokenize_and_lemmatize(text, table).lemmas;
}

}  // namespace

std::vector<CopaRecord> read_copa(std::istream& in, const std::string& source) {
  std::vector<CopaRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CopaRecord r;
      r.premise = j.at("premise").get<std::string>();
      r.alt1 = j.at("alt1").get<std::string>();
      r.alt2 = j.at("alt2").get<std::string>();
      const auto& correct = j.at("correct");
      if (correct.is_number_integer()) {
        r.correct = correct.get<int>();
      } else if (correct.is_string()) {
        auto s = correct.get<std::string>();
        r.correct = s == "1" ? 1 : s == "2" ? 2 : 0;
      } else {
        r.correct = 0;
      }
      if (r.correct != 1 && r.correct != 2) throw ParseError(source, line_no, "correct must be 1 or 2");
      r.asks_for = j.at("asks_for").get<std::string>();
      if (r.asks_for != "cause" && r.asks_for != "effect") {
        throw ParseError(source, line_no, "asks_for must be 'cause' or 'effect'");
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

std::vector<CopaRecord> load_copa(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_copa(in, path.string());
}

std::vector<CausePairText> extract_copa_pairs(std::span<const CopaRecord> records, const LemmaTable& table) {
  std::vector<CausePairText> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.correct != 1 && r.correct != 2) throw ParseError("<copa>", i + 1, "correct must be 1 or 2");
    if (r.asks_for != "cause" && r.asks_for != "effect") {
      throw ParseError("<copa>", i + 1, "asks_for must be 'cause' or 'effect'");
    }
    const std::string& alternative = r.correct == 1 ? r.alt1 : r.alt2;
    CausePairText p;
    p.source = TextSource::copa;
    if (r.asks_for == "cause") {
      p.cause_tokens = lemmas_of(alternative, table);
      p.effect_tokens = lemmas_of(r.premise, table);
    } else {
      p.cause_tokens = lemmas_of(r.premise, table);
      p.effect_tokens = lemmas_of(alternative, table);
    }
    if (p.cause_tokens.empty() || p.effect_tokens.empty()) {
      throw ParseError("<copa>", i + 1, "premise and alternative must contain tokens");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::size_t midpoint_boundary(std::size_t cause_idx, std::size_t effect_idx) {
  return (cause_idx + effect_idx) / 2 + 1;
}

std::vector<CausePairText> extract_annotated_pairs(std::span<const LabeledSentence> gold) {
  std::vector<CausePairText> out;
  for (const auto& s : gold) {
    if (s.pair.label != Label::causal) continue;
    const auto& lemmas = s.sentence.lemmas;
    std::size_t b = midpoint_boundary(s.cause_idx, s.effect_idx);
    std::vector<Lemma> left(lemmas.begin(), lemmas.begin() + static_cast<std::ptrdiff_t>(b));
    std::vector<Lemma> right(lemmas.begin() + static_cast<std::ptrdiff_t>(b), lemmas.end());
    CausePairText p;
    p.source = TextSource::annotated;
    if (s.cause_idx < b) {
      p.cause_tokens = std::move(left);
      p.effect_tokens = std::move(right);
    } else {
      p.cause_tokens = std::move(right);
      p.effect_tokens = std::move(left);
    }
    out.push_back(std::move(p));
  }
  return out;
}

void CooccurrenceTable::bump(const Lemma& cause, const Lemma& effect, std::uint64_t by) {
  counts_[cause][effect] += by;
  rows_[cause] += by;
  cols_[effect] += by;
  total_ += by;
}

void CooccurrenceTable::add(const CausePairText& pair) {
  for (const auto& c : pair.cause_tokens) {
    for (const auto& e : pair.effect_tokens) bump(c, e, 1);
  }
  ++pair_count_;
}

void CooccurrenceTable::merge(const CooccurrenceTable& other) {
  for (const auto& [c, row] : other.counts_) {
    for (const auto& [e, n] : row) bump(c, e, n);
  }
  pair_count_ += other.pair_count_;
}

std::uint64_t CooccurrenceTable::count(const Lemma& cause, const Lemma& effect) const {
  auto it = counts_.find(cause);
  if (it == counts_.end()) return 0;
  return lookup(it->second, effect);
}

std::uint64_t CooccurrenceTable::row_sum(const Lemma& cause) const { return lookup(rows_, cause); }
std::uint64_t CooccurrenceTable::col_sum(const Lemma& effect) const { return lookup(cols_, effect); }

std::vector<Lemma> CooccurrenceTable::vocabulary() const {
  std::set<Lemma> w;
  for (const auto& [c, n] : rows_) w.insert(c);
  for (const auto& [e, n] : cols_) w.insert(e);
  return {w.begin(), w.end()};
}

std::vector<CooccurrenceTable::Entry> CooccurrenceTable::entries() const {
  std::vector<Entry> out;
  for (const auto& [c, row] : counts_) {
    for (const auto& [e, n] : row) {
      if (n > 0) out.push_back({c, e, n});
    }
  }
  std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.cause, a.effect) < std::tie(b.cause, b.effect);
  });
  return out;
}

void CooccurrenceTable::save(std::ostream& out) const {
  out << "#N\t" << pair_count_ << '\n';
  for (const auto& e : entries()) out << e.cause.str() << '\t' << e.effect.str() << '\t' << e.count << '\n';
}

CooccurrenceTable CooccurrenceTable::load(std::istream& in, const std::string& source) {
  auto parse_u64 = [&](std::string_view s, std::size_t line_no) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ParseError(source, line_no, "bad count '" + std::string(s) + "'");
    }
    return v;
  };

  CooccurrenceTable t;
  std::string line;
  if (!std::getline(in, line) || line.rfind("#N\t", 0) != 0) throw ParseError(source, 1, "missing #N header");
  t.pair_count_ = parse_u64(std::string_view(line).substr(3), 1);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, '\t');
    if (fields.size() != 3) throw ParseError(source, line_no, "expected cause<TAB>effect<TAB>count");
    try {
      t.bump(Lemma(fields[0]), Lemma(fields[1]), parse_u64(fields[2], line_no));
    } catch (const std::invalid_argument& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return t;
}

CooccurrenceTable build_table(std::span<const CausePairText> pairs, std::size_t workers) {
  const std::size_t chunks = std::max<std::size_t>(1, std::min(workers, pairs.size()));
  std::vector<CooccurrenceTable> partial(chunks);
  const std::size_t per = (pairs.size() + chunks - 1) / std::max<std::size_t>(chunks, 1);
  parallel_for(chunks, workers, [&](std::size_t k) {
    std::size_t begin = k * per;
    std::size_t end = std::min(pairs.size(), begin + per);
    for (std::size_t i = begin; i < end; ++i) partial[k].add(pairs[i]);
  });
  CooccurrenceTable table;
  for (const auto& p : partial) table.merge(p);
  return table;
}

void CSParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in (0, 1]");
  if (!(lambda_interp >= 0.0 && lambda_interp <= 1.0)) throw ConfigError("lambda_interp must lie in [0, 1]");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
}

double causal_strength(const Lemma& cause, const Lemma& effect, const CooccurrenceTable& table,
                       const CSParams& params) {
  const double m = static_cast<double>(table.total());
  const double n = static_cast<double>(table.pair_count());
  if (m == 0.0 || n == 0.0) return 0.0;
  const auto f = table.count(cause, effect);
  const auto row = table.row_sum(cause);
  const auto col = table.col_sum(effect);
  if (params.epsilon == 0.0 && (f == 0 || row == 0 || col == 0)) return 0.0;

  double p_joint = static_cast<double>(f) / n;
  double p_cause = static_cast<double>(row) / m;
  double p_effect = static_cast<double>(col) / m;
  if (params.epsilon > 0.0) {
    p_joint = std::max(p_joint, params.epsilon);
    p_cause = std::max(p_cause, params.epsilon);
    p_effect = std::max(p_effect, params.epsilon);
  }
  const double necessity = p_joint / (std::pow(p_cause, params.alpha) * p_effect);
  const double sufficiency = p_joint / (p_cause * std::pow(p_effect, params.alpha));
  return std::pow(necessity, params.lambda_interp) * std::pow(sufficiency, 1.0 - params.lambda_interp);
}

double span_strength(std::span<const Lemma> cause_span, std::span<const Lemma> effect_span,
                     const CooccurrenceTable& table, const CSParams& params) {
  const std::size_t denom = cause_span.size() + effect_span.size();
  if (denom == 0) return 0.0;
  double sum = 0.0;
  for (const auto& i : cause_span) {
    for (const auto& j : effect_span) sum += causal_strength(i, j, table, params);
  }
  return sum / static_cast<double>(denom);
}

ConnectiveLexicon ConnectiveLexicon::from_phrases(const std::vector<std::string>& phrases, const LemmaTable& table) {
  ConnectiveLexicon lex;
  std::set<std::string> seen;
  for (const auto& raw : phrases) {
    std::string text(trim(raw));
    for (char& c : text) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (text.empty() || !seen.insert(text).second) continue;
    auto lemmas = lemmas_of(text, table);
    if (lemmas.empty()) continue;
    lex.phrases_.push_back({std::move(text), std::move(lemmas)});
  }
  return lex;
}

ConnectiveLexicon ConnectiveLexicon::parse(std::istream& in, const LemmaTable& table) {
  std::vector<std::string> phrases;
  std::string line;
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    phrases.emplace_back(t);
  }
  return from_phrases(phrases, table);
}

ConnectiveLexicon ConnectiveLexicon::load(const std::filesystem::path& path, const LemmaTable& table) {
  auto in = open_or_throw(path);
  return parse(in, table);
}

const std::vector<std::string>& ConnectiveLexicon::default_phrases() {
  static const std::vector<std::string> kPhrases = {
      "because",   "because of", "since",       "as",          "so",        "therefore",  "thus",
      "hence",     "consequently", "as a result", "due to",    "lead to",   "leads to",   "led to",
      "result in", "results in", "resulted in", "caused by",   "owing to",
  };
  return kPhrases;
}

std::optional<ConnectiveMatch> find_connective(const LabeledSentence& instance, const ConnectiveLexicon& lexicon) {
  const auto& lemmas = instance.sentence.lemmas;
  const std::size_t lo = std::min(instance.cause_idx, instance.effect_idx) + 1;
  const std::size_t hi = std::max(instance.cause_idx, instance.effect_idx);  // exclusive
  std::optional<ConnectiveMatch> best;
  for (std::size_t start = lo; start < hi; ++start) {
    for (const auto& phrase : lexicon.phrases()) {
      const std::size_t len = phrase.lemmas.size();
      if (start + len > hi) continue;
      if (!std::equal(phrase.lemmas.begin(), phrase.lemmas.end(), lemmas.begin() + static_cast<std::ptrdiff_t>(start))) {
        continue;
      }
      bool better = !best || len > best->length ||
                    (len == best->length && start == best->begin && phrase.text < best->phrase);
      if (better) best = ConnectiveMatch{phrase.text, start, len};
    }
  }
  return best;
}

std::optional<std::string> detect_connective(const LabeledSentence& instance, const ConnectiveLexicon& lexicon) {
  auto m = find_connective(instance, lexicon);
  if (!m) return std::nullopt;
  return m->phrase;
}

SentenceScore score_sentence(LabeledSentence& instance, const CooccurrenceTable& table, const CSParams& params,
                             const ConnectiveLexicon* lexicon) {
  const auto& lemmas = instance.sentence.lemmas;
  const std::span<const Lemma> all(lemmas);
  std::optional<ConnectiveMatch> match;
  if (lexicon) match = find_connective(instance, *lexicon);

  std::span<const Lemma> left, right;
  if (match) {
    left = all.first(match->begin);
    right = all.subspan(match->begin + match->length);
  } else {
    std::size_t b = std::min(midpoint_boundary(instance.cause_idx, instance.effect_idx), lemmas.size());
    left = all.first(b);
    right = all.subspan(b);
  }
  const bool cause_left = instance.cause_idx < instance.effect_idx;
  auto cause_span = cause_left ? left : right;
  auto effect_span = cause_left ? right : left;

  SentenceScore out;
  out.empty_span = cause_span.empty() || effect_span.empty();
  out.score = out.empty_span ? 0.0 : span_strength(cause_span, effect_span, table, params);
  instance.cs_score = out.score;
  instance.connective = match ? std::optional<std::string>(match->phrase) : std::nullopt;
  return out;
}

void PartitionOptions::validate() const {
  if (!(keep_c > 0.0 && keep_c <= 1.0)) throw ConfigError("keep_c must lie in (0, 1]");
  if (!(keep_nc > 0.0 && keep_nc <= 1.0)) throw ConfigError("keep_nc must lie in (0, 1]");
}

FilterResult partition_and_keep(Dataset scored, const PartitionOptions& options) {
  options.validate();
  Dataset with_conn, without_conn;
  for (auto& s : scored) (s.connective ? with_conn : without_conn).push_back(std::move(s));

  auto rank = [&](Dataset& part) {
    if (options.rank_by_score) {
      std::sort(part.begin(), part.end(), [](const LabeledSentence& a, const LabeledSentence& b) {
        double sa = score_or_floor(a), sb = score_or_floor(b);
        if (sa != sb) return sa > sb;
        return key_less(a, b);
      });
    } else {
      std::sort(part.begin(), part.end(), [&](const LabeledSentence& a, const LabeledSentence& b) {
        auto ha = instance_hash(a, options.seed), hb = instance_hash(b, options.seed);
        if (ha != hb) return ha < hb;
        return key_less(a, b);
      });
    }
  };
  rank(with_conn);
  rank(without_conn);

  FilterResult r;
  r.connective_total = with_conn.size();
  r.plain_total = without_conn.size();
  r.connective_kept = std::min(with_conn.size(), ceil_fraction(options.keep_c, with_conn.size()));
  r.plain_kept = std::min(without_conn.size(), ceil_fraction(options.keep_nc, without_conn.size()));
  for (std::size_t i = 0; i < r.connective_kept; ++i) r.kept.push_back(std::move(with_conn[i]));
  for (std::size_t i = 0; i < r.plain_kept; ++i) r.kept.push_back(std::move(without_conn[i]));
  canonical_sort(r.kept);
  return r;
}

void order_by_confidence(Dataset& data) {
  std::sort(data.begin(), data.end(), [](const LabeledSentence& a, const LabeledSentence& b) {
    double sa = score_or_floor(a), sb = score_or_floor(b);
    if (sa != sb) return sa > sb;
    return key_less(a, b);
  });
}

}  // namespace knowdis
