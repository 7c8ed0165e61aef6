#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "knowdis/causal_strength.hpp"
#include "oracles.hpp"

using namespace knowdis;

namespace {

std::vector<Lemma> lemmas(const oracle::Words& w) {
  std::vector<Lemma> out;
  for (const auto& x : w) out.emplace_back(x);
  return out;
}

CausePairText text_pair(const oracle::Words& c, const oracle::Words& e) {
  return CausePairText{lemmas(c), lemmas(e), TextSource::copa};
}

CooccurrenceTable two_pair_table() {
  std::vector<CausePairText> pairs{text_pair({"attack"}, {"killed"}), text_pair({"rain"}, {"flood"})};
  return build_table(pairs);
}

LabeledSentence instance(const oracle::Words& words, std::size_t c, std::size_t e) {
  LabeledSentence s{.pair = EventPair{Lemma(words[c]), Lemma(words[e]), Provenance::gold, Label::causal}};
  s.sentence.doc_id = "d";
  for (const auto& w : words) {
    s.sentence.tokens.push_back(w);
    s.sentence.lemmas.emplace_back(w);
  }
  s.cause_idx = c;
  s.effect_idx = e;
  s.orientation = c < e ? Orientation::cause_first : Orientation::effect_first;
  return s;
}

LabeledSentence scored(std::string doc, double score, bool conn) {
  auto s = instance({"a", "x", "b"}, 0, 2);
  s.sentence.doc_id = std::move(doc);
  s.cs_score = score;
  if (conn) s.connective = "because";
  return s;
}

}  // namespace

TEST_CASE("copa extraction follows asks_for") {
  std::istringstream in(
      R"({"premise":"The woman hired a lawyer.","alt1":"She decided to sue her employer.","alt2":"She decided to run for office.","correct":1,"asks_for":"cause"})"
      "\n"
      R"({"premise":"It rained","alt1":"The sun shone","alt2":"The street flooded","correct":2,"asks_for":"effect"})"
      "\n");
  auto recs = read_copa(in);
  auto pairs = extract_copa_pairs(recs, LemmaTable{});
  REQUIRE(pairs.size() == 2);
  auto lem = [](std::string_view text) { return tokenize_and_lemmatize(text, LemmaTable{}).lemmas; };
  CHECK(pairs[0].cause_tokens == lem("She decided to sue her employer."));
  CHECK(pairs[0].effect_tokens == lem("The woman hired a lawyer."));
  CHECK(pairs[1].cause_tokens == lem("It rained"));
  CHECK(pairs[1].effect_tokens == lem("The street flooded"));
  CHECK(pairs[1].cause_tokens.back().str() == "rain");
  CHECK(extract_copa_pairs({}, LemmaTable{}).empty());
}

TEST_CASE("copa records are validated") {
  std::istringstream bad_correct(R"({"premise":"a","alt1":"b","alt2":"c","correct":3,"asks_for":"cause"})"
                                 "\n");
  CHECK_THROWS_AS(read_copa(bad_correct), ParseError);
  std::istringstream bad_asks(R"({"premise":"a","alt1":"b","alt2":"c","correct":1,"asks_for":"why"})"
                              "\n");
  CHECK_THROWS_AS(read_copa(bad_asks), ParseError);
}

TEST_CASE("annotated pairs split at the event midpoint") {
  auto s = instance({"a", "police", "attack", "shortly", "after", "kimani", "gary", "was", "killed"}, 2, 8);
  auto out = extract_annotated_pairs(Dataset{s});
  REQUIRE(out.size() == 1);
  CHECK(std::find(out[0].cause_tokens.begin(), out[0].cause_tokens.end(), Lemma("attack")) != out[0].cause_tokens.end());
  CHECK(std::find(out[0].effect_tokens.begin(), out[0].effect_tokens.end(), Lemma("killed")) != out[0].effect_tokens.end());

  auto adj = extract_annotated_pairs(Dataset{instance({"w0", "w1", "w2", "c", "e", "w5"}, 3, 4)});
  CHECK(adj[0].cause_tokens == lemmas({"w0", "w1", "w2", "c"}));
  CHECK(adj[0].effect_tokens == lemmas({"e", "w5"}));

  auto rev = extract_annotated_pairs(Dataset{instance({"e", "x", "c"}, 2, 0)});
  CHECK(rev[0].cause_tokens == lemmas({"c"}));
  CHECK(rev[0].effect_tokens == lemmas({"e", "x"}));

  auto neg = instance({"a", "b"}, 0, 1);
  neg.pair.label = Label::noncausal;
  CHECK(extract_annotated_pairs(Dataset{neg}).empty());
}

TEST_CASE("table counting") {
  auto t = two_pair_table();
  CHECK(t.count(Lemma("attack"), Lemma("killed")) == 1);
  CHECK(t.count(Lemma("rain"), Lemma("flood")) == 1);
  CHECK(t.count(Lemma("rain"), Lemma("killed")) == 0);
  CHECK(t.total() == 2);
  CHECK(t.pair_count() == 2);

  std::vector<CausePairText> dup{text_pair({"a", "a"}, {"b"})};
  CHECK(build_table(dup).count(Lemma("a"), Lemma("b")) == 2);

  CooccurrenceTable empty = build_table({});
  CHECK(empty.total() == 0);
  CHECK(empty.pair_count() == 0);
  CHECK(empty.vocabulary().empty());
  CHECK(causal_strength(Lemma("a"), Lemma("b"), empty, CSParams{}) == 0.0);
}

TEST_CASE("hand-computed causal strength") {
  auto t = two_pair_table();
  CSParams p;
  CHECK(causal_strength(Lemma("attack"), Lemma("killed"), t, p) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(causal_strength(Lemma("attack"), Lemma("flood"), t, p) == 0.0);

  // alpha 1 collapses to the plain ratio p(i,j) / (p(i) p(j))
  p.alpha = 1.0;
  CHECK(causal_strength(Lemma("attack"), Lemma("killed"), t, p) == doctest::Approx(0.5 / (0.5 * 0.5)));

  auto s = instance({"attack", "killed"}, 0, 1);
  auto sc = score_sentence(s, t, CSParams{}, nullptr);
  CHECK(sc.score == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-12));
  CHECK_FALSE(sc.empty_span);
  CHECK(s.cs_score.has_value());
}

TEST_CASE("duplicating span tokens doubles the sentence score") {
  auto t = two_pair_table();
  auto one = instance({"attack", "killed"}, 0, 1);
  auto two = instance({"attack", "attack", "killed", "killed"}, 0, 2);
  double a = score_sentence(one, t, CSParams{}, nullptr).score;
  double b = score_sentence(two, t, CSParams{}, nullptr).score;
  CHECK(b == doctest::Approx(2 * a).epsilon(1e-12));
}

TEST_CASE("all-zero strengths score zero") {
  auto t = two_pair_table();
  auto s = instance({"storm", "outage"}, 0, 1);
  CHECK(score_sentence(s, t, CSParams{}, nullptr).score == 0.0);
}

TEST_CASE("params are validated") {
  CSParams p;
  p.alpha = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = CSParams{};
  p.lambda_interp = 1.5;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("connective detection takes the longest match inside the window") {
  auto lex = ConnectiveLexicon::from_phrases({"because", "because of"}, LemmaTable{});
  CHECK(detect_connective(instance({"kill", "because", "of", "attack"}, 0, 3), lex) ==
        std::optional<std::string>("because of"));
  CHECK_FALSE(detect_connective(instance({"kill", "after", "the", "attack"}, 0, 3), lex));
  CHECK_FALSE(detect_connective(instance({"because", "kill", "attack", "because"}, 1, 2), lex));
  // "because of" would overrun the effect token
  CHECK(detect_connective(instance({"kill", "because", "of"}, 0, 2), lex) == std::optional<std::string>("because"));
}

TEST_CASE("connective splits the spans and is excluded from both") {
  std::vector<CausePairText> pairs{text_pair({"storm"}, {"flood"}), text_pair({"because"}, {"flood"}),
                                   text_pair({"storm"}, {"because"})};
  auto t = build_table(pairs);
  auto lex = ConnectiveLexicon::from_phrases({"because"}, LemmaTable{});
  auto s = instance({"flood", "because", "storm"}, 2, 0);
  double got = score_sentence(s, t, CSParams{}, &lex).score;
  CHECK(s.connective == std::optional<std::string>("because"));
  using oracle::TextPair;
  std::vector<TextPair> raw{{{"storm"}, {"flood"}}, {{"because"}, {"flood"}}, {{"storm"}, {"because"}}};
  CHECK(got == doctest::Approx(oracle::span(raw, {"storm"}, {"flood"}, 0.5, 0.5)).epsilon(1e-12));
}

TEST_CASE("connective outside the window falls back to the midpoint") {
  auto t = two_pair_table();
  auto lex = ConnectiveLexicon::from_phrases({"because"}, LemmaTable{});
  auto s = instance({"because", "attack", "killed"}, 1, 2);
  auto sc = score_sentence(s, t, CSParams{}, &lex);
  CHECK_FALSE(sc.empty_span);
  CHECK_FALSE(s.connective);
  std::vector<oracle::TextPair> raw{{{"attack"}, {"killed"}}, {{"rain"}, {"flood"}}};
  CHECK(sc.score == doctest::Approx(oracle::span(raw, {"because", "attack"}, {"killed"}, 0.5, 0.5)).epsilon(1e-12));
}

TEST_CASE("partition keeps the top of each side") {
  Dataset d;
  for (double v : {3.0, 2.0, 1.0, 0.5}) d.push_back(scored("c" + std::to_string(v), v, true));
  for (int i = 0; i < 10; ++i) d.push_back(scored("n" + std::to_string(i), i, false));
  auto r = partition_and_keep(d);
  CHECK(r.connective_total == 4);
  CHECK(r.connective_kept == 2);
  CHECK(r.plain_total == 10);
  CHECK(r.plain_kept == 1);
  std::multiset<double> kept;
  for (const auto& s : r.kept) kept.insert(*s.cs_score);
  CHECK(kept == std::multiset<double>{2.0, 3.0, 9.0});
  CHECK(partition_and_keep({}).kept.empty());
}

TEST_CASE("random retention keeps the same counts") {
  Dataset d;
  for (int i = 0; i < 7; ++i) d.push_back(scored("d" + std::to_string(i), i, i % 2 == 0));
  PartitionOptions o;
  o.rank_by_score = false;
  o.seed = 3;
  auto r = partition_and_keep(d, o);
  CHECK(r.connective_kept == 2);
  CHECK(r.plain_kept == 1);
  auto again = partition_and_keep(d, o);
  CHECK(serialize_jsonl(r.kept) == serialize_jsonl(again.kept));
}

TEST_CASE("table marginals stay consistent and agree with the oracle") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t vocab = 2 + rng() % 19;
    auto word = [&] { return "w" + std::to_string(rng() % vocab); };
    std::vector<oracle::TextPair> raw;
    std::vector<CausePairText> pairs;
    std::size_t n = 1 + rng() % 8;
    for (std::size_t k = 0; k < n; ++k) {
      oracle::Words c(1 + rng() % 4), e(1 + rng() % 4);
      for (auto& w : c) w = word();
      for (auto& w : e) w = word();
      raw.push_back({c, e});
      pairs.push_back(text_pair(c, e));
    }
    auto t = build_table(pairs, 1 + rng() % 3);
    std::uint64_t rows = 0, cols = 0;
    for (const auto& w : t.vocabulary()) {
      rows += t.row_sum(w);
      cols += t.col_sum(w);
    }
    CHECK(rows == t.total());
    CHECK(cols == t.total());
    CHECK(t.pair_count() == n);

    CSParams p;
    p.alpha = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
    p.lambda_interp = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    for (std::size_t i = 0; i < vocab; ++i)
      for (std::size_t j = 0; j < vocab; ++j) {
        std::string a = "w" + std::to_string(i), b = "w" + std::to_string(j);
        double want = oracle::cs(raw, a, b, p.alpha, p.lambda_interp);
        double got = causal_strength(Lemma(a), Lemma(b), t, p);
        CHECK(std::abs(got - want) <= 1e-12 * std::max(1.0, std::abs(want)));
        CHECK(got >= 0.0);
      }
  }
}

TEST_CASE("another co-occurrence raises necessity") {
  std::vector<oracle::TextPair> raw{{{"a"}, {"b"}}, {{"a"}, {"c"}}, {{"d"}, {"b"}}};
  double before = oracle::cs(raw, "a", "b", 0.5, 1.0);
  raw.push_back({{"a"}, {"b"}});
  double after = oracle::cs(raw, "a", "b", 0.5, 1.0);
  std::vector<CausePairText> pairs;
  for (const auto& [c, e] : raw) pairs.push_back(text_pair(c, e));
  CSParams nec_only;
  nec_only.lambda_interp = 1.0;
  CHECK(causal_strength(Lemma("a"), Lemma("b"), build_table(pairs), nec_only) == doctest::Approx(after).epsilon(1e-12));
  CHECK(after > before);
}

TEST_CASE("table file round-trips") {
  auto t = two_pair_table();
  std::stringstream io;
  t.save(io);
  auto back = CooccurrenceTable::load(io);
  CHECK(back.total() == t.total());
  CHECK(back.pair_count() == t.pair_count());
  CHECK(causal_strength(Lemma("attack"), Lemma("killed"), back, CSParams{}) ==
        causal_strength(Lemma("attack"), Lemma("killed"), t, CSParams{}));
}
