#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "knowdis/annotator.hpp"

using namespace knowdis;

namespace {

SentenceRecord record(std::string doc, std::int64_t sid, std::vector<std::string> lemmas) {
  SentenceRecord r;
  r.doc_id = std::move(doc);
  r.sent_id = sid;
  for (auto& l : lemmas) {
    r.tokens.push_back(l);
    r.lemmas.emplace_back(l);
    r.text += (r.text.empty() ? "" : " ") + l;
  }
  return r;
}

EventPair causal(std::string_view c, std::string_view e, Provenance p = Provenance::gold) {
  return EventPair{Lemma(c), Lemma(e), p, Label::causal};
}

std::string corpus_line(const std::string& doc, std::int64_t sid, const std::string& text) {
  nlohmann::json j{{"doc_id", doc}, {"sent_id", sid}, {"text", text}};
  return j.dump() + "\n";
}

}  // namespace

TEST_CASE("tokenize uses the table first") {
  LemmaTable t;
  t.add("attacked", Lemma("attack"));
  auto tk = tokenize_and_lemmatize("Police attacked.", t);
  CHECK(tk.tokens == std::vector<std::string>{"Police", "attacked"});
  REQUIRE(tk.lemmas.size() == 2);
  CHECK(tk.lemmas[0].str() == "police");
  CHECK(tk.lemmas[1].str() == "attack");
}

TEST_CASE("tokenize edge cases") {
  LemmaTable t;
  CHECK(tokenize_and_lemmatize("", t).tokens.empty());
  CHECK(tokenize_and_lemmatize("  ... -- ", t).tokens.empty());
  auto tk = tokenize_and_lemmatize("killings", t);
  CHECK(tk.lemmas[0].str() == "killing");
}

TEST_CASE("suffix fallback") {
  CHECK(fallback_lemma("floods") == "flood");
  CHECK(fallback_lemma("parties") == "party");
  CHECK(fallback_lemma("crashes") == "crash");
  CHECK(fallback_lemma("boxes") == "box");
  CHECK(fallback_lemma("stopped") == "stop");
  CHECK(fallback_lemma("running") == "run");
  CHECK(fallback_lemma("killed") == "kill");
  CHECK(fallback_lemma("falling") == "fall");
  CHECK(fallback_lemma("glass") == "glass");
  CHECK(fallback_lemma("virus") == "virus");
  CHECK(fallback_lemma("is") == "is");
}

TEST_CASE("lemma table file") {
  std::istringstream in("# surface\tlemma\nWent\tgo\n\nmice\tmouse\n");
  auto t = parse_lemma_table(in);
  CHECK(t.size() == 2);
  CHECK(t.lookup("went")->str() == "go");
  CHECK(t.lookup("WENT")->str() == "go");
  CHECK_FALSE(t.lookup("gone"));
  std::istringstream bad("went\n");
  CHECK_THROWS_AS(parse_lemma_table(bad), ParseError);
}

TEST_CASE("annotate anchors the first occurrence") {
  PairIndex idx({causal("attack", "kill")});
  auto out = annotate(record("d", 0, {"police", "attack", "man", "kill"}), idx);
  REQUIRE(out.size() == 1);
  CHECK(out[0].cause_idx == 1);
  CHECK(out[0].effect_idx == 3);
  CHECK(out[0].orientation == Orientation::cause_first);
  CHECK(satisfies_invariants(out[0]));

  auto rev = annotate(record("d", 1, {"kill", "attack"}), idx);
  REQUIRE(rev.size() == 1);
  CHECK(rev[0].orientation == Orientation::effect_first);

  auto rep = annotate(record("d", 2, {"attack", "kill", "attack", "kill"}), idx);
  REQUIRE(rep.size() == 1);
  CHECK(rep[0].cause_idx == 0);
  CHECK(rep[0].effect_idx == 1);
}

TEST_CASE("self pair needs two positions") {
  PairIndex idx({causal("attack", "attack")});
  CHECK(annotate(record("d", 0, {"attack", "man"}), idx).empty());
  CHECK(annotate(record("d", 0, {"attack", "attack"}), idx).size() == 1);
}

TEST_CASE("one instance per matched pair and gold shadows extracted") {
  PairIndex idx({causal("storm", "flood"), causal("storm", "outage", Provenance::wordnet),
                 causal("storm", "flood", Provenance::verbnet),
                 EventPair{Lemma("storm"), Lemma("rain"), Provenance::gold, Label::noncausal}});
  CHECK(idx.size() == 2);
  auto out = annotate(record("d", 0, {"storm", "flood", "outage", "rain"}), idx);
  REQUIRE(out.size() == 2);
  CHECK(out[0].pair.effect.str() == "flood");
  CHECK(out[0].pair_source == PairSource::gold);
  CHECK(out[1].pair.effect.str() == "outage");
  CHECK(out[1].pair_source == PairSource::extracted);
}

TEST_CASE("sampling rate stays inside three sigma") {
  const std::size_t n = 100000;
  const double p = 0.05;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) kept += sample_keep("doc" + std::to_string(i / 50), std::int64_t(i % 50), p, 7);
  const double sigma = std::sqrt(n * p * (1 - p));
  CHECK(std::abs(double(kept) - n * p) < 3 * sigma);
}

TEST_CASE("sampling is deterministic and fraction one is identity") {
  std::vector<RawSentence> corpus;
  for (int i = 0; i < 200; ++i) corpus.push_back({"d" + std::to_string(i % 7), i, "x"});
  auto a = sample_corpus(corpus, 0.3, 4), b = sample_corpus(corpus, 0.3, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].sent_id == b[i].sent_id);
  CHECK(sample_corpus(corpus, 1.0, 4).size() == corpus.size());
  CHECK_THROWS_AS(sample_corpus(corpus, 0.0, 4), ConfigError);
  CHECK_THROWS_AS(sample_corpus(corpus, 1.01, 4), ConfigError);
}

TEST_CASE("empty corpus gives an empty dataset with a manifest") {
  std::istringstream in("");
  auto dn = build_dn(in, {causal("a", "b")}, LemmaTable{}, {.fraction = 1.0});
  CHECK(dn.instances.empty());
  CHECK(dn.manifest.counts.at("instances") == 0);
  CHECK(!dn.manifest.output_files.at("dn.jsonl").empty());
}

TEST_CASE("planted corpus yields exactly the planted instances") {
  std::mt19937_64 rng(21);
  const std::vector<std::string> filler = {"the", "report", "said", "on", "monday", "city", "officials", "were"};
  std::string text;
  std::size_t planted = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> words;
    for (int k = 0; k < 6; ++k) words.push_back(filler[rng() % filler.size()]);
    if (i % 20 == 3) {
      words.insert(words.begin() + 1, "storm");
      words.push_back(i % 40 == 3 ? "floods" : "flooded");
      ++planted;
    } else if (i % 13 == 0) {
      words.push_back("storm");  // only one side of the pair
    }
    std::string s;
    for (auto& w : words) s += w + " ";
    text += corpus_line("doc" + std::to_string(i / 25), i % 25, s);
  }
  REQUIRE(planted == 50);
  LemmaTable table;
  table.add("flooded", Lemma("flood"));
  for (std::size_t workers : {1u, 3u}) {
    std::istringstream in(text);
    auto dn = build_dn(in, {causal("storm", "flood")}, table, {.fraction = 1.0, .seed = 1, .workers = workers, .batch_size = 64});
    CHECK(dn.instances.size() == 50);
    for (const auto& s : dn.instances) CHECK(satisfies_invariants(s));
  }
  std::istringstream a(text), b(text);
  auto x = build_dn(a, {causal("storm", "flood")}, table, {.fraction = 1.0, .seed = 1, .workers = 1});
  auto y = build_dn(b, {causal("storm", "flood")}, table, {.fraction = 1.0, .seed = 1, .workers = 4, .batch_size = 7});
  CHECK(x.manifest.output_files == y.manifest.output_files);
}

TEST_CASE("long and empty sentences are skipped and counted") {
  std::string longtext;
  for (int i = 0; i < 130; ++i) longtext += "storm flood ";
  std::string text = corpus_line("d", 0, longtext) + corpus_line("d", 1, " ... ") + corpus_line("d", 2, "storm flood");
  std::istringstream in(text);
  auto dn = build_dn(in, {causal("storm", "flood")}, LemmaTable{}, {.fraction = 1.0});
  CHECK(dn.instances.size() == 1);
  CHECK(dn.manifest.counts.at("skipped_long") == 1);
  CHECK(dn.manifest.counts.at("skipped_empty") == 1);
}

TEST_CASE("corpus line errors carry the line number") {
  std::istringstream in(corpus_line("d", 0, "a b") + "{\"doc_id\": \"d\"}\n");
  try {
    build_dn(in, {causal("a", "b")}, LemmaTable{}, {.fraction = 1.0});
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("dataset jsonl round-trips") {
  PairIndex idx({causal("storm", "flood")});
  auto out = annotate(record("d", 4, {"storm", "because", "flood"}), idx);
  out[0].connective = "because";
  out[0].cs_score = 0.25;
  auto text = serialize_jsonl(out);
  std::istringstream in(text);
  auto back = read_jsonl(in);
  REQUIRE(back.size() == 1);
  CHECK(serialize_jsonl(back) == text);
  CHECK(back[0].connective == std::optional<std::string>("because"));

  auto j = to_json(out[0]);
  j["cause_idx"] = 2;
  std::istringstream broken(j.dump() + "\n");
  CHECK_THROWS_AS(read_jsonl(broken), ParseError);
}

TEST_CASE("gold sentence file") {
  std::istringstream in(
      R"({"doc_id":"a","sent_id":0,"text":"The storm caused floods.","cause_idx":1,"effect_idx":3,"label":"causal"})"
      "\n");
  auto gold = parse_gold_sentences(in, LemmaTable{});
  REQUIRE(gold.size() == 1);
  CHECK(gold[0].pair.cause.str() == "storm");
  CHECK(gold[0].pair.effect.str() == "flood");
  CHECK(gold[0].pair.label == Label::causal);
  std::istringstream bad(R"({"doc_id":"a","sent_id":0,"text":"storm","cause_idx":0,"effect_idx":4,"label":"causal"})"
                         "\n");
  CHECK_THROWS_AS(parse_gold_sentences(bad, LemmaTable{}), ParseError);
}
