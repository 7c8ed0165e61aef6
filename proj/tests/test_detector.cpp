#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "knowdis/detector.hpp"
#include "oracles.hpp"

using namespace knowdis;

namespace {

LabeledSentence make(const std::string& doc, std::int64_t sid, std::vector<std::string> words, std::size_t c,
                     std::size_t e, bool causal, std::optional<std::string> conn = std::nullopt) {
  LabeledSentence s{.pair = EventPair{Lemma(words[c]), Lemma(words[e]), Provenance::gold,
                                      causal ? Label::causal : Label::noncausal}};
  s.sentence.doc_id = doc;
  s.sentence.sent_id = sid;
  for (auto& w : words) {
    s.sentence.tokens.push_back(w);
    s.sentence.lemmas.emplace_back(w);
  }
  s.cause_idx = c;
  s.effect_idx = e;
  s.orientation = c < e ? Orientation::cause_first : Orientation::effect_first;
  s.connective = std::move(conn);
  return s;
}

// causal iff a "because" sits between the events
Dataset separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::vector<std::string> ev = {"storm", "flood", "riot", "fire", "crash", "strike"};
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    bool pos = i % 2 == 0;
    std::string a = ev[rng() % ev.size()], b = ev[rng() % ev.size()];
    if (a == b) b = "outage";
    d.push_back(make("d" + std::to_string(i), 0, {a, pos ? "because" : "and", b}, 0, 2, pos,
                     pos ? std::optional<std::string>("because") : std::nullopt));
  }
  return d;
}

Example random_example(std::mt19937_64& rng, std::size_t dims) {
  Example ex;
  std::set<FeatureId> ids;
  std::size_t k = 1 + rng() % std::min<std::size_t>(dims, 6);
  while (ids.size() < k) ids.insert(rng() % dims);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto id : ids) ex.x.entries.push_back({id, u(rng)});
  ex.positive = rng() % 2;
  return ex;
}

}  // namespace

TEST_CASE("feature strings") {
  auto s = make("d", 0, {"flood", "x", "because", "storm"}, 3, 0, true, "because");
  auto f = feature_strings(s, {0, 0, 0});
  CHECK(std::count(f.begin(), f.end(), "CONN=because") == 1);
  CHECK(std::count(f.begin(), f.end(), "DIST=2-3") == 1);
  CHECK(std::none_of(f.begin(), f.end(), [](const std::string& x) { return x.starts_with("CSB="); }));
  s.cs_score = 0.7;
  f = feature_strings(s, {0.1, 0.2, 0.3});
  CHECK(std::count(f.begin(), f.end(), "CSB=q3") == 1);
}

TEST_CASE("distance buckets") {
  CHECK(distance_bucket(1) == "1");
  CHECK(distance_bucket(2) == "2-3");
  CHECK(distance_bucket(3) == "2-3");
  CHECK(distance_bucket(4) == "4-7");
  CHECK(distance_bucket(7) == "4-7");
  CHECK(distance_bucket(8) == "8+");
}

TEST_CASE("featurize is deterministic and sorted") {
  auto a = make("d", 0, {"storm", "because", "flood"}, 0, 2, true, "because");
  auto b = a;
  FeatureContext ctx;
  auto fa = featurize(a, ctx), fb = featurize(b, ctx);
  CHECK(fa.entries == fb.entries);
  CHECK(std::is_sorted(fa.entries.begin(), fa.entries.end()));
  ctx.hash_seed ^= 1;
  CHECK(featurize(a, ctx).entries != fa.entries);
}

TEST_CASE("predict on hand models") {
  auto s = make("d", 0, {"storm", "flood"}, 0, 1, true);
  DetectorModel m;
  CHECK(predict(m, s) == 0.5);
  m.bias = 20.0;
  CHECK(predict(m, s) > 0.999);
  CHECK(predict(m, s) < 1.0);
  m.bias = -1000.0;
  CHECK(predict(m, s) > 0.0);
}

TEST_CASE("probability is monotone in an active weight") {
  std::mt19937_64 rng(4);
  auto s = make("d", 0, {"storm", "x", "flood"}, 0, 2, true);
  auto x = featurize(s, FeatureContext{});
  DetectorModel m;
  for (auto& [id, v] : x.entries) m.weights[id] = std::uniform_real_distribution<double>(-1, 1)(rng);
  for (auto& [id, v] : x.entries) {
    double base = predict(m, x);
    m.weights[id] += 0.5;
    CHECK(predict(m, x) > base);
    m.weights[id] -= 1.0;
    CHECK(predict(m, x) < base);
    m.weights[id] += 0.5;
  }
}

TEST_CASE("log-loss gradient matches central differences") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t dims = 1 + rng() % 20;
    std::vector<Example> data;
    for (int i = 0; i < 6; ++i) data.push_back(random_example(rng, dims));
    LinearParams p;
    std::normal_distribution<double> g(0.0, 0.5);
    std::vector<double> wb(dims + 1);
    for (std::size_t k = 0; k < dims; ++k) {
      wb[k] = g(rng);
      p.weights[k] = wb[k];
    }
    wb[dims] = p.bias = g(rng);
    const double l2 = 0.01;

    std::vector<std::vector<double>> X;
    std::vector<int> y;
    for (const auto& ex : data) {
      std::vector<double> row(dims, 0.0);
      for (auto [id, v] : ex.x.entries) row[id] += v;
      X.push_back(row);
      y.push_back(ex.positive);
    }
    CHECK(regularized_log_loss(p, data, l2) == doctest::Approx(oracle::log_loss(X, y, wb, l2)).epsilon(1e-12));

    auto grad = regularized_log_loss_gradient(p, data, l2);
    std::vector<double> analytic(dims + 1, 0.0);
    for (auto [id, v] : grad.weights) analytic[id] = v;
    analytic[dims] = grad.bias;
    auto fd = oracle::central_difference(wb, [&](const std::vector<double>& w) { return oracle::log_loss(X, y, w, l2); });
    CHECK(oracle::relative_error(analytic, fd) < 1e-5);
  }
}

TEST_CASE("separable data is fit perfectly and reproducibly") {
  auto d = separable(40, 1);
  TrainConfig c;
  c.epochs = 20;
  c.seed = 5;
  auto m = train_plain(d, c);
  auto conf = confusion(m, d);
  CHECK(conf.fp == 0);
  CHECK(conf.fn == 0);
  auto again = train_plain(d, c);
  CHECK(again.weights == m.weights);
  CHECK(again.bias == m.bias);
}

TEST_CASE("single-class data is rejected") {
  Dataset d;
  for (int i = 0; i < 4; ++i) d.push_back(make("d", i, {"a", "b"}, 0, 1, true));
  CHECK_THROWS_AS(train_plain(d, TrainConfig{}), TrainingError);
  CHECK_THROWS_AS(train_plain({}, TrainConfig{}), TrainingError);
}

TEST_CASE("train config is validated") {
  TrainConfig c;
  c.beta = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.relabel_threshold = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("relabel thresholds") {
  auto d = separable(10, 2);
  DetectorModel m;
  m.bias = std::log(9.0);  // every prediction 0.9
  auto all = relabel(m, d, 0.5);
  CHECK(all.kept.size() == d.size());
  CHECK(all.dropped == 0);
  for (const auto& s : all.kept) CHECK(s.pair.label == Label::causal);

  m.bias = -std::log(9.0);
  auto none = relabel(m, d, 0.5);
  CHECK(none.kept.empty());
  CHECK(none.dropped == d.size());

  m.bias = 0.0;  // exactly at the threshold
  CHECK(relabel(m, d, 0.5).kept.size() == d.size());
}

TEST_CASE("relabel output is a subset") {
  auto d = separable(30, 3);
  TrainConfig c;
  c.epochs = 3;
  auto m = train_plain(d, c);
  auto r = relabel(m, d, 0.5);
  CHECK(r.kept.size() + r.dropped == d.size());
  for (const auto& s : r.kept) {
    bool found = std::any_of(d.begin(), d.end(), [&](const LabeledSentence& x) {
      return x.sentence.doc_id == s.sentence.doc_id && x.cause_idx == s.cause_idx && x.pair.cause == s.pair.cause;
    });
    CHECK(found);
  }
}

TEST_CASE("anneal counts") {
  CHECK(anneal_count(1, 0.7, 100) == 0);
  CHECK(anneal_count(3, 0.1, 100) == 20);
  CHECK(anneal_count(11, 0.1, 100) == 100);
  CHECK(anneal_count(40, 0.1, 100) == 100);
  std::vector<std::size_t> seq;
  for (int e = 1; e <= 5; ++e) seq.push_back(anneal_count(e, 0.1, 50));
  CHECK(seq == std::vector<std::size_t>{0, 5, 10, 15, 20});
  std::size_t prev = 0;
  for (int e = 1; e < 30; ++e) {
    auto k = anneal_count(e, 0.07, 37);
    CHECK(k >= prev);
    CHECK(k <= 37);
    prev = k;
  }
}

TEST_CASE("annealing with no distant data equals plain training") {
  auto d = separable(24, 6);
  TrainConfig c;
  c.epochs = 7;
  c.seed = 9;
  auto plain = train_plain(d, c);
  auto annealed = train_annealed(d, {}, c);
  CHECK(plain.weights == annealed.weights);
  CHECK(plain.bias == annealed.bias);
}

TEST_CASE("annealing uses distant data once admitted") {
  auto gold = separable(20, 7);
  auto extra = separable(20, 8);
  for (auto& s : extra) s.sentence.doc_id = "x" + s.sentence.doc_id;
  TrainConfig c;
  c.epochs = 1;
  auto one_epoch = train_annealed(gold, extra, c);
  auto plain = train_plain(gold, c);
  CHECK(one_epoch.weights == plain.weights);
  c.epochs = 3;
  CHECK(train_annealed(gold, extra, c).weights != train_plain(gold, c).weights);
}

TEST_CASE("model json round-trips") {
  auto d = separable(20, 9);
  auto m = train_plain(d, TrainConfig{});
  m.cs_bucket_edges = {0.1, 0.2, 1.0 / 3.0};
  auto back = model_from_json(model_to_json(m));
  CHECK(back.weights == m.weights);
  CHECK(back.bias == m.bias);
  CHECK(back.hash_seed == m.hash_seed);
  CHECK(back.cs_bucket_edges == m.cs_bucket_edges);

  auto path = std::filesystem::temp_directory_path() / "knowdis_model_test.json";
  save_model(path, m);
  auto loaded = load_model(path);
  CHECK(loaded.weights == m.weights);
  std::filesystem::remove(path);
}

TEST_CASE("quartile edges") {
  Dataset d;
  for (int i = 0; i < 5; ++i) {
    auto s = make("d", i, {"a", "b"}, 0, 1, true);
    s.cs_score = i;
    d.push_back(s);
  }
  CHECK(cs_quartile_edges(d) == std::array<double, 3>{1.0, 2.0, 3.0});
  CHECK(cs_quartile_edges({}) == std::array<double, 3>{0.0, 0.0, 0.0});
}
