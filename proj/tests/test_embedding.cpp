#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "knowdis/embedding.hpp"
#include "knowdis/synthetic.hpp"
#include "oracles.hpp"

using namespace knowdis;

namespace {

EventPair pair_of(std::string_view c, std::string_view e, Label l = Label::causal) {
  return EventPair{Lemma(c), Lemma(e), Provenance::gold, l};
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  for (double& x : v) x = g(rng);
  return v;
}

}  // namespace

TEST_CASE("distance on hand cases") {
  EmbeddingSpace s(2);
  s.set_vector(Lemma("a"), {1.0, 0.0});
  s.set_vector(Lemma("b"), {0.0, 0.0});
  s.set_vector(Lemma("c"), {1.0, 0.0});
  CHECK(distance(s, pair_of("a", "b")) == doctest::Approx(1.0));
  CHECK(distance(s, pair_of("a", "c")) == 0.0);
  CHECK_THROWS_AS(distance(s, pair_of("a", "zzz")), MissingEmbeddingError);
  try {
    distance(s, pair_of("zzz", "a"));
  } catch (const MissingEmbeddingError& e) {
    CHECK(e.lemma() == "zzz");
  }
}

TEST_CASE("distance matches a hand-computed norm") {
  std::mt19937_64 rng(5);
  EmbeddingSpace s(5);
  auto c = random_vec(rng, 5), e = random_vec(rng, 5), r = random_vec(rng, 5);
  s.set_vector(Lemma("c"), c);
  s.set_vector(Lemma("e"), e);
  s.set_relation(r);
  CHECK(distance(s, pair_of("c", "e")) == doctest::Approx(oracle::translation(c, r, e)).epsilon(1e-14));
}

TEST_CASE("hinge is the margin when both pairs coincide") {
  std::vector<double> v{0.3, -0.2, 0.5}, r{0.1, 0.1, 0.1};
  auto t = hinge_term({v, v}, {v, v}, r, 1.0);
  CHECK(t.loss == doctest::Approx(1.0));
}

TEST_CASE("inactive hinge has zero gradient") {
  std::vector<double> a{0.0, 0.0}, b{5.0, 0.0}, r{0.0, 0.0};
  auto t = hinge_term({a, a}, {a, b}, r, 1.0);
  CHECK(t.loss == 0.0);
  for (double g : t.relation) CHECK(g == 0.0);
  for (double g : t.pos_cause) CHECK(g == 0.0);
}

TEST_CASE("hinge gradient matches central differences") {
  std::mt19937_64 rng(17);
  int checked = 0;
  while (checked < 20) {
    std::size_t dim = 1 + rng() % 8;
    auto pc = random_vec(rng, dim), pe = random_vec(rng, dim), nc = random_vec(rng, dim), ne = random_vec(rng, dim),
         r = random_vec(rng, dim);
    double margin = 4.0;
    double raw = margin + oracle::translation(pc, r, pe) - oracle::translation(nc, r, ne);
    if (raw < 1e-3) continue;
    auto t = hinge_term({pc, pe}, {nc, ne}, r, margin);
    std::vector<double> flat, analytic;
    for (const auto* v : {&pc, &pe, &nc, &ne, &r}) flat.insert(flat.end(), v->begin(), v->end());
    for (const auto* v : {&t.pos_cause, &t.pos_effect, &t.neg_cause, &t.neg_effect, &t.relation})
      analytic.insert(analytic.end(), v->begin(), v->end());
    auto fd = oracle::central_difference(flat, [&](const std::vector<double>& x) {
      auto part = [&](std::size_t i) { return std::vector<double>(x.begin() + i * dim, x.begin() + (i + 1) * dim); };
      return oracle::hinge(part(0), part(1), part(2), part(3), part(4), margin);
    });
    CHECK(oracle::relative_error(analytic, fd) < 1e-5);
    ++checked;
  }
}

TEST_CASE("training config is validated") {
  MarginConfig c;
  c.margin = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = MarginConfig{};
  c.epochs = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(train_embedding({}, {pair_of("a", "b", Label::noncausal)}, MarginConfig{}), ConfigError);
  CHECK_THROWS_AS(train_embedding({pair_of("a", "b")}, {}, MarginConfig{}), ConfigError);
}

TEST_CASE("training separates a small clustered set and is reproducible") {
  PairSet pos{pair_of("storm", "flood"), pair_of("storm", "outage"), pair_of("gale", "flood")};
  PairSet neg{pair_of("storm", "party", Label::noncausal), pair_of("gale", "concert", Label::noncausal),
              pair_of("rally", "flood", Label::noncausal)};
  MarginConfig c;
  c.dim = 16;
  c.epochs = 300;
  c.seed = 3;
  auto s = train_embedding(pos, neg, c);
  double dp = 0, dn = 0;
  for (const auto& p : pos) dp += distance(s, p);
  for (const auto& p : neg) dn += distance(s, p);
  CHECK(dp / pos.size() < dn / neg.size());

  auto again = train_embedding(pos, neg, c);
  CHECK(again.entities() == s.entities());
  CHECK(std::vector<double>(again.relation().begin(), again.relation().end()) ==
        std::vector<double>(s.relation().begin(), s.relation().end()));
}

TEST_CASE("initial vectors have unit norm and cover every training lemma") {
  PairSet pos{pair_of("a", "b")};
  PairSet neg{pair_of("c", "d", Label::noncausal)};
  MarginConfig c;
  c.dim = 8;
  c.epochs = 1;
  auto s = train_embedding(pos, neg, c);
  for (auto l : {"a", "b", "c", "d"}) CHECK(s.contains(Lemma(l)));
}

TEST_CASE("relation can be pinned at zero") {
  PairSet pos{pair_of("a", "b")};
  PairSet neg{pair_of("a", "c", Label::noncausal)};
  MarginConfig c;
  c.dim = 4;
  c.learn_relation = false;
  c.epochs = 20;
  auto s = train_embedding(pos, neg, c);
  for (double x : s.relation()) CHECK(x == 0.0);
}

TEST_CASE("corruption negatives work without annotated negatives") {
  PairSet pos{pair_of("a", "b"), pair_of("c", "d"), pair_of("e", "f")};
  MarginConfig c;
  c.dim = 4;
  c.epochs = 10;
  c.negative_strategy = NegativeStrategy::corruption;
  CHECK_NOTHROW(train_embedding(pos, {}, c));
}

TEST_CASE("ranking order and ties") {
  EmbeddingSpace s(1);
  s.set_vector(Lemma("o"), {0.0});
  s.set_vector(Lemma("a"), {0.5});
  s.set_vector(Lemma("b"), {0.2});
  s.set_vector(Lemma("c"), {0.9});
  s.set_vector(Lemma("d"), {-0.2});
  PairSet cand{pair_of("o", "a"), pair_of("o", "b"), pair_of("o", "c"), pair_of("o", "zzz")};
  auto r = rank_candidates(s, cand);
  REQUIRE(r.ranked.size() == 3);
  CHECK(r.dropped == 1);
  CHECK(r.ranked[0].pair.effect.str() == "b");
  CHECK(r.ranked[1].pair.effect.str() == "a");
  CHECK(r.ranked[2].pair.effect.str() == "c");

  auto tie = rank_candidates(s, {pair_of("o", "d"), pair_of("o", "b")});
  CHECK(tie.ranked[0].pair.effect.str() == "b");
}

TEST_CASE("ranking is invariant under uniform scaling") {
  std::mt19937_64 rng(2);
  EmbeddingSpace s(6);
  PairSet cand;
  for (int i = 0; i < 12; ++i) s.set_vector(Lemma("w" + std::to_string(i)), random_vec(rng, 6));
  s.set_relation(random_vec(rng, 6));
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      if (i != j) cand.insert(pair_of("w" + std::to_string(i), "w" + std::to_string(j)));
  auto before = rank_candidates(s, cand);
  s.scale(2.0);
  auto after = rank_candidates(s, cand);
  REQUIRE(before.ranked.size() == after.ranked.size());
  for (std::size_t k = 0; k < before.ranked.size(); ++k) CHECK(before.ranked[k].pair == after.ranked[k].pair);
}

TEST_CASE("filter_top keeps the ceiling") {
  std::vector<ScoredPair> ranked;
  for (int i = 0; i < 20; ++i) ranked.push_back({pair_of("c" + std::to_string(i), "e"), double(i)});
  auto top = filter_top(ranked, 0.10);
  CHECK(top.size() == 2);
  CHECK(top.contains(ranked[0].pair));
  CHECK(top.contains(ranked[1].pair));
  CHECK(filter_top(std::span(ranked).first(5), 0.10).size() == 1);
  CHECK(filter_top(ranked, 1.0).size() == 20);
  CHECK_THROWS_AS(filter_top(ranked, 0.0), ConfigError);
  CHECK_THROWS_AS(filter_top(ranked, 1.5), ConfigError);
}

TEST_CASE("embedding file round-trips exactly") {
  std::mt19937_64 rng(9);
  EmbeddingSpace s(3);
  s.set_vector(Lemma("kill"), random_vec(rng, 3));
  s.set_vector(Lemma("attack"), {1e-300, -0.1, 1.0 / 3.0});
  s.set_relation(random_vec(rng, 3));
  std::stringstream io;
  save_embedding(io, s);
  auto back = load_embedding(io);
  CHECK(back.dim() == 3);
  CHECK(back.entities() == s.entities());
  CHECK(std::vector<double>(back.relation().begin(), back.relation().end()) ==
        std::vector<double>(s.relation().begin(), s.relation().end()));

  std::istringstream bad("# knowdis-embedding v1 dim=2\nkill\t1,2,3\n");
  CHECK_THROWS_AS(load_embedding(bad), ParseError);
}

TEST_CASE("toy ranking task recovers planted pairs") {
  auto task = make_toy_embedding_task(1);
  CHECK(task.planted.size() * 10 == task.candidates.size());
  MarginConfig c;
  c.seed = 1;
  auto s = train_embedding(task.positives, task.negatives, c);
  auto kept = filter_top(rank_candidates(s, task.candidates).ranked, 0.10);
  std::size_t hit = 0;
  for (const auto& p : kept) hit += task.planted.contains(p);
  CHECK(hit >= task.planted.size() * 8 / 10);
}
