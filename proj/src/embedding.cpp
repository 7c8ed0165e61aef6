#include "knowdis/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

namespace knowdis {

namespace {

constexpr std::string_view kRelationKey = "__relation__";
constexpr std::string_view kHeader = "# knowdis-embedding v1 dim=";

void normalize(std::span<double> v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

std::vector<double> uniform_vector(std::size_t dim, std::mt19937_64& rng) {
  double bound = 6.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> unif(-bound, bound);
  std::vector<double> v(dim);
  for (double& x : v) x = unif(rng);
  normalize(v);
  return v;
}

// Unit residual (c + r - e) / d, or zeros at d = 0 (subgradient choice).
std::vector<double> unit_residual(std::span<const double> c, std::span<const double> r, std::span<const double> e,
                                  double d) {
  std::vector<double> u(c.size(), 0.0);
  if (d <= 0.0) return u;
  for (std::size_t k = 0; k < c.size(); ++k) u[k] = (c[k] + r[k] - e[k]) / d;
  return u;
}

void append_double(std::string& out, double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, ptr);
}

std::vector<double> parse_values(std::string_view csv, std::size_t dim, const std::string& source,
                                 std::size_t line_no) {
  std::vector<double> v;
  v.reserve(dim);
  for (const auto& item : split(csv, ',')) {
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), x);
    if (ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(x)) {
      throw ParseError(source, line_no, "bad vector component '" + item + "'");
    }
    v.push_back(x);
  }
  if (v.size() != dim) throw ParseError(source, line_no, "vector length " + std::to_string(v.size()) +
                                                              " does not match dim " + std::to_string(dim));
  return v;
}

}  // namespace

void MarginConfig::validate() const {
  if (dim == 0) throw ConfigError("embedding dim must be positive");
  if (!(margin > 0.0)) throw ConfigError("margin must be > 0");
  if (!(learning_rate > 0.0)) throw ConfigError("embedding learning rate must be > 0");
  if (epochs < 1) throw ConfigError("embedding epochs must be >= 1");
}

EmbeddingSpace::EmbeddingSpace(std::size_t dim) : dim_(dim), relation_(dim, 0.0) {
  if (dim == 0) throw ConfigError("embedding dim must be positive");
}

std::span<const double> EmbeddingSpace::vector(const Lemma& lemma) const {
  auto it = entity_.find(lemma);
  if (it == entity_.end()) throw MissingEmbeddingError(lemma.str());
  return it->second;
}

std::span<double> EmbeddingSpace::mutable_vector(const Lemma& lemma) {
  auto it = entity_.find(lemma);
  if (it == entity_.end()) throw MissingEmbeddingError(lemma.str());
  return it->second;
}

void EmbeddingSpace::set_vector(const Lemma& lemma, std::vector<double> v) {
  if (v.size() != dim_) throw std::invalid_argument("vector length does not match embedding dim");
  entity_.insert_or_assign(lemma, std::move(v));
}

void EmbeddingSpace::set_relation(std::vector<double> v) {
  if (v.size() != dim_) throw std::invalid_argument("relation length does not match embedding dim");
  relation_ = std::move(v);
}

void EmbeddingSpace::scale(double factor) {
  for (auto& [lemma, v] : entity_) {
    for (double& x : v) x *= factor;
  }
  for (double& x : relation_) x *= factor;
}

double translation_distance(std::span<const double> cause, std::span<const double> relation,
                            std::span<const double> effect) {
  double sum = 0.0;
  for (std::size_t k = 0; k < cause.size(); ++k) {
    double x = cause[k] + relation[k] - effect[k];
    sum += x * x;
  }
  return std::sqrt(sum);
}

double distance(const EmbeddingSpace& space, const EventPair& pair) {
  return translation_distance(space.vector(pair.cause), space.relation(), space.vector(pair.effect));
}

HingeTerm hinge_term(const PairVectors& pos, const PairVectors& neg, std::span<const double> relation,
                     double margin) {
  const std::size_t dim = relation.size();
  HingeTerm t;
  double dp = translation_distance(pos.cause, relation, pos.effect);
  double dn = translation_distance(neg.cause, relation, neg.effect);
  double raw = margin + dp - dn;
  t.loss = std::max(0.0, raw);
  t.pos_cause.assign(dim, 0.0);
  t.pos_effect.assign(dim, 0.0);
  t.neg_cause.assign(dim, 0.0);
  t.neg_effect.assign(dim, 0.0);
  t.relation.assign(dim, 0.0);
  if (raw <= 0.0) return t;

  auto up = unit_residual(pos.cause, relation, pos.effect, dp);
  auto un = unit_residual(neg.cause, relation, neg.effect, dn);
  for (std::size_t k = 0; k < dim; ++k) {
    t.pos_cause[k] = up[k];
    t.pos_effect[k] = -up[k];
    t.neg_cause[k] = -un[k];
    t.neg_effect[k] = un[k];
    t.relation[k] = up[k] - un[k];
  }
  return t;
}

EmbeddingSpace train_embedding(const PairSet& positives, const PairSet& negatives, const MarginConfig& config) {
  config.validate();
  if (positives.empty()) throw ConfigError("embedding training needs at least one causal pair");
  for (const auto& p : positives) {
    if (p.label != Label::causal) throw ConfigError("positive set contains a noncausal pair");
  }
  for (const auto& n : negatives) {
    if (n.label != Label::noncausal) throw ConfigError("negative set contains a causal pair");
  }
  if (config.negative_strategy == NegativeStrategy::annotated_negatives && negatives.empty()) {
    throw ConfigError("annotated_negatives strategy needs at least one noncausal pair");
  }

  std::mt19937_64 rng(config.seed);
  std::set<Lemma> vocab;
  for (const auto& p : positives) vocab.insert({p.cause, p.effect});
  for (const auto& n : negatives) vocab.insert({n.cause, n.effect});

  EmbeddingSpace space(config.dim);
  for (const auto& l : vocab) space.set_vector(l, uniform_vector(config.dim, rng));
  if (config.learn_relation) space.set_relation(uniform_vector(config.dim, rng));

  const std::vector<EventPair> pos(positives.begin(), positives.end());
  const std::vector<EventPair> neg(negatives.begin(), negatives.end());
  const std::vector<Lemma> lemmas(vocab.begin(), vocab.end());
  std::vector<std::size_t> order(pos.size());

  auto sample_negative = [&](const EventPair& p) -> EventPair {
    if (config.negative_strategy == NegativeStrategy::annotated_negatives) {
      std::uniform_int_distribution<std::size_t> pick(0, neg.size() - 1);
      return neg[pick(rng)];
    }
    std::uniform_int_distribution<std::size_t> pick(0, lemmas.size() - 1);
    std::bernoulli_distribution replace_cause(0.5);
    EventPair c = p;
    for (int attempt = 0; attempt < 10; ++attempt) {
      c = p;
      if (replace_cause(rng)) c.cause = lemmas[pick(rng)];
      else c.effect = lemmas[pick(rng)];
      EventPair probe = c;
      probe.label = Label::causal;
      if (!positives.contains(probe)) break;
    }
    c.label = Label::noncausal;
    return c;
  };

  const double lr = config.learning_rate;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (const auto& l : lemmas) normalize(space.mutable_vector(l));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t idx : order) {
      const EventPair& p = pos[idx];
      EventPair n = sample_negative(p);
      HingeTerm t = hinge_term({space.vector(p.cause), space.vector(p.effect)},
                               {space.vector(n.cause), space.vector(n.effect)}, space.relation(), config.margin);
      if (t.loss <= 0.0) continue;
      // Gradients were all taken at the pre-update point, so shared lemmas
      // simply receive the sum of their contributions.
      auto step = [&](const Lemma& l, const std::vector<double>& g) {
        auto v = space.mutable_vector(l);
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= lr * g[k];
      };
      step(p.cause, t.pos_cause);
      step(p.effect, t.pos_effect);
      step(n.cause, t.neg_cause);
      step(n.effect, t.neg_effect);
      if (config.learn_relation) {
        auto r = space.mutable_relation();
        for (std::size_t k = 0; k < r.size(); ++k) r[k] -= lr * t.relation[k];
      }
    }
  }
  return space;
}

Ranking rank_candidates(const EmbeddingSpace& space, const PairSet& candidates) {
  Ranking out;
  for (const auto& c : candidates) {
    if (!space.contains(c.cause) || !space.contains(c.effect)) {
      ++out.dropped;
      continue;
    }
    out.ranked.push_back({c, distance(space, c)});
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(), [](const ScoredPair& a, const ScoredPair& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.pair.cause != b.pair.cause) return a.pair.cause < b.pair.cause;
    return a.pair.effect < b.pair.effect;
  });
  return out;
}

PairSet filter_top(std::span<const ScoredPair> ranked, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("keep fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  std::size_t keep = std::min(ranked.size(), ceil_fraction(fraction, ranked.size()));
  PairSet out;
  for (std::size_t i = 0; i < keep; ++i) out.insert(ranked[i].pair);
  return out;
}

void save_embedding(std::ostream& out, const EmbeddingSpace& space) {
  out << kHeader << space.dim() << '\n';
  auto row = [&](std::string_view key, std::span<const double> v) {
    std::string line(key);
    line.push_back('\t');
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) line.push_back(',');
      append_double(line, v[k]);
    }
    out << line << '\n';
  };
  for (const auto& [lemma, v] : space.entities()) row(lemma.str(), v);
  row(kRelationKey, space.relation());
}

EmbeddingSpace load_embedding(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || line.rfind(kHeader, 0) != 0) {
    throw ParseError(source, 1, "missing knowdis-embedding v1 header");
  }
  std::size_t dim = 0;
  auto tail = std::string_view(line).substr(kHeader.size());
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), dim);
  if (ec != std::errc() || dim == 0) throw ParseError(source, 1, "bad dim in header");

  EmbeddingSpace space(dim);
  bool have_relation = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, line_no, "expected key<TAB>values");
    std::string_view key(line.data(), tab);
    auto values = parse_values(std::string_view(line).substr(tab + 1), dim, source, line_no);
    if (key == kRelationKey) {
      space.set_relation(std::move(values));
      have_relation = true;
    } else {
      try {
        space.set_vector(Lemma(key), std::move(values));
      } catch (const std::invalid_argument& e) {
        throw ParseError(source, line_no, e.what());
      }
    }
  }
  if (!have_relation) throw ParseError(source, line_no, "missing __relation__ row");
  return space;
}

}  // namespace knowdis
