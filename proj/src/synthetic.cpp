#include "knowdis/synthetic.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "knowdis/causal_strength.hpp"

namespace knowdis {

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

template <class T>
const T& pick_from(Rng& rng, const std::vector<T>& v) {
  return v[pick(rng, v.size())];
}

/// Pronounceable nonsense words ending in a, e or o, so the suffix-stripping
/// lemmatizer leaves them (and their -s plurals) alone.
class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {}

  std::string make() {
    static constexpr std::string_view cons = "bdfgklmnprtvz";
    static constexpr std::string_view vowels = "aeiou";
    static constexpr std::string_view finals = "aeo";
    for (;;) {
      std::string w;
      std::size_t syl = 2 + pick(rng_, 2);
      for (std::size_t i = 0; i < syl; ++i) {
        w += cons[pick(rng_, cons.size())];
        w += i + 1 == syl ? finals[pick(rng_, finals.size())] : vowels[pick(rng_, vowels.size())];
      }
      if (used_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct Cluster {
  std::vector<std::string> causes;
  std::vector<std::string> effects;
  std::string cause_ctx;
  std::string effect_ctx;
};

struct World {
  std::vector<Cluster> clusters;
  std::vector<std::string> fillers;
  std::map<std::string, std::string> irregular;  // lemma -> irregular surface form
  std::vector<std::pair<std::string, std::string>> gold_causal;  // (cause, effect)
  std::vector<std::pair<std::string, std::string>> hidden;
  std::vector<std::pair<std::string, std::string>> gold_noncausal;
};

const std::vector<std::string> kForward = {"led to", "resulted in", "so", "therefore", "consequently", "as a result"};
const std::vector<std::string> kBackward = {"because of", "due to", "owing to", "caused by"};

std::vector<std::string> words_of(std::string_view phrase) {
  std::vector<std::string> out;
  for (auto& w : split(phrase, ' '))
    if (!w.empty()) out.push_back(w);
  return out;
}

World make_world(const SyntheticOptions& o, Rng& rng) {
  WordMaker words(rng);
  World w;
  const std::size_t m = o.events_per_side;
  for (std::size_t k = 0; k < o.clusters; ++k) {
    Cluster c;
    for (std::size_t i = 0; i < m; ++i) c.causes.push_back(words.make());
    for (std::size_t i = 0; i < m; ++i) c.effects.push_back(words.make());
    c.cause_ctx = words.make();
    c.effect_ctx = words.make();
    w.clusters.push_back(std::move(c));
  }
  for (int i = 0; i < 40; ++i) w.fillers.push_back(words.make());
  for (const auto& c : w.clusters) {
    for (const auto* side : {&c.causes, &c.effects})
      for (const auto& lemma : *side)
        if (chance(rng, 0.3)) w.irregular[lemma] = words.make();
  }
  // Gold: i -> i and i -> i+1 within a cluster; the remaining i -> i+2 .. are hidden.
  for (const auto& c : w.clusters) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        std::size_t off = (j + m - i) % m;
        (off <= 1 ? w.gold_causal : w.hidden).emplace_back(c.causes[i], c.effects[j]);
      }
    }
  }
  for (std::size_t k = 0; k < o.clusters; ++k) {
    for (int r = 0; r < 2; ++r) {
      std::size_t other = (k + 1 + pick(rng, o.clusters - 1)) % o.clusters;
      w.gold_noncausal.emplace_back(pick_from(rng, w.clusters[k].causes), pick_from(rng, w.clusters[other].effects));
    }
  }
  std::sort(w.gold_noncausal.begin(), w.gold_noncausal.end());
  w.gold_noncausal.erase(std::unique(w.gold_noncausal.begin(), w.gold_noncausal.end()), w.gold_noncausal.end());
  return w;
}

struct Built {
  std::vector<std::string> tokens;
  std::size_t cause_idx = 0;
  std::size_t effect_idx = 0;
};

class SentenceMaker {
 public:
  SentenceMaker(const World& w, Rng& rng) : w_(w), rng_(rng) {}

  std::string surface(const std::string& lemma) {
    auto it = w_.irregular.find(lemma);
    if (it != w_.irregular.end() && chance(rng_, 0.5)) return it->second;
    return chance(rng_, 0.3) ? lemma + "s" : lemma;
  }

  void fill(std::vector<std::string>& t, std::size_t lo, std::size_t hi) {
    std::size_t n = lo + pick(rng_, hi - lo + 1);
    for (std::size_t i = 0; i < n; ++i) t.push_back(pick_from(rng_, w_.fillers));
  }

  void put(std::vector<std::string>& t, std::string_view phrase) {
    for (auto& x : words_of(phrase)) t.push_back(x);
  }

  Built explicit_causal(const std::string& c, const std::string& e) {
    Built b;
    auto& t = b.tokens;
    fill(t, 0, 2);
    if (chance(rng_, 0.6)) {
      b.cause_idx = t.size();
      t.push_back(surface(c));
      fill(t, 0, 1);
      put(t, pick_from(rng_, kForward));
      fill(t, 0, 1);
      b.effect_idx = t.size();
      t.push_back(surface(e));
    } else {
      b.effect_idx = t.size();
      t.push_back(surface(e));
      fill(t, 0, 1);
      put(t, pick_from(rng_, kBackward));
      fill(t, 0, 1);
      b.cause_idx = t.size();
      t.push_back(surface(c));
    }
    fill(t, 0, 2);
    return b;
  }

  Built implicit_causal(const Cluster& k, const std::string& c, const std::string& e) {
    Built b;
    auto& t = b.tokens;
    fill(t, 0, 1);
    t.push_back(k.cause_ctx);
    b.cause_idx = t.size();
    t.push_back(surface(c));
    fill(t, 0, 1);
    b.effect_idx = t.size();
    t.push_back(surface(e));
    t.push_back(k.effect_ctx);
    fill(t, 0, 1);
    return b;
  }

  /// Both events mentioned with no causal link between them.
  Built co_mention(const std::string& c, const std::string& e) {
    Built b;
    auto& t = b.tokens;
    fill(t, 1, 3);
    bool cause_first = chance(rng_, 0.5);
    (cause_first ? b.cause_idx : b.effect_idx) = t.size();
    t.push_back(surface(cause_first ? c : e));
    fill(t, 2, 4);
    (cause_first ? b.effect_idx : b.cause_idx) = t.size();
    t.push_back(surface(cause_first ? e : c));
    fill(t, 1, 3);
    return b;
  }

  std::vector<std::string> single_event(const std::string& lemma) {
    std::vector<std::string> t;
    fill(t, 1, 3);
    t.push_back(surface(lemma));
    fill(t, 1, 3);
    return t;
  }

  std::vector<std::string> noise() {
    std::vector<std::string> t;
    fill(t, 4, 9);
    return t;
  }

 private:
  const World& w_;
  Rng& rng_;
};

std::string join(const std::vector<std::string>& t) {
  std::string s;
  for (const auto& x : t) {
    if (!s.empty()) s += ' ';
    s += x;
  }
  return s + ".";
}

const Cluster& cluster_of(const World& w, const std::string& cause) {
  for (const auto& c : w.clusters)
    if (std::find(c.causes.begin(), c.causes.end(), cause) != c.causes.end()) return c;
  throw std::logic_error("lemma outside every cluster");
}

std::string gold_sentences(const SyntheticOptions& o, const World& w, Rng& rng) {
  SentenceMaker sm(w, rng);
  std::ostringstream out;
  for (std::size_t d = 0; d < o.gold_docs; ++d) {
    char doc[32];
    std::snprintf(doc, sizeof doc, "gold-%03zu", d);
    for (std::size_t s = 0; s < o.sentences_per_doc; ++s) {
      double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      Built b;
      bool causal = true;
      if (r < 0.30) {
        const auto& [c, e] = pick_from(rng, w.gold_causal);
        b = sm.explicit_causal(c, e);
      } else if (r < 0.55) {
        const auto& [c, e] = pick_from(rng, w.gold_causal);
        b = sm.implicit_causal(cluster_of(w, c), c, e);
      } else if (r < 0.85) {
        const auto& [c, e] = pick_from(rng, w.gold_causal);
        b = sm.co_mention(c, e);
        causal = false;
      } else {
        const auto& [c, e] = pick_from(rng, w.gold_noncausal);
        b = sm.co_mention(c, e);
        causal = false;
      }
      nlohmann::json j;
      j["doc_id"] = doc;
      j["sent_id"] = s;
      j["text"] = join(b.tokens);
      j["cause_idx"] = b.cause_idx;
      j["effect_idx"] = b.effect_idx;
      j["label"] = causal ? "causal" : "noncausal";
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

std::string corpus(const SyntheticOptions& o, const World& w, Rng& rng) {
  SentenceMaker sm(w, rng);
  std::vector<std::pair<std::string, std::string>> all_causal = w.gold_causal;
  all_causal.insert(all_causal.end(), w.hidden.begin(), w.hidden.end());
  std::ostringstream out;
  const std::size_t per_doc = 20;
  for (std::size_t i = 0; i < o.corpus_sentences; ++i) {
    double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    std::vector<std::string> t;
    if (r < 0.15) {
      const auto& [c, e] = pick_from(rng, all_causal);
      t = sm.explicit_causal(c, e).tokens;
    } else if (r < 0.30) {
      const auto& [c, e] = pick_from(rng, all_causal);
      t = sm.implicit_causal(cluster_of(w, c), c, e).tokens;
    } else if (r < 0.55) {
      const auto& [c, e] = pick_from(rng, all_causal);
      t = sm.co_mention(c, e).tokens;
    } else if (r < 0.65) {
      const auto& a = pick_from(rng, w.clusters);
      const auto& b = pick_from(rng, w.clusters);
      t = sm.co_mention(pick_from(rng, a.causes), pick_from(rng, b.effects)).tokens;
    } else if (r < 0.80) {
      const auto& k = pick_from(rng, w.clusters);
      t = sm.single_event(chance(rng, 0.5) ? pick_from(rng, k.causes) : pick_from(rng, k.effects));
    } else {
      t = sm.noise();
    }
    char doc[32];
    std::snprintf(doc, sizeof doc, "nyt-%05zu", i / per_doc);
    nlohmann::json j;
    j["doc_id"] = doc;
    j["sent_id"] = i % per_doc;
    j["text"] = join(t);
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string copa(const SyntheticOptions& o, const World& w, Rng& rng) {
  SentenceMaker sm(w, rng);
  auto cause_text = [&](const Cluster& k) {
    std::vector<std::string> t;
    t.push_back(pick_from(rng, w.fillers));
    t.push_back(k.cause_ctx);
    t.push_back(sm.surface(pick_from(rng, k.causes)));
    return join(t);
  };
  auto effect_text = [&](const Cluster& k) {
    std::vector<std::string> t;
    t.push_back(sm.surface(pick_from(rng, k.effects)));
    t.push_back(k.effect_ctx);
    t.push_back(pick_from(rng, w.fillers));
    return join(t);
  };
  std::ostringstream out;
  for (std::size_t i = 0; i < o.copa_records; ++i) {
    std::size_t k = pick(rng, w.clusters.size());
    std::size_t other = (k + 1 + pick(rng, w.clusters.size() - 1)) % w.clusters.size();
    bool ask_cause = chance(rng, 0.5);
    int correct = chance(rng, 0.5) ? 1 : 2;
    std::string premise, right, wrong;
    if (ask_cause) {
      premise = effect_text(w.clusters[k]);
      right = cause_text(w.clusters[k]);
      wrong = cause_text(w.clusters[other]);
    } else {
      premise = cause_text(w.clusters[k]);
      right = effect_text(w.clusters[k]);
      wrong = effect_text(w.clusters[other]);
    }
    nlohmann::json j;
    j["premise"] = premise;
    j["alt1"] = correct == 1 ? right : wrong;
    j["alt2"] = correct == 1 ? wrong : right;
    j["correct"] = correct;
    j["asks_for"] = ask_cause ? "cause" : "effect";
    out << j.dump() << '\n';
  }
  return out.str();
}

std::string csv(const std::set<std::string>& items) {
  std::string s;
  for (const auto& x : items) {
    if (!s.empty()) s += ',';
    s += x;
  }
  return s;
}

std::string synsets(const SyntheticOptions& o, const World& w, Rng& rng) {
  std::map<std::string, std::set<std::string>> syn, hyp;
  std::vector<std::string> generic;
  for (int i = 0; i < 4; ++i) generic.push_back("gen" + std::string(1, static_cast<char>('a' + i)) + "ra");
  for (std::size_t k = 0; k < w.clusters.size(); ++k) {
    const auto& c = w.clusters[k];
    for (const auto* side : {&c.causes, &c.effects}) {
      for (const auto& a : *side) {
        for (const auto& b : *side)
          if (a != b && chance(rng, 0.7)) syn[a].insert(b);
        if (chance(rng, o.cross_link_rate)) {
          const auto& far = w.clusters[(k + 1 + pick(rng, w.clusters.size() - 1)) % w.clusters.size()];
          syn[a].insert(pick_from(rng, side == &c.causes ? far.causes : far.effects));
        }
        if (chance(rng, 0.2)) hyp[a].insert(pick_from(rng, generic));
      }
    }
  }
  std::ostringstream out;
  std::set<std::string> keys;
  for (auto& [k, v] : syn) keys.insert(k);
  for (auto& [k, v] : hyp) keys.insert(k);
  for (const auto& k : keys) out << k << "\tsyn:" << csv(syn[k]) << "\thyp:" << csv(hyp[k]) << '\n';
  return out.str();
}

std::string verbclasses(const World& w, Rng& rng) {
  std::ostringstream out;
  std::size_t id = 0;
  for (std::size_t k = 0; k < w.clusters.size(); ++k) {
    const auto& c = w.clusters[k];
    // one within-cluster effect class, and a noisy cause class spanning two clusters
    std::set<std::string> effects(c.effects.begin(), c.effects.end());
    out << "vc-" << ++id << '\t' << csv(effects) << '\n';
    const auto& far = w.clusters[(k + 1 + pick(rng, w.clusters.size() - 1)) % w.clusters.size()];
    std::set<std::string> mixed{pick_from(rng, c.causes), pick_from(rng, far.causes)};
    out << "vc-" << ++id << '\t' << csv(mixed) << '\n';
  }
  return out.str();
}

std::string config_text(const SyntheticOptions& o) {
  std::ostringstream out;
  out << "# synthetic planted-signal benchmark\n"
         "[paths]\n"
         "gold_pairs = gold_pairs.tsv\n"
         "gold_sentences = gold_sentences.jsonl\n"
         "corpus = corpus.jsonl\n"
         "synsets = synsets.tsv\n"
         "verbclasses = verbclasses.tsv\n"
         "lemma_table = lemmas.tsv\n"
         "copa = copa.jsonl\n"
         "connectives = connectives.txt\n"
         "output_dir = out\n"
         "\n"
         "[pipeline]\n"
         "seed = 13\n"
         "workers = 1\n"
         "pair_keep_fraction = 0.10\n"
         "corpus_fraction = "
      << o.corpus_fraction
      << "\n"
         "keep_c = 0.50\n"
         "keep_nc = 0.10\n"
         "folds = 5\n"
         "audit_size = 100\n"
         "\n"
         "[causal_strength]\n"
         "alpha = 0.5\n"
         "lambda_interp = 0.5\n"
         "\n"
         "[embedding]\n"
         "dim = 100\n"
         "margin = 1.0\n"
         "learning_rate = 0.01\n"
         "epochs = 200\n"
         "\n"
         "[detector]\n"
         "learning_rate = 0.1\n"
         "l2_penalty = 0.0001\n"
         "epochs = 30\n"
         "beta = 0.1\n"
         "relabel_threshold = 0.5\n";
  return out.str();
}

}  // namespace

SyntheticBenchmark make_benchmark(const SyntheticOptions& o) {
  if (o.clusters < 2 || o.events_per_side < 2) throw ConfigError("synthetic benchmark needs >= 2 clusters and events");
  Rng rng(o.seed);
  World w = make_world(o, rng);
  SyntheticBenchmark b;

  std::ostringstream pairs;
  for (const auto& [c, e] : w.gold_causal) pairs << c << '\t' << e << "\tcausal\n";
  for (const auto& [c, e] : w.gold_noncausal) pairs << c << '\t' << e << "\tnoncausal\n";
  b.gold_pairs = pairs.str();
  for (const auto& [c, e] : w.hidden) b.hidden_causal.insert(EventPair{Lemma(c), Lemma(e), Provenance::gold, Label::causal});

  b.gold_sentences = gold_sentences(o, w, rng);
  b.corpus = corpus(o, w, rng);
  b.copa = copa(o, w, rng);
  b.synsets = synsets(o, w, rng);
  b.verbclasses = verbclasses(w, rng);

  std::ostringstream lemmas;
  lemmas << "# surface\tlemma\n";
  for (const auto& [lemma, form] : w.irregular) lemmas << form << '\t' << lemma << '\n';
  b.lemma_table = lemmas.str();

  std::ostringstream conn;
  conn << "# causal connectives\n";
  for (const auto& p : ConnectiveLexicon::default_phrases()) conn << p << '\n';
  b.connectives = conn.str();
  b.config = config_text(o);
  return b;
}

void write_benchmark(const SyntheticBenchmark& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](std::string_view name, const std::string& content) {
    std::ofstream out(dir / std::string(name), std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + (dir / std::string(name)).string());
    out << content;
  };
  put("gold_pairs.tsv", b.gold_pairs);
  put("gold_sentences.jsonl", b.gold_sentences);
  put("corpus.jsonl", b.corpus);
  put("synsets.tsv", b.synsets);
  put("verbclasses.tsv", b.verbclasses);
  put("lemmas.tsv", b.lemma_table);
  put("copa.jsonl", b.copa);
  put("connectives.txt", b.connectives);
  put("knowdis.ini", b.config);
}

ToyEmbeddingTask make_toy_embedding_task(std::uint64_t seed, std::size_t clusters) {
  constexpr std::size_t kSide = 3;
  Rng rng(seed);
  WordMaker words(rng);
  struct Toy {
    std::vector<Lemma> causes, effects;
  };
  std::vector<Toy> toys(clusters);
  for (auto& x : toys)
    for (std::size_t i = 0; i < kSide; ++i) {
      x.causes.emplace_back(words.make());
      x.effects.emplace_back(words.make());
    }

  ToyEmbeddingTask t;
  auto pair = [](const Lemma& c, const Lemma& e, Label l) { return EventPair{c, e, Provenance::gold, l}; };
  for (const auto& x : toys)
    for (std::size_t i = 0; i < kSide; ++i)
      for (std::size_t j = 0; j < kSide; ++j) {
        if (i == kSide - 1 && j == kSide - 1)
          t.planted.insert(EventPair{x.causes[i], x.effects[j], Provenance::wordnet, Label::causal});
        else
          t.positives.insert(pair(x.causes[i], x.effects[j], Label::causal));
      }
  std::vector<EventPair> cross;
  for (std::size_t a = 0; a < clusters; ++a)
    for (std::size_t b = 0; b < clusters; ++b)
      if (a != b)
        for (const auto& c : toys[a].causes)
          for (const auto& e : toys[b].effects) cross.push_back(pair(c, e, Label::noncausal));
  std::shuffle(cross.begin(), cross.end(), rng);
  std::size_t n_neg = 9 * clusters;
  std::size_t n_cand = 9 * clusters;
  if (cross.size() < n_neg + n_cand) throw ConfigError("toy task needs more clusters");
  for (std::size_t i = 0; i < n_neg; ++i) t.negatives.insert(cross[i]);
  t.candidates = t.planted;
  for (std::size_t i = n_neg; i < n_neg + n_cand; ++i) {
    EventPair p = cross[i];
    p.provenance = Provenance::wordnet;
    p.label = Label::causal;
    t.candidates.insert(p);
  }
  return t;
}

}  // namespace knowdis
