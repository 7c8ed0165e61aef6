#include "knowdis/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "knowdis/parallel.hpp"

namespace knowdis {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kEmbedSalt = 0x656d62;
constexpr std::uint64_t kTrainSalt = 0x74726e;
constexpr std::uint64_t kSampleSalt = 0x736d70;
constexpr std::uint64_t kPartitionSalt = 0x707274;
constexpr std::uint64_t kAuditSalt = 0x617564;
constexpr std::uint64_t kFoldSalt = 0x666c64;

struct StageInfo {
  Stage stage;
  std::string_view name;
  std::vector<Stage> upstream;
};

const std::vector<StageInfo>& stage_table() {
  static const std::vector<StageInfo> table = {
      {Stage::expand, "expand", {}},
      {Stage::train_embed, "train-embed", {Stage::expand}},
      {Stage::annotate, "annotate", {Stage::train_embed}},
      {Stage::build_cs, "build-cs", {}},
      {Stage::filter, "filter", {Stage::annotate, Stage::build_cs}},
      {Stage::relabel, "relabel", {Stage::filter, Stage::build_cs}},
      {Stage::train, "train", {Stage::relabel, Stage::build_cs}},
      {Stage::evaluate, "evaluate", {}},
      {Stage::audit_sample, "audit-sample", {Stage::filter}},
  };
  return table;
}

const StageInfo& info(Stage s) {
  for (const auto& i : stage_table())
    if (i.stage == s) return i;
  throw std::logic_error("unknown stage");
}

double parse_double(const std::string& key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": not a number: '" + std::string(v) + "'");
  return out;
}

std::int64_t parse_int(const std::string& key, std::string_view v) {
  v = trim(v);
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": not an integer: '" + std::string(v) + "'");
  return out;
}

std::uint64_t parse_uint(const std::string& key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  int base = 10;
  if (v.starts_with("0x") || v.starts_with("0X")) {
    v.remove_prefix(2);
    base = 16;
  }
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out, base);
  if (v.empty() || ec != std::errc() || p != v.data() + v.size())
    throw ConfigError(key + ": not an unsigned integer: '" + std::string(v) + "'");
  return out;
}

std::size_t parse_count(const std::string& key, std::string_view v) {
  auto n = parse_int(key, v);
  if (n < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(n);
}

bool parse_bool(const std::string& key, std::string_view v) {
  std::string s = normalize_token(trim(v));
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + std::string(v) + "'");
}

bool in_unit(double f) { return f > 0.0 && f <= 1.0; }

void require_file(const fs::path& p, std::string_view key) {
  if (p.empty()) throw ConfigError("paths." + std::string(key) + " is not set");
  if (!fs::is_regular_file(p)) throw ConfigError("paths." + std::string(key) + ": no such file " + p.string());
}

fs::path output_file(const PipelineConfig& c, std::string_view name) { return c.paths.output_dir / std::string(name); }

/// Writes `content` and returns its sha256.
std::string write_text(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
  out.close();
  if (!out) throw ConfigError("write failed: " + p.string());
  return sha256_hex(content);
}

template <class F>
std::string to_text(F&& writer) {
  std::ostringstream ss;
  writer(ss);
  return ss.str();
}

LemmaTable lemma_table_for(const PipelineConfig& c) {
  if (c.paths.lemma_table.empty()) return {};
  require_file(c.paths.lemma_table, "lemma_table");
  return load_lemma_table(c.paths.lemma_table);
}

ConnectiveLexicon connectives_for(const PipelineConfig& c, const LemmaTable& table) {
  if (c.paths.connectives.empty()) return ConnectiveLexicon::from_phrases(ConnectiveLexicon::default_phrases(), table);
  require_file(c.paths.connectives, "connectives");
  return ConnectiveLexicon::load(c.paths.connectives, table);
}

std::uint64_t sample_seed(const PipelineConfig& c) { return hash_combine(c.seed, kSampleSalt); }

AnnotateOptions annotate_options(const PipelineConfig& c) {
  AnnotateOptions o;
  o.fraction = c.corpus_fraction;
  o.seed = sample_seed(c);
  o.workers = c.workers;
  return o;
}

struct PairKey {
  std::string cause, effect;
  auto operator<=>(const PairKey&) const = default;
};

PairKey key_of(const EventPair& p) { return {p.cause.str(), p.effect.str()}; }

PairSet without_keys(const PairSet& pairs, const std::set<PairKey>& banned) {
  PairSet out;
  for (const auto& p : pairs)
    if (!banned.contains(key_of(p))) out.insert(p);
  return out;
}

nlohmann::json pair_list(const PairSet& pairs) {
  auto arr = nlohmann::json::array();
  for (const auto& p : pairs) arr.push_back({p.cause.str(), p.effect.str(), to_string(p.label)});
  return arr;
}

std::string ranked_tsv(const Ranking& r) {
  std::ostringstream out;
  for (const auto& sp : r.ranked) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, sp.distance);
    out << sp.pair.cause.str() << '\t' << sp.pair.effect.str() << '\t' << to_string(sp.pair.provenance) << '\t'
        << std::string_view(buf, end - buf) << '\n';
  }
  return out.str();
}

class StageRun {
 public:
  StageRun(Stage stage, const PipelineConfig& config) : stage_(stage), config_(config) {
    for (Stage up : upstream_stages(stage)) {
      auto path = manifest_path(config, up);
      if (!fs::exists(path)) {
        throw DependencyError(std::string(stage_name(up)), "stage '" + std::string(stage_name(stage)) +
                                                               "' needs '" + std::string(stage_name(up)) +
                                                               "' to run first (missing " + path.string() + ")");
      }
      manifest_.input_hashes[std::string(stage_name(up))] = DatasetManifest::load(path).output_hash;
    }
    fs::create_directories(config.paths.output_dir);
  }

  void input(std::string_view key, const fs::path& path) {
    manifest_.input_hashes[std::string(key)] = sha256_file(path);
  }

  void output(std::string_view name, const std::string& content) {
    manifest_.output_files[std::string(name)] = write_text(output_file(config_, name), content);
  }

  void count(std::string_view name, std::size_t n) { manifest_.counts[std::string(name)] = static_cast<std::int64_t>(n); }

  DatasetManifest finish() {
    manifest_.stage = std::string(stage_name(stage_));
    manifest_.config = config_.source_text;
    manifest_.overrides = config_.overrides;
    manifest_.timestamp = utc_timestamp();
    manifest_.seal();
    manifest_.save(manifest_path(config_, stage_));
    return manifest_;
  }

 private:
  Stage stage_;
  const PipelineConfig& config_;
  DatasetManifest manifest_;
};

Dataset scored_gold(const PipelineConfig& c, const LemmaTable& lemmas, const CooccurrenceTable& table,
                    const ConnectiveLexicon& lexicon, const fs::path& path, std::string_view key) {
  require_file(path, key);
  Dataset gold = load_gold_sentences(path, lemmas);
  AblationSwitches evidence = c.ablation;
  evidence.connectives = true;
  attach_evidence(gold, table, c.cs, lexicon, evidence, c.workers);
  return gold;
}

CooccurrenceTable load_table(const PipelineConfig& c) {
  std::ifstream in(output_file(c, "cooccurrence.tsv"));
  if (!in) throw DependencyError("build-cs", "missing cooccurrence.tsv");
  return CooccurrenceTable::load(in, output_file(c, "cooccurrence.tsv").string());
}

Dataset load_dataset(const PipelineConfig& c, std::string_view name, std::string_view producer) {
  auto p = output_file(c, name);
  if (!fs::exists(p)) throw DependencyError(std::string(producer), "missing " + p.string());
  return load_jsonl(p);
}

PairSet load_pairs_file(const PipelineConfig& c, std::string_view name, std::string_view producer) {
  auto p = output_file(c, name);
  std::ifstream in(p);
  if (!in) throw DependencyError(std::string(producer), "missing " + p.string());
  return read_pairs(in, p.string());
}

std::optional<Dataset> dev_set(const PipelineConfig& c, const LemmaTable& lemmas, const CooccurrenceTable& table,
                               const ConnectiveLexicon& lexicon) {
  if (c.paths.dev_sentences.empty()) return std::nullopt;
  return scored_gold(c, lemmas, table, lexicon, c.paths.dev_sentences, "dev_sentences");
}

DatasetManifest stage_expand(const PipelineConfig& c) {
  require_file(c.paths.gold_pairs, "gold_pairs");
  require_file(c.paths.synsets, "synsets");
  require_file(c.paths.verbclasses, "verbclasses");
  StageRun run(Stage::expand, c);
  run.input("gold_pairs", c.paths.gold_pairs);
  run.input("synsets", c.paths.synsets);
  run.input("verbclasses", c.paths.verbclasses);
  auto gold = load_gold_pairs(c.paths.gold_pairs);
  auto expanded = expand_all(gold, load_synset_index(c.paths.synsets), load_verbclass_index(c.paths.verbclasses));
  run.output("expanded_pairs.tsv", to_text([&](std::ostream& o) { write_pairs(o, expanded); }));
  std::size_t wn = 0, vn = 0, both = 0;
  for (const auto& p : expanded) {
    if (p.provenance == Provenance::wordnet) ++wn;
    if (p.provenance == Provenance::verbnet) ++vn;
    if (p.provenance == Provenance::both) ++both;
  }
  run.count("gold_pairs", gold.size());
  run.count("gold_causal",
            std::count_if(gold.begin(), gold.end(), [](const EventPair& p) { return p.label == Label::causal; }));
  run.count("expanded", expanded.size());
  run.count("wordnet_only", wn);
  run.count("verbnet_only", vn);
  run.count("both", both);
  return run.finish();
}

DatasetManifest stage_train_embed(const PipelineConfig& c) {
  require_file(c.paths.gold_pairs, "gold_pairs");
  StageRun run(Stage::train_embed, c);
  run.input("gold_pairs", c.paths.gold_pairs);
  auto gold = load_gold_pairs(c.paths.gold_pairs);
  auto candidates = load_pairs_file(c, "expanded_pairs.tsv", "expand");
  auto out = embed_and_filter(gold, candidates, c.margin, c.pair_keep_fraction);
  run.output("embedding.tsv", to_text([&](std::ostream& o) { save_embedding(o, out.space); }));
  run.output("ranked_pairs.tsv", ranked_tsv(out.ranking));
  run.output("filtered_pairs.tsv", to_text([&](std::ostream& o) { write_pairs(o, out.kept); }));
  run.count("candidates", candidates.size());
  run.count("ranked", out.ranking.ranked.size());
  run.count("dropped_unembedded", out.ranking.dropped);
  run.count("kept", out.kept.size());
  return run.finish();
}

DatasetManifest stage_annotate(const PipelineConfig& c) {
  require_file(c.paths.gold_pairs, "gold_pairs");
  require_file(c.paths.corpus, "corpus");
  StageRun run(Stage::annotate, c);
  run.input("gold_pairs", c.paths.gold_pairs);
  run.input("corpus", c.paths.corpus);
  if (!c.paths.lemma_table.empty()) run.input("lemma_table", c.paths.lemma_table);
  auto lemmas = lemma_table_for(c);
  auto gold = load_gold_pairs(c.paths.gold_pairs);
  auto filtered = load_pairs_file(c, "filtered_pairs.tsv", "train-embed");
  auto pairs = annotation_pairs(gold, filtered, c.ablation.extracted_pairs);
  std::ifstream corpus(c.paths.corpus);
  if (!corpus) throw ConfigError("cannot open " + c.paths.corpus.string());
  auto dn = build_dn(corpus, pairs, lemmas, annotate_options(c), c.paths.corpus.string());
  run.output("dn.jsonl", serialize_jsonl(dn.instances));
  for (const auto& [k, v] : dn.manifest.counts) run.count(k, static_cast<std::size_t>(v));
  return run.finish();
}

DatasetManifest stage_build_cs(const PipelineConfig& c) {
  require_file(c.paths.copa, "copa");
  require_file(c.paths.gold_sentences, "gold_sentences");
  StageRun run(Stage::build_cs, c);
  run.input("copa", c.paths.copa);
  run.input("gold_sentences", c.paths.gold_sentences);
  if (!c.paths.lemma_table.empty()) run.input("lemma_table", c.paths.lemma_table);
  auto lemmas = lemma_table_for(c);
  auto copa = load_copa(c.paths.copa);
  auto gold = load_gold_sentences(c.paths.gold_sentences, lemmas);
  auto table = build_cs_table(copa, gold, lemmas, c.workers);
  run.output("cooccurrence.tsv", to_text([&](std::ostream& o) { table.save(o); }));
  run.count("copa_records", copa.size());
  run.count("gold_sentences", gold.size());
  run.count("pair_count", table.pair_count());
  run.count("total", table.total());
  run.count("vocabulary", table.vocabulary().size());
  return run.finish();
}

DatasetManifest stage_filter(const PipelineConfig& c) {
  StageRun run(Stage::filter, c);
  if (!c.paths.connectives.empty()) run.input("connectives", c.paths.connectives);
  auto lemmas = lemma_table_for(c);
  auto lexicon = connectives_for(c, lemmas);
  auto table = load_table(c);
  auto dn = load_dataset(c, "dn.jsonl", "annotate");
  attach_evidence(dn, table, c.cs, lexicon, c.ablation, c.workers);
  auto result = refine(std::move(dn), c, lexicon);
  run.output("dr.jsonl", serialize_jsonl(result.kept));
  run.count("connective_total", result.connective_total);
  run.count("connective_kept", result.connective_kept);
  run.count("plain_total", result.plain_total);
  run.count("plain_kept", result.plain_kept);
  run.count("kept", result.kept.size());
  return run.finish();
}

DatasetManifest stage_relabel(const PipelineConfig& c) {
  StageRun run(Stage::relabel, c);
  run.input("gold_sentences", c.paths.gold_sentences);
  auto lemmas = lemma_table_for(c);
  auto lexicon = connectives_for(c, lemmas);
  auto table = load_table(c);
  auto gold = scored_gold(c, lemmas, table, lexicon, c.paths.gold_sentences, "gold_sentences");
  auto dr = load_dataset(c, "dr.jsonl", "filter");
  auto out = relabel_distant(gold, dr, c);
  run.output("pretrained_model.json", model_to_json(out.pretrained).dump(1) + "\n");
  run.output("drr.jsonl", serialize_jsonl(out.drr));
  run.count("refined", dr.size());
  run.count("kept", out.drr.size());
  run.count("dropped", out.dropped);
  return run.finish();
}

DatasetManifest stage_train(const PipelineConfig& c) {
  StageRun run(Stage::train, c);
  run.input("gold_sentences", c.paths.gold_sentences);
  auto lemmas = lemma_table_for(c);
  auto lexicon = connectives_for(c, lemmas);
  auto table = load_table(c);
  auto gold = scored_gold(c, lemmas, table, lexicon, c.paths.gold_sentences, "gold_sentences");
  auto drr = load_dataset(c, "drr.jsonl", "relabel");
  auto dev = dev_set(c, lemmas, table, lexicon);
  if (dev) run.input("dev_sentences", c.paths.dev_sentences);
  auto model = train_detector(gold, drr, c, dev ? &*dev : nullptr);
  run.output("model.json", model_to_json(model).dump(1) + "\n");
  run.count("gold", gold.size());
  run.count("distant", c.ablation.distant ? drr.size() : 0);
  run.count("features", model.weights.size());
  return run.finish();
}

DatasetManifest stage_evaluate(const PipelineConfig& c) {
  for (auto [p, k] : {std::pair{&c.paths.gold_sentences, "gold_sentences"}, {&c.paths.copa, "copa"}})
    require_file(*p, k);
  if (c.ablation.distant)
    for (auto [p, k] : {std::pair{&c.paths.corpus, "corpus"}, {&c.paths.synsets, "synsets"},
                        {&c.paths.verbclasses, "verbclasses"}})
      require_file(*p, k);
  StageRun run(Stage::evaluate, c);
  run.input("gold_sentences", c.paths.gold_sentences);
  run.input("copa", c.paths.copa);
  if (c.ablation.distant) {
    run.input("corpus", c.paths.corpus);
    run.input("synsets", c.paths.synsets);
    run.input("verbclasses", c.paths.verbclasses);
  }

  Confusion total;
  auto runs = nlohmann::json::array();
  double f1_sum = 0.0;
  for (int r = 0; r < c.repeats; ++r) {
    std::uint64_t seed = r == 0 ? c.seed : hash_combine(c.seed, static_cast<std::uint64_t>(r));
    nlohmann::json log;
    auto report = cross_validate(c, seed, &log);
    total.tp += report.counts.tp;
    total.fp += report.counts.fp;
    total.fn += report.counts.fn;
    total.tn += report.counts.tn;
    f1_sum += report.f1;
    auto entry = report.to_json();
    entry["seed"] = seed;
    entry["fold_log"] = std::move(log);
    runs.push_back(std::move(entry));
  }
  auto pooled = EvalReport::from_confusion(total);
  nlohmann::json doc;
  doc["ablation"] = c.ablation.tag();
  doc["repeats"] = c.repeats;
  doc["pooled"] = pooled.to_json();
  doc["mean_f1"] = f1_sum / c.repeats;
  doc["runs"] = std::move(runs);
  run.output("eval_report.json", doc.dump(1) + "\n");
  run.count("repeats", static_cast<std::size_t>(c.repeats));
  run.count("tp", total.tp);
  run.count("fp", total.fp);
  run.count("fn", total.fn);
  run.count("tn", total.tn);
  return run.finish();
}

DatasetManifest stage_audit(const PipelineConfig& c) {
  StageRun run(Stage::audit_sample, c);
  auto dr = load_dataset(c, "dr.jsonl", "filter");
  auto sample = audit_sample(dr, c.audit_size, hash_combine(c.seed, kAuditSalt));
  run.output("audit_sample.txt", to_text([&](std::ostream& o) { write_audit(o, sample); }));
  run.count("population", dr.size());
  run.count("sampled", sample.size());
  return run.finish();
}

}  // namespace

std::string_view stage_name(Stage s) { return info(s).name; }

Stage parse_stage(std::string_view name) {
  for (const auto& i : stage_table())
    if (i.name == name) return i.stage;
  throw ConfigError("unknown stage '" + std::string(name) + "'");
}

const std::vector<Stage>& upstream_stages(Stage s) { return info(s).upstream; }

const std::vector<Stage>& chain_stages() {
  static const std::vector<Stage> chain = {Stage::expand, Stage::train_embed, Stage::annotate, Stage::build_cs,
                                           Stage::filter, Stage::relabel,     Stage::train,    Stage::audit_sample};
  return chain;
}

std::string AblationSwitches::tag() const {
  std::string out;
  auto add = [&](bool on, std::string_view name) {
    if (on) return;
    if (!out.empty()) out += ',';
    out += "no-";
    out += name;
  };
  add(distant, "distant");
  add(extracted_pairs, "extracted-pairs");
  add(filter, "filter");
  add(connectives, "connectives");
  add(cs_scoring, "cs-scoring");
  add(relabel, "relabel");
  add(annealing, "annealing");
  return out.empty() ? "full" : out;
}

PipelineConfig PipelineConfig::parse(std::string_view text, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  PipelineConfig c;
  c.source_text = std::string(text);
  pt::ptree tree;
  std::istringstream in(c.source_text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config line " + std::to_string(e.line()) + ": " + e.message());
  }

  auto path_of = [&](fs::path& slot) {
    return [&slot, &base_dir](const std::string&, const std::string& v) {
      fs::path p(std::string(trim(v)));
      slot = p.empty() || p.is_absolute() ? p : base_dir / p;
    };
  };
  auto real_of = [](double& slot) {
    return [&slot](const std::string& k, const std::string& v) { slot = parse_double(k, v); };
  };
  auto int_of = [](int& slot) {
    return [&slot](const std::string& k, const std::string& v) { slot = static_cast<int>(parse_int(k, v)); };
  };
  auto count_of = [](std::size_t& slot) {
    return [&slot](const std::string& k, const std::string& v) { slot = parse_count(k, v); };
  };
  auto bool_of = [](bool& slot) {
    return [&slot](const std::string& k, const std::string& v) { slot = parse_bool(k, v); };
  };

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"paths.gold_pairs", path_of(c.paths.gold_pairs)},
      {"paths.gold_sentences", path_of(c.paths.gold_sentences)},
      {"paths.corpus", path_of(c.paths.corpus)},
      {"paths.synsets", path_of(c.paths.synsets)},
      {"paths.verbclasses", path_of(c.paths.verbclasses)},
      {"paths.lemma_table", path_of(c.paths.lemma_table)},
      {"paths.copa", path_of(c.paths.copa)},
      {"paths.connectives", path_of(c.paths.connectives)},
      {"paths.dev_sentences", path_of(c.paths.dev_sentences)},
      {"paths.output_dir", path_of(c.paths.output_dir)},
      {"pipeline.seed",
       [&](const std::string& k, const std::string& v) {
         c.seed = parse_uint(k, v);
       }},
      {"pipeline.workers", count_of(c.workers)},
      {"pipeline.pair_keep_fraction", real_of(c.pair_keep_fraction)},
      {"pipeline.corpus_fraction", real_of(c.corpus_fraction)},
      {"pipeline.keep_c", real_of(c.keep_c)},
      {"pipeline.keep_nc", real_of(c.keep_nc)},
      {"pipeline.folds", int_of(c.folds)},
      {"pipeline.audit_size", count_of(c.audit_size)},
      {"pipeline.repeats", int_of(c.repeats)},
      {"causal_strength.alpha", real_of(c.cs.alpha)},
      {"causal_strength.lambda_interp", real_of(c.cs.lambda_interp)},
      {"causal_strength.epsilon", real_of(c.cs.epsilon)},
      {"embedding.dim", count_of(c.margin.dim)},
      {"embedding.margin", real_of(c.margin.margin)},
      {"embedding.learning_rate", real_of(c.margin.learning_rate)},
      {"embedding.epochs", int_of(c.margin.epochs)},
      {"embedding.learn_relation", bool_of(c.margin.learn_relation)},
      {"embedding.negative_strategy",
       [&](const std::string& k, const std::string& v) {
         auto s = trim(v);
         if (s == "annotated_negatives") c.margin.negative_strategy = NegativeStrategy::annotated_negatives;
         else if (s == "corruption") c.margin.negative_strategy = NegativeStrategy::corruption;
         else throw ConfigError(k + ": expected annotated_negatives or corruption");
       }},
      {"detector.learning_rate", real_of(c.train.learning_rate)},
      {"detector.l2_penalty", real_of(c.train.l2_penalty)},
      {"detector.epochs", int_of(c.train.epochs)},
      {"detector.beta", real_of(c.train.beta)},
      {"detector.relabel_threshold", real_of(c.train.relabel_threshold)},
      {"detector.patience", int_of(c.train.patience)},
      {"detector.hash_seed",
       [&](const std::string& k, const std::string& v) { c.train.hash_seed = parse_uint(k, v); }},
      {"ablation.distant", bool_of(c.ablation.distant)},
      {"ablation.extracted_pairs", bool_of(c.ablation.extracted_pairs)},
      {"ablation.filter", bool_of(c.ablation.filter)},
      {"ablation.connectives", bool_of(c.ablation.connectives)},
      {"ablation.cs_scoring", bool_of(c.ablation.cs_scoring)},
      {"ablation.relabel", bool_of(c.ablation.relabel)},
      {"ablation.annealing", bool_of(c.ablation.annealing)},
  };

  for (const auto& [section, node] : tree) {
    if (node.empty()) throw ConfigError("key '" + section + "' outside of any section");
    for (const auto& [key, value] : node) {
      std::string full = section + "." + key;
      auto it = setters.find(full);
      if (it == setters.end()) throw ConfigError("unknown config key '" + full + "'");
      it->second(full, value.data());
    }
  }
  c.set_seed(c.seed);
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto base = fs::absolute(path).parent_path();
  return parse(ss.str(), base);
}

void PipelineConfig::set_seed(std::uint64_t s) {
  seed = s;
  margin.seed = hash_combine(s, kEmbedSalt);
  train.seed = hash_combine(s, kTrainSalt);
}

void PipelineConfig::validate() const {
  auto fraction = [](double f, std::string_view name) {
    if (!in_unit(f)) throw ConfigError(std::string(name) + " must lie in (0, 1]");
  };
  fraction(pair_keep_fraction, "pair_keep_fraction");
  fraction(corpus_fraction, "corpus_fraction");
  fraction(keep_c, "keep_c");
  fraction(keep_nc, "keep_nc");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  if (folds < 2) throw ConfigError("folds must be at least 2");
  if (repeats < 1) throw ConfigError("repeats must be at least 1");
  if (audit_size < 1) throw ConfigError("audit_size must be at least 1");
  try {
    cs.validate();
    margin.validate();
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

PairSet derive_gold_pairs(const Dataset& gold_sentences) {
  std::map<PairKey, bool> causal;
  std::map<PairKey, EventPair> first;
  for (const auto& s : gold_sentences) {
    auto k = key_of(s.pair);
    causal[k] = causal[k] || s.pair.label == Label::causal;
    first.try_emplace(k, s.pair);
  }
  PairSet out;
  for (auto& [k, p] : first) {
    EventPair q = p;
    q.provenance = Provenance::gold;
    q.label = causal[k] ? Label::causal : Label::noncausal;
    out.insert(q);
  }
  return out;
}

EmbeddingOutcome embed_and_filter(const PairSet& gold, const PairSet& candidates, const MarginConfig& config,
                                  double keep_fraction) {
  PairSet pos, neg;
  for (const auto& p : gold) (p.label == Label::causal ? pos : neg).insert(p);
  if (pos.empty()) throw ConfigError("no causal gold pairs to train the embedding on");
  if (config.negative_strategy == NegativeStrategy::annotated_negatives && neg.empty())
    throw ConfigError("no noncausal gold pairs; use negative_strategy = corruption");
  EmbeddingOutcome out{train_embedding(pos, neg, config), {}, {}};
  out.ranking = rank_candidates(out.space, candidates);
  if (!out.ranking.ranked.empty()) out.kept = filter_top(out.ranking.ranked, keep_fraction);
  return out;
}

PairSet annotation_pairs(const PairSet& gold, const PairSet& filtered, bool use_extracted) {
  PairSet out;
  for (const auto& p : gold)
    if (p.label == Label::causal) out.insert(p);
  if (use_extracted)
    for (const auto& p : filtered)
      if (p.label == Label::causal) out.insert(p);
  return out;
}

CooccurrenceTable build_cs_table(const std::vector<CopaRecord>& copa, const Dataset& gold_sentences,
                                 const LemmaTable& table, std::size_t workers) {
  auto texts = extract_copa_pairs(copa, table);
  auto annotated = extract_annotated_pairs(gold_sentences);
  texts.insert(texts.end(), std::make_move_iterator(annotated.begin()), std::make_move_iterator(annotated.end()));
  return build_table(texts, workers);
}

void attach_evidence(Dataset& data, const CooccurrenceTable& table, const CSParams& params,
                     const ConnectiveLexicon& lexicon, const AblationSwitches& ablation, std::size_t workers) {
  const ConnectiveLexicon* lex = ablation.connectives ? &lexicon : nullptr;
  parallel_for(data.size(), workers, [&](std::size_t i) {
    auto& s = data[i];
    if (ablation.cs_scoring) {
      score_sentence(s, table, params, lex);
    } else {
      s.cs_score.reset();
      s.connective = lex ? detect_connective(s, *lex) : std::nullopt;
    }
  });
}

void attach_connectives(Dataset& data, const ConnectiveLexicon& lexicon) {
  for (auto& s : data)
    if (!s.connective) s.connective = detect_connective(s, lexicon);
}

FilterResult refine(Dataset dn, const PipelineConfig& config, const ConnectiveLexicon& lexicon) {
  FilterResult result;
  if (!config.ablation.filter) {
    result.kept = std::move(dn);
    canonical_sort(result.kept);
    for (const auto& s : result.kept) ++(s.connective ? result.connective_total : result.plain_total);
    result.connective_kept = result.connective_total;
    result.plain_kept = result.plain_total;
  } else {
    PartitionOptions opt;
    opt.keep_c = config.keep_c;
    opt.keep_nc = config.keep_nc;
    opt.rank_by_score = config.ablation.cs_scoring;
    opt.seed = hash_combine(config.seed, kPartitionSalt);
    result = partition_and_keep(std::move(dn), opt);
  }
  if (!config.ablation.connectives) attach_connectives(result.kept, lexicon);
  return result;
}

RelabelOutcome relabel_distant(const Dataset& gold, const Dataset& dr, const PipelineConfig& config) {
  RelabelOutcome out;
  out.pretrained = train_plain(gold, config.train);
  if (config.ablation.relabel) {
    auto r = relabel(out.pretrained, dr, config.train.relabel_threshold);
    out.drr = std::move(r.kept);
    out.dropped = r.dropped;
  } else {
    out.drr = dr;
  }
  order_by_confidence(out.drr);
  return out;
}

DetectorModel train_detector(const Dataset& gold, const Dataset& drr, const PipelineConfig& config,
                             const Dataset* dev) {
  if (!config.ablation.distant) return train_annealed(gold, {}, config.train, dev);
  if (config.ablation.annealing) return train_annealed(gold, drr, config.train, dev);
  Dataset all = gold;
  all.insert(all.end(), drr.begin(), drr.end());
  return train_annealed(all, {}, config.train, dev);
}

EvalReport EvalReport::from_confusion(const Confusion& c) {
  EvalReport r;
  r.counts = c;
  r.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["tp"] = counts.tp;
  j["fp"] = counts.fp;
  j["fn"] = counts.fn;
  j["tn"] = counts.tn;
  if (!folds.empty()) {
    j["folds"] = nlohmann::json::array();
    for (const auto& f : folds) j["folds"].push_back(f.to_json());
  }
  return j;
}

EvalReport evaluate(const DetectorModel& model, const Dataset& test) {
  return EvalReport::from_confusion(confusion(model, test));
}

std::vector<Fold> kfold_split(const Dataset& gold, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k must be at least 2");
  std::vector<std::string> docs;
  for (const auto& s : gold) docs.push_back(s.sentence.doc_id);
  std::sort(docs.begin(), docs.end());
  docs.erase(std::unique(docs.begin(), docs.end()), docs.end());
  if (static_cast<std::size_t>(k) > docs.size())
    throw ConfigError("cannot split " + std::to_string(docs.size()) + " documents into " + std::to_string(k) +
                      " folds");
  std::mt19937_64 rng(hash_combine(seed, kFoldSalt));
  std::shuffle(docs.begin(), docs.end(), rng);
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < docs.size(); ++i) fold_of[docs[i]] = static_cast<int>(i % static_cast<std::size_t>(k));

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (const auto& [doc, f] : fold_of) {
    for (int g = 0; g < k; ++g) (g == f ? folds[g].test_docs : folds[g].train_docs).push_back(doc);
  }
  for (const auto& s : gold) {
    int f = fold_of[s.sentence.doc_id];
    for (int g = 0; g < k; ++g) (g == f ? folds[g].test : folds[g].train).push_back(s);
  }
  return folds;
}

EvalReport cross_validate(const PipelineConfig& base, std::uint64_t seed, nlohmann::json* fold_log) {
  PipelineConfig config = base;
  config.set_seed(seed);
  const auto lemmas = lemma_table_for(config);
  const auto lexicon = connectives_for(config, lemmas);
  require_file(config.paths.gold_sentences, "gold_sentences");
  require_file(config.paths.copa, "copa");
  const auto gold = load_gold_sentences(config.paths.gold_sentences, lemmas);
  const auto copa = load_copa(config.paths.copa);
  std::optional<SynsetIndex> synsets;
  std::optional<VerbClassIndex> verbclasses;
  if (config.ablation.distant) {
    require_file(config.paths.corpus, "corpus");
    require_file(config.paths.synsets, "synsets");
    require_file(config.paths.verbclasses, "verbclasses");
    synsets = load_synset_index(config.paths.synsets);
    verbclasses = load_verbclass_index(config.paths.verbclasses);
  }

  auto folds = kfold_split(gold, config.folds, seed);
  if (fold_log) *fold_log = nlohmann::json::array();
  EvalReport overall;
  Confusion total;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto& fold = folds[f];
    std::set<PairKey> test_keys;
    for (const auto& s : fold.test) test_keys.insert(key_of(s.pair));

    auto table = build_cs_table(copa, fold.train, lemmas, config.workers);
    AblationSwitches gold_evidence = config.ablation;
    gold_evidence.connectives = true;
    attach_evidence(fold.train, table, config.cs, lexicon, gold_evidence, config.workers);
    attach_evidence(fold.test, table, config.cs, lexicon, gold_evidence, config.workers);

    nlohmann::json log;
    log["fold"] = f;
    log["train_docs"] = fold.train_docs;
    log["test_docs"] = fold.test_docs;
    {
      PairSet test_pairs;
      for (const auto& s : fold.test) {
        EventPair p = s.pair;
        p.provenance = Provenance::gold;
        test_pairs.insert(p);
      }
      log["test_pairs"] = pair_list(test_pairs);
    }

    Dataset drr;
    if (config.ablation.distant) {
      const PairSet seeds = without_keys(derive_gold_pairs(fold.train), test_keys);
      const PairSet expanded = without_keys(expand_all(seeds, *synsets, *verbclasses), test_keys);
      PairSet filtered;
      if (config.ablation.extracted_pairs && !expanded.empty())
        filtered = embed_and_filter(seeds, expanded, config.margin, config.pair_keep_fraction).kept;
      const PairSet pairs = without_keys(annotation_pairs(seeds, filtered, config.ablation.extracted_pairs), test_keys);

      std::ifstream corpus(config.paths.corpus);
      if (!corpus) throw ConfigError("cannot open " + config.paths.corpus.string());
      auto dn = build_dn(corpus, pairs, lemmas, annotate_options(config), config.paths.corpus.string());
      attach_evidence(dn.instances, table, config.cs, lexicon, config.ablation, config.workers);
      auto dr = refine(std::move(dn.instances), config, lexicon);
      auto rel = relabel_distant(fold.train, dr.kept, config);
      drr = std::move(rel.drr);

      log["expansion_seeds"] = pair_list(seeds);
      log["expanded"] = expanded.size();
      log["filtered_pairs"] = pair_list(filtered);
      log["annotation_pairs"] = pairs.size();
      log["dn"] = dn.manifest.counts["instances"];
      log["dr"] = dr.kept.size();
      log["drr"] = drr.size();
    }
    auto model = train_detector(fold.train, drr, config);
    auto report = evaluate(model, fold.test);
    total.tp += report.counts.tp;
    total.fp += report.counts.fp;
    total.fn += report.counts.fn;
    total.tn += report.counts.tn;
    overall.folds.push_back(report);
    if (fold_log) fold_log->push_back(std::move(log));
  }
  auto pooled = EvalReport::from_confusion(total);
  pooled.folds = std::move(overall.folds);
  return pooled;
}

Dataset audit_sample(const Dataset& data, std::size_t n, std::uint64_t seed) {
  if (n > data.size())
    throw ConfigError("audit sample of " + std::to_string(n) + " requested from " + std::to_string(data.size()) +
                      " records");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // partial Fisher-Yates
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  Dataset out;
  out.reserve(n);
  for (auto i : idx) out.push_back(data[i]);
  return out;
}

void write_audit(std::ostream& out, const Dataset& sample) {
  std::size_t k = 0;
  for (const auto& s : sample) {
    out << '#' << ++k << "  " << s.sentence.doc_id << '/' << s.sentence.sent_id << "  " << s.pair.cause.str()
        << " -> " << s.pair.effect.str() << "  source=" << to_string(s.pair_source);
    if (s.connective) out << "  connective=\"" << *s.connective << '"';
    if (s.cs_score) out << "  cs=" << *s.cs_score;
    out << '\n' << "    ";
    const auto& toks = s.sentence.tokens;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (i) out << ' ';
      if (i == s.cause_idx) out << "[CAUSE:" << toks[i] << ']';
      else if (i == s.effect_idx) out << "[EFFECT:" << toks[i] << ']';
      else out << toks[i];
    }
    out << "\n\n";
  }
}

fs::path manifest_path(const PipelineConfig& config, Stage stage) {
  return config.paths.output_dir / (std::string(stage_name(stage)) + ".manifest.json");
}

DatasetManifest run_stage(Stage stage, const PipelineConfig& config) {
  if (config.paths.output_dir.empty()) throw ConfigError("paths.output_dir is not set");
  switch (stage) {
    case Stage::expand: return stage_expand(config);
    case Stage::train_embed: return stage_train_embed(config);
    case Stage::annotate: return stage_annotate(config);
    case Stage::build_cs: return stage_build_cs(config);
    case Stage::filter: return stage_filter(config);
    case Stage::relabel: return stage_relabel(config);
    case Stage::train: return stage_train(config);
    case Stage::evaluate: return stage_evaluate(config);
    case Stage::audit_sample: return stage_audit(config);
  }
  throw std::logic_error("unhandled stage");
}

}  // namespace knowdis
