#include "knowdis/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>

namespace knowdis {

namespace {

constexpr double kScoreClamp = 30.0;
constexpr int kContextWindow = 3;

double sigmoid(double z) {
  z = std::clamp(z, -kScoreClamp, kScoreClamp);
  return 1.0 / (1.0 + std::exp(-z));
}

bool is_positive(const LabeledSentence& s) { return s.pair.label == Label::causal; }

void require_both_classes(const Dataset& a, const Dataset& b = {}) {
  bool pos = false, neg = false;
  for (const auto* d : {&a, &b}) {
    for (const auto& s : *d) (is_positive(s) ? pos : neg) = true;
  }
  if (!pos || !neg) throw TrainingError("training data must contain both causal and noncausal instances");
}

double dot(const std::unordered_map<FeatureId, double>& w, const FeatureVector& x) {
  double z = 0.0;
  for (const auto& [id, v] : x.entries) {
    auto it = w.find(id);
    if (it != w.end()) z += it->second * v;
  }
  return z;
}

// Weights are held as scale * v so the L2 shrink is O(1) per step.
class SgdState {
 public:
  void step(const Example& ex, double lr, double l2) {
    double z = scale_ * dot(v_, ex.x) + bias_;
    double g = sigmoid(z) - (ex.positive ? 1.0 : 0.0);
    if (l2 > 0.0) {
      scale_ *= (1.0 - lr * l2);
      if (scale_ < 1e-9) fold();
    }
    for (const auto& [id, val] : ex.x.entries) v_[id] -= lr * g * val / scale_;
    bias_ -= lr * g;
  }

  void export_to(DetectorModel& m) const {
    m.weights.clear();
    for (const auto& [id, v] : v_) m.weights[id] = v * scale_;
    m.bias = bias_;
  }

 private:
  void fold() {
    for (auto& [id, v] : v_) v *= scale_;
    scale_ = 1.0;
  }

  std::unordered_map<FeatureId, double> v_;
  double scale_ = 1.0;
  double bias_ = 0.0;
};

std::vector<Example> to_examples(const Dataset& data, const FeatureContext& ctx) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back({featurize(s, ctx), is_positive(s)});
  return out;
}

double f1_of(const Confusion& c) {
  double p = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  double r = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  return p + r > 0.0 ? 2 * p * r / (p + r) : 0.0;
}

DetectorModel run_sgd(const Dataset& gold, const Dataset& distant, const TrainConfig& config, const Dataset* dev) {
  config.validate();
  require_both_classes(gold, distant);

  DetectorModel model;
  model.hash_seed = config.hash_seed;
  Dataset all = gold;
  all.insert(all.end(), distant.begin(), distant.end());
  model.cs_bucket_edges = cs_quartile_edges(all);
  const auto ctx = model.context();
  const auto gold_x = to_examples(gold, ctx);
  const auto distant_x = to_examples(distant, ctx);

  SgdState state;
  DetectorModel best = model;
  double best_f1 = -1.0;
  int since_best = 0;
  const bool early_stop = dev != nullptr && config.patience > 0;

  std::vector<std::size_t> order;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::size_t admitted = anneal_count(epoch, config.beta, distant_x.size());
    order.resize(gold_x.size() + admitted);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(hash_combine(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t idx : order) {
      const Example& ex = idx < gold_x.size() ? gold_x[idx] : distant_x[idx - gold_x.size()];
      state.step(ex, config.learning_rate, config.l2_penalty);
    }

    if (early_stop) {
      state.export_to(model);
      double f1 = f1_of(confusion(model, *dev));
      if (f1 > best_f1) {
        best_f1 = f1;
        best = model;
        since_best = 0;
      } else if (++since_best >= config.patience) {
        break;
      }
    }
  }
  if (early_stop) return best;
  state.export_to(model);
  return model;
}

}  // namespace

std::string_view distance_bucket(std::size_t distance) {
  if (distance <= 1) return "1";
  if (distance <= 3) return "2-3";
  if (distance <= 7) return "4-7";
  return "8+";
}

std::vector<std::string> feature_strings(const LabeledSentence& s, const std::array<double, 3>& cs_edges) {
  const auto& cause = s.pair.cause.str();
  const auto& effect = s.pair.effect.str();
  std::vector<std::string> f;
  f.push_back("PAIR=" + cause + "|" + effect);
  f.push_back("CAUSE=" + cause);
  f.push_back("EFFECT=" + effect);
  f.push_back("CONN=" + s.connective.value_or("NONE"));
  f.push_back("ORIENT=" + std::string(to_string(s.orientation)));
  std::size_t dist = s.cause_idx > s.effect_idx ? s.cause_idx - s.effect_idx : s.effect_idx - s.cause_idx;
  f.push_back("DIST=" + std::string(distance_bucket(dist)));
  if (s.cs_score) {
    int q = 0;
    for (double edge : cs_edges) q += *s.cs_score > edge ? 1 : 0;
    f.push_back("CSB=q" + std::to_string(q));
  }
  const auto& lemmas = s.sentence.lemmas;
  auto window = [&](std::size_t center, std::string_view tag) {
    std::size_t lo = center >= kContextWindow ? center - kContextWindow : 0;
    std::size_t hi = std::min(lemmas.size(), center + kContextWindow + 1);
    for (std::size_t i = lo; i < hi; ++i) {
      if (i != center) f.push_back(std::string(tag) + lemmas[i].str());
    }
  };
  window(s.cause_idx, "CTX_C=");
  window(s.effect_idx, "CTX_E=");
  return f;
}

FeatureVector featurize(const LabeledSentence& instance, const FeatureContext& context) {
  std::map<FeatureId, double> acc;
  for (const auto& name : feature_strings(instance, context.cs_bucket_edges)) {
    acc[stable_hash(name, context.hash_seed)] += 1.0;
  }
  return FeatureVector{{acc.begin(), acc.end()}};
}

std::array<double, 3> cs_quartile_edges(const Dataset& data) {
  std::vector<double> scores;
  for (const auto& s : data) {
    if (s.cs_score) scores.push_back(*s.cs_score);
  }
  if (scores.empty()) return {0.0, 0.0, 0.0};
  std::sort(scores.begin(), scores.end());
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(scores.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(scores.size() - 1, lo + 1);
    double frac = pos - static_cast<double>(lo);
    return scores[lo] + frac * (scores[hi] - scores[lo]);
  };
  return {quantile(0.25), quantile(0.5), quantile(0.75)};
}

double DetectorModel::score(const FeatureVector& x) const { return dot(weights, x) + bias; }

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("detector learning_rate must be > 0");
  if (!(l2_penalty >= 0.0) || learning_rate * l2_penalty >= 1.0) {
    throw ConfigError("l2_penalty must be >= 0 with learning_rate * l2_penalty < 1");
  }
  if (epochs < 1) throw ConfigError("detector epochs must be >= 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("beta must lie in (0, 1]");
  if (!(relabel_threshold > 0.0 && relabel_threshold < 1.0)) throw ConfigError("relabel_threshold must lie in (0, 1)");
  if (patience < 0) throw ConfigError("patience must be >= 0");
}

double regularized_log_loss(const LinearParams& params, std::span<const Example> data, double l2) {
  double loss = 0.0;
  for (const auto& ex : data) {
    double z = dot(params.weights, ex.x) + params.bias;
    double y = ex.positive ? 1.0 : -1.0;
    // log(1 + exp(-y z)), computed stably.
    double m = -y * z;
    loss += m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  }
  if (!data.empty()) loss /= static_cast<double>(data.size());
  double reg = 0.0;
  for (const auto& [id, w] : params.weights) reg += w * w;
  return loss + 0.5 * l2 * reg;
}

LinearParams regularized_log_loss_gradient(const LinearParams& params, std::span<const Example> data, double l2) {
  LinearParams g;
  for (const auto& [id, w] : params.weights) g.weights[id] = l2 * w;
  const double inv_n = data.empty() ? 0.0 : 1.0 / static_cast<double>(data.size());
  for (const auto& ex : data) {
    double z = dot(params.weights, ex.x) + params.bias;
    double p = 1.0 / (1.0 + std::exp(-z));
    double r = (p - (ex.positive ? 1.0 : 0.0)) * inv_n;
    for (const auto& [id, v] : ex.x.entries) g.weights[id] += r * v;
    g.bias += r;
  }
  return g;
}

double predict(const DetectorModel& model, const FeatureVector& x) { return sigmoid(model.score(x)); }

double predict(const DetectorModel& model, const LabeledSentence& instance) {
  return predict(model, featurize(instance, model.context()));
}

DetectorModel train_plain(const Dataset& data, const TrainConfig& config) {
  return run_sgd(data, {}, config, nullptr);
}

RelabelResult relabel(const DetectorModel& model, const Dataset& refined, double threshold) {
  RelabelResult out;
  for (const auto& s : refined) {
    if (predict(model, s) >= threshold) {
      LabeledSentence kept = s;
      kept.pair.label = Label::causal;
      out.kept.push_back(std::move(kept));
    } else {
      ++out.dropped;
    }
  }
  return out;
}

std::size_t anneal_count(int epoch, double beta, std::size_t total) {
  if (epoch < 1) throw std::invalid_argument("epoch must be >= 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in (0, 1]");
  double share = std::min(1.0, static_cast<double>(epoch - 1) * beta);
  return std::min(total, floor_fraction(share, total));
}

DetectorModel train_annealed(const Dataset& gold, const Dataset& distant, const TrainConfig& config,
                             const Dataset* dev) {
  return run_sgd(gold, distant, config, dev);
}

Confusion confusion(const DetectorModel& model, const Dataset& test, double threshold) {
  Confusion c;
  for (const auto& s : test) {
    bool predicted = predict(model, s) >= threshold;
    bool actual = is_positive(s);
    if (predicted && actual) ++c.tp;
    else if (predicted) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return c;
}

nlohmann::json model_to_json(const DetectorModel& model) {
  nlohmann::json j;
  j["format"] = "knowdis-detector";
  j["version"] = 1;
  j["bias"] = model.bias;
  j["hash_seed"] = model.hash_seed;
  j["cs_bucket_edges"] = model.cs_bucket_edges;
  std::map<FeatureId, double> sorted(model.weights.begin(), model.weights.end());
  auto& w = j["weights"] = nlohmann::json::object();
  for (const auto& [id, v] : sorted) w[std::to_string(id)] = v;
  return j;
}

DetectorModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "knowdis-detector" || j.value("version", 0) != 1) {
    throw ParseError("<model>", 0, "not a knowdis-detector v1 model");
  }
  DetectorModel m;
  m.bias = j.at("bias").get<double>();
  m.hash_seed = j.at("hash_seed").get<std::uint64_t>();
  m.cs_bucket_edges = j.at("cs_bucket_edges").get<std::array<double, 3>>();
  for (const auto& [key, value] : j.at("weights").items()) m.weights[std::stoull(key)] = value.get<double>();
  return m;
}

void save_model(const std::filesystem::path& path, const DetectorModel& model) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << model_to_json(model).dump(1) << '\n';
}

DetectorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

}  // namespace knowdis
