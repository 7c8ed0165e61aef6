#include "knowdis/common.hpp"

#include <cctype>
#include <cmath>

namespace knowdis {

namespace {

bool is_ascii_punct(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u);
}

bool is_ascii_space(char c) {
  auto u = static_cast<unsigned char>(c);
  return u < 128 && std::isspace(u);
}

std::size_t snap(double x, bool round_up) {
  if (x <= 0.0) return 0;
  double nearest = std::round(x);
  if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, x)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(round_up ? std::ceil(x) : std::floor(x));
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

DependencyError::DependencyError(std::string missing_stage, const std::string& what)
    : Error(what), missing_stage_(std::move(missing_stage)) {}

MissingEmbeddingError::MissingEmbeddingError(std::string lemma)
    : Error("no embedding for lemma '" + lemma + "'"), lemma_(std::move(lemma)) {}

std::string normalize_token(std::string_view raw) {
  std::size_t b = 0, e = raw.size();
  while (b < e && is_ascii_punct(raw[b])) ++b;
  while (e > b && is_ascii_punct(raw[e - 1])) --e;
  std::string out(raw.substr(b, e - b));
  for (char& c : out) {
    auto u = static_cast<unsigned char>(c);
    if (u < 128) c = static_cast<char>(std::tolower(u));
  }
  return out;
}

Lemma::Lemma(std::string_view raw) : text_(normalize_token(trim(raw))) {
  if (text_.empty()) throw std::invalid_argument("empty lemma from '" + std::string(raw) + "'");
  for (char c : text_) {
    if (is_ascii_space(c)) throw std::invalid_argument("lemma contains whitespace: '" + text_ + "'");
  }
}

Lemma head_word(std::string_view phrase) {
  std::string_view t = trim(phrase);
  std::size_t cut = t.size();
  while (cut > 0 && !is_ascii_space(t[cut - 1])) --cut;
  return Lemma(t.substr(cut));
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::gold: return "gold";
    case Provenance::wordnet: return "wordnet";
    case Provenance::verbnet: return "verbnet";
    case Provenance::both: return "both";
  }
  return "gold";
}

std::string_view to_string(Label l) { return l == Label::causal ? "causal" : "noncausal"; }

Provenance parse_provenance(std::string_view s) {
  if (s == "gold") return Provenance::gold;
  if (s == "wordnet") return Provenance::wordnet;
  if (s == "verbnet") return Provenance::verbnet;
  if (s == "both") return Provenance::both;
  throw std::invalid_argument("unknown provenance '" + std::string(s) + "'");
}

Label parse_label(std::string_view s) {
  if (s == "causal") return Label::causal;
  if (s == "noncausal") return Label::noncausal;
  throw std::invalid_argument("unknown label '" + std::string(s) + "'");
}

std::size_t ceil_fraction(double fraction, std::size_t n) {
  return snap(fraction * static_cast<double>(n), true);
}

std::size_t floor_fraction(double fraction, std::size_t n) {
  return snap(fraction * static_cast<double>(n), false);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix64(h);
}

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

double unit_interval(std::uint64_t h) {
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_ascii_space(s[b])) ++b;
  while (e > b && is_ascii_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

}  // namespace knowdis
