#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace knowdis {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input record. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A stage was asked to run before one of the stages it reads from.
class DependencyError : public Error {
 public:
  DependencyError(std::string missing_stage, const std::string& what);
  const std::string& missing_stage() const { return missing_stage_; }

 private:
  std::string missing_stage_;
};

class MissingEmbeddingError : public Error {
 public:
  explicit MissingEmbeddingError(std::string lemma);
  const std::string& lemma() const { return lemma_; }

 private:
  std::string lemma_;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Lowercases ASCII letters and strips punctuation from both edges.
std::string normalize_token(std::string_view raw);

/// Lowercase, edge-punctuation-free, whitespace-free, non-empty word.
class Lemma {
 public:
  /// Normalizes `raw`; throws std::invalid_argument if the result is empty
  /// or contains whitespace.
  explicit Lemma(std::string_view raw);

  const std::string& str() const { return text_; }
  std::size_t size() const { return text_.size(); }

  friend bool operator==(const Lemma&, const Lemma&) = default;
  friend std::strong_ordering operator<=>(const Lemma& a, const Lemma& b) {
    return a.text_ <=> b.text_;
  }

 private:
  std::string text_;
};

/// Head word of a (possibly multi-word) event phrase: its last token.
Lemma head_word(std::string_view phrase);

enum class Provenance { gold, wordnet, verbnet, both };
enum class Label { causal, noncausal };

std::string_view to_string(Provenance p);
std::string_view to_string(Label l);
Provenance parse_provenance(std::string_view s);
Label parse_label(std::string_view s);

/// Ordered (cause, effect) candidate with provenance and label.
struct EventPair {
  Lemma cause;
  Lemma effect;
  Provenance provenance = Provenance::gold;
  Label label = Label::causal;

  friend bool operator==(const EventPair&, const EventPair&) = default;
  friend auto operator<=>(const EventPair&, const EventPair&) = default;
};

using PairSet = std::set<EventPair>;

/// ceil(fraction * n), snapping products that sit within rounding error of
/// an integer (0.1 * 30 is 3.0000000000000004 in binary floating point).
std::size_t ceil_fraction(double fraction, std::size_t n);
std::size_t floor_fraction(double fraction, std::size_t n);

std::uint64_t mix64(std::uint64_t x);
/// FNV-1a followed by a splitmix finalizer. Stable across platforms.
std::uint64_t stable_hash(std::string_view bytes, std::uint64_t seed = 0);
std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);
/// Maps a hash to [0, 1).
double unit_interval(std::uint64_t h);

std::vector<std::string> split(std::string_view s, char delim);
std::string_view trim(std::string_view s);

}  // namespace knowdis

template <>
struct std::hash<knowdis::Lemma> {
  std::size_t operator()(const knowdis::Lemma& l) const noexcept {
    return std::hash<std::string>{}(l.str());
  }
};
