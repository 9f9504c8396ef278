#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>

namespace aler {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files, bad configuration, or violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The oracle refused a label because the hard cap was reached.
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

/// A training set that contains only one class.
class SingleClassError : public Error {
 public:
  using Error::Error;
};

/// A (query-record, candidate-record) identifier pair. The r side comes from
/// the query collection, the s side from the indexed collection.
struct CandidatePair {
  std::string r_id;
  std::string s_id;

  friend auto operator<=>(const CandidatePair&, const CandidatePair&) = default;
  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

std::string to_string(const CandidatePair& pair);

struct CandidatePairHash {
  std::size_t operator()(const CandidatePair& pair) const noexcept;
};

using PairSet = std::unordered_set<CandidatePair, CandidatePairHash>;

struct ScoredPair {
  CandidatePair pair;
  double prob = 0.0;
};

/// Where a label came from: the seed set, the validation set, or iteration
/// `iteration` of the mini loop on chunk `chunk` (both 1-based).
struct Provenance {
  enum class Kind { seed, validation, loop };

  Kind kind = Kind::seed;
  std::size_t chunk = 0;
  std::size_t iteration = 0;

  static Provenance seed() { return {Kind::seed, 0, 0}; }
  static Provenance validation() { return {Kind::validation, 0, 0}; }
  static Provenance loop(std::size_t chunk, std::size_t iteration) {
    return {Kind::loop, chunk, iteration};
  }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// "seed", "validation" or "loop-<chunk>-<iteration>".
std::string to_string(const Provenance& provenance);
Provenance parse_provenance(const std::string& text);

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0);

/// 64-bit FNV-1a over raw bytes. Stable across platforms; used for content
/// hashes in provenance headers.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

/// Shortest text that parses back to the same double.
std::string format_double(double value);

/// Whole-string parses. Throw ValidationError mentioning `what`.
double parse_double(std::string_view text, std::string_view what);
std::size_t parse_size(std::string_view text, std::string_view what);

}  // namespace aler
