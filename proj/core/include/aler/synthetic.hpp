#pragma once

// Desk-scale corpora with planted ground truth: base records, perturbed
// copies, and near-duplicate distractors of other entities, embedded by a
// hashed character-trigram encoder.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "aler/ingest.hpp"

namespace aler {

struct PerturbationSpec {
  double typo_rate = 0.03;     ///< per character: substitute, delete, insert or transpose
  double token_drop = 0.15;    ///< per title token
  double abbreviation = 0.2;   ///< per token; also strips separators from codes
  std::uint64_t seed = 0;

  /// Throws ValidationError unless every rate lies in [0, 1].
  void validate() const;
};

struct SyntheticOptions {
  /// Distractors per base record (siblings sharing maker and category).
  double distractor_rate = 0.5;
  double person_fraction = 0.3;
  /// Share of base records with a perturbed copy in S. Below 1 some R
  /// records have no match, which makes positives rarer in candidate pools.
  double match_rate = 1.0;
  std::size_t dim = 64;
};

struct SyntheticCorpus {
  RecordCollection records_r;
  RecordCollection records_s;
  MatchSet truth;
  EmbeddingMatrix embeddings_r;
  EmbeddingMatrix embeddings_s;
};

/// Deterministic locality-preserving encoder: lower-cased character
/// trigrams (with word-boundary padding) and whole words, each hashed to a
/// signed bucket, summed, then scaled to unit length.
class SurrogateEncoder {
 public:
  explicit SurrogateEncoder(std::size_t dim, std::uint64_t salt = 0x5eed);

  std::size_t dim() const { return dim_; }
  std::vector<float> encode(std::string_view text) const;
  /// Encodes the attribute values of every record, joined by spaces.
  EmbeddingMatrix encode(const RecordCollection& records) const;

 private:
  std::size_t dim_;
  std::uint64_t salt_;
};

/// Schema: title, maker, category, code. R holds `n_records` base entities
/// (ids r00001...); S holds a perturbed copy of a `match_rate` share of
/// them plus the distractors, shuffled (ids s00001...). Deterministic for a fixed spec and options.
/// Throws ValidationError when n_records < 10.
SyntheticCorpus generate(std::size_t n_records, const PerturbationSpec& spec,
                         const SyntheticOptions& options = {});

/// Writes records_r.csv, records_s.csv, truth.csv, emb_r.txt and emb_s.txt
/// into `dir` (created when missing).
void write_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace aler
