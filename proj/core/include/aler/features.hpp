#pragma once

#include <atomic>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "aler/ingest.hpp"
#include "aler/types.hpp"

namespace aler {

/// Row-major batch of feature vectors, one row per pair.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Writes [a | b | |a - b| | a * b] into `out` (length 4 * dim).
void write_interaction(std::span<const float> a, std::span<const float> b, std::span<double> out);

/// Interaction vector of two embeddings. Throws ValidationError on a dim mismatch.
std::vector<double> interaction_vector(std::span<const float> a, std::span<const float> b);

/// Jaro similarity of the raw strings (no case folding).
double jaro(std::string_view a, std::string_view b);

/// Jaro-Winkler similarity with prefix cap 4 and scale 0.1, computed on the
/// trimmed, ASCII-lowercased strings. Both empty gives 1.0; exactly one
/// empty gives 0.0.
double jaro_winkler(std::string_view a, std::string_view b);

/// Featurizes candidate pairs against fixed record collections and
/// embeddings. Interaction features need only the embeddings; lexical
/// features additionally read the key attributes of both records.
class PairFeaturizer {
 public:
  /// Throws ValidationError when a key attribute is absent from either schema
  /// or the embedding dims differ.
  PairFeaturizer(const EmbeddingMatrix& embeddings_r, const EmbeddingMatrix& embeddings_s,
                 const RecordCollection* records_r = nullptr,
                 const RecordCollection* records_s = nullptr,
                 std::vector<std::string> key_attrs = {});

  std::size_t embedding_dim() const { return embeddings_r_->dim(); }
  std::size_t interaction_dim() const { return 4 * embedding_dim(); }
  std::size_t lexical_dim() const { return interaction_dim() + key_attrs_.size(); }
  const std::vector<std::string>& key_attrs() const { return key_attrs_; }

  FeatureMatrix interaction(std::span<const CandidatePair> pairs) const;
  FeatureMatrix lexical(std::span<const CandidatePair> pairs) const;
  std::vector<double> lexical_vector(const CandidatePair& pair) const;

  /// Number of lexical feature vectors computed so far.
  std::size_t lexical_count() const { return lexical_count_.load(); }

 private:
  void write_lexical(const CandidatePair& pair, std::span<double> out) const;

  const EmbeddingMatrix* embeddings_r_;
  const EmbeddingMatrix* embeddings_s_;
  const RecordCollection* records_r_;
  const RecordCollection* records_s_;
  std::vector<std::string> key_attrs_;
  std::vector<std::size_t> attr_r_;
  std::vector<std::size_t> attr_s_;
  mutable std::atomic<std::size_t> lexical_count_{0};
};

}  // namespace aler
