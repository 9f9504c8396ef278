#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aler/ingest.hpp"

namespace aler {

struct HnswParams {
  std::size_t m = 16;                ///< max neighbors per node on layers >= 1 (2m on layer 0)
  std::size_t ef_construction = 200;
  std::size_t ef_search = 64;
};

/// A search hit. Similarity is the inner product of unit vectors.
struct Neighbor {
  std::string id;
  float similarity = 0.0f;
};

/// Hierarchical navigable small-world graph over a fixed set of unit vectors.
///
/// Built once in a single pass and immutable afterwards; concurrent queries
/// are safe. Level assignment draws from a seeded generator, so two builds
/// with equal inputs, parameters and seed produce identical graphs.
class HnswIndex {
 public:
  /// Throws ValidationError for an empty matrix or invalid parameters
  /// (m < 2, ef_construction < m).
  static HnswIndex build(const EmbeddingMatrix& matrix, const HnswParams& params,
                         std::uint64_t seed);

  /// Top-k neighbors of `v`, sorted by similarity descending with ties broken
  /// by ascending id. Returns at most min(k, size()) entries. `ef_search` is
  /// raised to k when smaller.
  std::vector<Neighbor> query(std::span<const float> v, std::size_t k,
                              std::size_t ef_search) const;
  std::vector<Neighbor> query(std::span<const float> v, std::size_t k) const {
    return query(v, k, params_.ef_search);
  }

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const HnswParams& params() const { return params_; }
  std::uint32_t entry_point() const { return entry_point_; }
  int max_level() const { return max_level_; }
  int level(std::uint32_t node) const { return static_cast<int>(links_[node].size()) - 1; }
  const std::vector<std::uint32_t>& neighbors(std::uint32_t node, int layer) const {
    return links_[node][static_cast<std::size_t>(layer)];
  }
  const std::string& id(std::uint32_t node) const { return ids_[node]; }
  std::span<const float> vector(std::uint32_t node) const {
    return {vectors_.data() + static_cast<std::size_t>(node) * dim_, dim_};
  }

  /// Throws Error describing the first violated graph invariant: dangling
  /// neighbor ids, self loops, duplicate edges, degree bounds, or an entry
  /// point below the maximum level.
  void validate() const;

  /// Versioned little-endian "ALERHNSW" file.
  void save(const std::filesystem::path& path) const;
  static HnswIndex load(const std::filesystem::path& path);

 private:
  struct Candidate {
    float similarity;
    std::uint32_t node;
  };

  HnswIndex() = default;

  float similarity(std::span<const float> a, std::uint32_t node) const;
  std::vector<Candidate> search_layer(std::span<const float> q, std::uint32_t entry,
                                      std::size_t ef, int layer) const;
  std::vector<std::uint32_t> select_neighbors(std::vector<Candidate> candidates,
                                              std::size_t max_count) const;
  void insert(std::uint32_t node, int node_level);

  std::size_t dim_ = 0;
  HnswParams params_;
  std::vector<std::string> ids_;
  std::vector<float> vectors_;
  // links_[node][layer] -> neighbor node indices
  std::vector<std::vector<std::vector<std::uint32_t>>> links_;
  std::uint32_t entry_point_ = 0;
  int max_level_ = 0;
};

/// Exact top-k by inner product, with the same ordering rules as
/// HnswIndex::query. Test oracle and small-corpus fallback.
std::vector<Neighbor> brute_force_knn(const EmbeddingMatrix& matrix, std::span<const float> v,
                                      std::size_t k);

}  // namespace aler
