#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "aler/ingest.hpp"

namespace aler {

/// A uniform sample of record ids drawn without replacement.
struct SamplePlan {
  double proportion = 0.2;
  std::uint64_t seed = 0;
  std::vector<std::string> sampled_ids;
};

/// Draws ceil(proportion * |ids|) ids. Throws ValidationError when the
/// proportion is outside (0, 1] or `ids` is empty.
SamplePlan sample_records(std::span<const std::string> ids, double proportion, std::uint64_t seed);

/// ceil(log10(sample_size)), at least 1.
std::size_t chunk_count(std::size_t sample_size);

struct ChunkSet {
  std::vector<std::vector<std::string>> chunks;
  std::vector<std::vector<float>> centroids;
  /// Objective sum(1 - <x, centroid>) after each Lloyd iteration.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  bool converged = false;

  std::size_t size() const { return chunks.size(); }
};

/// Spherical K-Means (Lloyd updates followed by centroid re-normalization)
/// over the rows of `sample`, seeded with k-means++ style D^2 sampling. An
/// empty cluster is refilled with the member of the largest cluster that is
/// least similar to its centroid. Chunks list ids in matrix row order.
ChunkSet kmeans_partition(const EmbeddingMatrix& sample, std::size_t n_chunks, std::uint64_t seed,
                          std::size_t max_iters = 100);

/// Sum over rows of (1 - <x, centroid of its chunk>).
double partition_inertia(const EmbeddingMatrix& sample, const ChunkSet& chunks);

/// Two-column `record_id,chunk` text (1-based chunk numbers); `header_comment`
/// lines are written first, prefixed with '#'.
void save_chunks(const ChunkSet& chunks, const std::filesystem::path& path,
                 const std::vector<std::string>& header_comment = {});

/// Reads a chunk file back. Centroids are not stored and come back empty.
ChunkSet load_chunks(const std::filesystem::path& path);

}  // namespace aler
