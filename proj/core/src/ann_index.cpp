#include "aler/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <queue>
#include <random>

#include <Eigen/Core>

#include "binary_io.hpp"

namespace aler {

namespace {

constexpr char kIndexMagic[8] = {'A', 'L', 'E', 'R', 'H', 'N', 'S', 'W'};
constexpr std::uint32_t kIndexVersion = 1;

float dot(const float* a, const float* b, std::size_t dim) {
  using Vec = Eigen::Map<const Eigen::VectorXf>;
  return Vec(a, static_cast<Eigen::Index>(dim)).dot(Vec(b, static_cast<Eigen::Index>(dim)));
}

void sort_neighbors(std::vector<Neighbor>& hits) {
  std::sort(hits.begin(), hits.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.id < b.id;
  });
}

}  // namespace

float HnswIndex::similarity(std::span<const float> a, std::uint32_t node) const {
  return dot(a.data(), vectors_.data() + static_cast<std::size_t>(node) * dim_, dim_);
}

std::vector<HnswIndex::Candidate> HnswIndex::search_layer(std::span<const float> q,
                                                          std::uint32_t entry, std::size_t ef,
                                                          int layer) const {
  auto worse = [](const Candidate& a, const Candidate& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.node < b.node);
  };
  auto better = [](const Candidate& a, const Candidate& b) {
    return a.similarity < b.similarity || (a.similarity == b.similarity && a.node > b.node);
  };
  // frontier: best first. results: worst on top.
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(better)> frontier(better);
  std::priority_queue<Candidate, std::vector<Candidate>, decltype(worse)> results(worse);
  std::vector<bool> visited(ids_.size(), false);

  const Candidate start{similarity(q, entry), entry};
  visited[entry] = true;
  frontier.push(start);
  results.push(start);

  while (!frontier.empty()) {
    const Candidate current = frontier.top();
    if (results.size() >= ef && current.similarity < results.top().similarity) break;
    frontier.pop();
    for (std::uint32_t nb : links_[current.node][static_cast<std::size_t>(layer)]) {
      if (visited[nb]) continue;
      visited[nb] = true;
      const float s = similarity(q, nb);
      if (results.size() < ef || s > results.top().similarity) {
        frontier.push({s, nb});
        results.push({s, nb});
        if (results.size() > ef) results.pop();
      }
    }
  }

  std::vector<Candidate> out;
  out.reserve(results.size());
  while (!results.empty()) {
    out.push_back(results.top());
    results.pop();
  }
  std::reverse(out.begin(), out.end());
  return out;
}

// Neighbor-diversity heuristic: keep a candidate only when it is more similar
// to the base point than to every neighbor already kept.
std::vector<std::uint32_t> HnswIndex::select_neighbors(std::vector<Candidate> candidates,
                                                       std::size_t max_count) const {
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.similarity > b.similarity || (a.similarity == b.similarity && a.node < b.node);
  });
  std::vector<std::uint32_t> kept;
  kept.reserve(max_count);
  for (const Candidate& c : candidates) {
    if (kept.size() >= max_count) break;
    bool diverse = true;
    for (std::uint32_t r : kept) {
      if (similarity(vector(c.node), r) > c.similarity) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(c.node);
  }
  return kept;
}

void HnswIndex::insert(std::uint32_t node, int node_level) {
  links_[node].assign(static_cast<std::size_t>(node_level) + 1, {});
  if (node == 0) {
    entry_point_ = node;
    max_level_ = node_level;
    return;
  }
  const auto q = vector(node);
  std::uint32_t ep = entry_point_;
  for (int layer = max_level_; layer > node_level; --layer) {
    ep = search_layer(q, ep, 1, layer).front().node;
  }
  for (int layer = std::min(node_level, max_level_); layer >= 0; --layer) {
    auto found = search_layer(q, ep, params_.ef_construction, layer);
    ep = found.front().node;
    auto selected = select_neighbors(found, params_.m);
    const std::size_t cap = layer == 0 ? 2 * params_.m : params_.m;
    for (std::uint32_t nb : selected) {
      auto& nb_links = links_[nb][static_cast<std::size_t>(layer)];
      nb_links.push_back(node);
      if (nb_links.size() > cap) {
        std::vector<Candidate> pool;
        pool.reserve(nb_links.size());
        for (std::uint32_t other : nb_links) pool.push_back({similarity(vector(nb), other), other});
        nb_links = select_neighbors(std::move(pool), cap);
      }
    }
    links_[node][static_cast<std::size_t>(layer)] = std::move(selected);
  }
  if (node_level > max_level_) {
    max_level_ = node_level;
    entry_point_ = node;
  }
}

HnswIndex HnswIndex::build(const EmbeddingMatrix& matrix, const HnswParams& params,
                           std::uint64_t seed) {
  if (matrix.empty()) throw ValidationError("cannot build an index over an empty matrix");
  if (matrix.dim() == 0) throw ValidationError("cannot build an index with dim 0");
  if (params.m < 2) throw ValidationError("HNSW parameter M must be at least 2");
  if (params.ef_construction < params.m) {
    throw ValidationError("HNSW ef_construction must be at least M");
  }
  if (matrix.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw ValidationError("index supports at most 2^32-1 vectors");
  }

  HnswIndex index;
  index.dim_ = matrix.dim();
  index.params_ = params;
  index.ids_ = matrix.ids();
  index.vectors_ = matrix.data();
  index.links_.resize(matrix.size());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double level_mult = 1.0 / std::log(static_cast<double>(params.m));
  for (std::uint32_t node = 0; node < matrix.size(); ++node) {
    const double u = 1.0 - uniform(rng);  // (0, 1]
    const int level = static_cast<int>(std::floor(-std::log(u) * level_mult));
    index.insert(node, level);
  }
  return index;
}

std::vector<Neighbor> HnswIndex::query(std::span<const float> v, std::size_t k,
                                       std::size_t ef_search) const {
  if (v.size() != dim_) {
    throw ValidationError("query has dim " + std::to_string(v.size()) + ", index has dim " +
                          std::to_string(dim_));
  }
  if (k == 0 || ids_.empty()) return {};
  const std::size_t ef = std::max(ef_search, k);
  std::uint32_t ep = entry_point_;
  for (int layer = max_level_; layer > 0; --layer) {
    ep = search_layer(v, ep, 1, layer).front().node;
  }
  auto found = search_layer(v, ep, ef, 0);
  std::vector<Neighbor> hits;
  hits.reserve(found.size());
  for (const auto& c : found) hits.push_back({ids_[c.node], c.similarity});
  sort_neighbors(hits);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

void HnswIndex::validate() const {
  const std::size_t n = ids_.size();
  if (n == 0) throw Error("index is empty");
  if (level(entry_point_) != max_level_) throw Error("entry point is not on the top level");
  for (std::uint32_t node = 0; node < n; ++node) {
    if (links_[node].empty()) throw Error("node " + ids_[node] + " has no layers");
    if (level(node) > max_level_) throw Error("node " + ids_[node] + " above max level");
    for (int layer = 0; layer <= level(node); ++layer) {
      const auto& nbs = neighbors(node, layer);
      const std::size_t cap = layer == 0 ? 2 * params_.m : params_.m;
      if (nbs.size() > cap) {
        throw Error("node " + ids_[node] + " exceeds degree bound on layer " + std::to_string(layer));
      }
      std::vector<std::uint32_t> sorted = nbs;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
        throw Error("node " + ids_[node] + " has duplicate edges on layer " + std::to_string(layer));
      }
      for (std::uint32_t nb : nbs) {
        if (nb >= n) throw Error("dangling neighbor id on node " + ids_[node]);
        if (nb == node) throw Error("self loop on node " + ids_[node]);
        if (level(nb) < layer) {
          throw Error("edge from " + ids_[node] + " to a node absent from layer " +
                      std::to_string(layer));
        }
      }
    }
  }
}

void HnswIndex::save(const std::filesystem::path& path) const {
  using detail::write_le;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out.write(kIndexMagic, sizeof kIndexMagic);
  write_le<std::uint32_t>(out, kIndexVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  write_le<std::uint64_t>(out, ids_.size());
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params_.m));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params_.ef_construction));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params_.ef_search));
  write_le<std::uint32_t>(out, entry_point_);
  write_le<std::int32_t>(out, max_level_);
  for (std::uint32_t node = 0; node < ids_.size(); ++node) {
    detail::write_short_string(out, ids_[node]);
    for (float x : vector(node)) write_le<float>(out, x);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(links_[node].size()));
    for (const auto& layer : links_[node]) {
      write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layer.size()));
      for (std::uint32_t nb : layer) write_le<std::uint32_t>(out, nb);
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

HnswIndex HnswIndex::load(const std::filesystem::path& path) {
  using detail::read_le;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open index file " + path.string());
  char magic[8] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kIndexMagic, sizeof magic) != 0) {
    throw ValidationError(path.string() + " is not an ALERHNSW index file");
  }
  const auto version = read_le<std::uint32_t>(in, "version");
  if (version != kIndexVersion) {
    throw ValidationError(path.string() + ": unsupported index version " + std::to_string(version));
  }
  HnswIndex index;
  index.dim_ = read_le<std::uint32_t>(in, "dim");
  const auto count = read_le<std::uint64_t>(in, "count");
  index.params_.m = read_le<std::uint32_t>(in, "M");
  index.params_.ef_construction = read_le<std::uint32_t>(in, "ef_construction");
  index.params_.ef_search = read_le<std::uint32_t>(in, "ef_search");
  index.entry_point_ = read_le<std::uint32_t>(in, "entry point");
  index.max_level_ = read_le<std::int32_t>(in, "max level");
  if (index.dim_ == 0 || count == 0) throw ValidationError(path.string() + ": empty index");
  index.ids_.reserve(count);
  index.vectors_.reserve(count * index.dim_);
  index.links_.resize(count);
  for (std::uint64_t node = 0; node < count; ++node) {
    index.ids_.push_back(detail::read_short_string(in));
    for (std::size_t j = 0; j < index.dim_; ++j) index.vectors_.push_back(read_le<float>(in, "vector"));
    const auto layers = read_le<std::uint32_t>(in, "layer count");
    index.links_[node].resize(layers);
    for (auto& layer : index.links_[node]) {
      const auto degree = read_le<std::uint32_t>(in, "degree");
      layer.resize(degree);
      for (auto& nb : layer) nb = read_le<std::uint32_t>(in, "neighbor");
    }
  }
  index.validate();
  return index;
}

std::vector<Neighbor> brute_force_knn(const EmbeddingMatrix& matrix, std::span<const float> v,
                                      std::size_t k) {
  if (v.size() != matrix.dim()) {
    throw ValidationError("query has dim " + std::to_string(v.size()) + ", matrix has dim " +
                          std::to_string(matrix.dim()));
  }
  std::vector<Neighbor> hits;
  hits.reserve(matrix.size());
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    hits.push_back({matrix.id(i), dot(v.data(), matrix.row(i).data(), matrix.dim())});
  }
  const std::size_t keep = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.id < b.id;
                    });
  hits.resize(keep);
  return hits;
}

}  // namespace aler
