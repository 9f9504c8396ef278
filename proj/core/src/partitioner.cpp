#include "aler/partitioner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "aler/delimited.hpp"

namespace aler {

SamplePlan sample_records(std::span<const std::string> ids, double proportion, std::uint64_t seed) {
  if (!(proportion > 0.0 && proportion <= 1.0)) {
    throw ValidationError("sample proportion must be in (0, 1], got " + std::to_string(proportion));
  }
  if (ids.empty()) throw ValidationError("cannot sample from an empty id list");
  // The epsilon keeps products such as 0.2 * 1000 from rounding up a whole id.
  const auto target = static_cast<std::size_t>(
      std::ceil(proportion * static_cast<double>(ids.size()) - 1e-9));
  const std::size_t size = std::clamp<std::size_t>(target, 1, ids.size());

  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  SamplePlan plan{proportion, seed, {}};
  plan.sampled_ids.reserve(size);
  for (std::size_t i = 0; i < size; ++i) plan.sampled_ids.push_back(ids[order[i]]);
  return plan;
}

std::size_t chunk_count(std::size_t sample_size) {
  std::size_t n = 0;
  std::size_t power = 1;
  while (power < sample_size) {
    power *= 10;
    ++n;
  }
  return std::max<std::size_t>(n, 1);
}

namespace {

double dot(std::span<const float> a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

void normalize(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > 0.0) {
    for (double& x : v) x /= norm;
  }
}

}  // namespace

ChunkSet kmeans_partition(const EmbeddingMatrix& sample, std::size_t n_chunks, std::uint64_t seed,
                          std::size_t max_iters) {
  const std::size_t n = sample.size();
  const std::size_t dim = sample.dim();
  if (n_chunks == 0) throw ValidationError("chunk count must be positive");
  if (n_chunks > n) {
    throw ValidationError("chunk count " + std::to_string(n_chunks) + " exceeds sample size " +
                          std::to_string(n));
  }
  if (max_iters == 0) throw ValidationError("max_iters must be positive");

  auto row_as_centroid = [&](std::size_t i) {
    auto r = sample.row(i);
    std::vector<double> c(r.begin(), r.end());
    normalize(c);
    return c;
  };

  // k-means++ style seeding with D(x) = 1 - max cosine to chosen centroids.
  std::mt19937_64 rng(seed);
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  {
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    const std::size_t f = first(rng);
    centroids.push_back(row_as_centroid(f));
    chosen[f] = true;
  }
  std::vector<double> best_sim(n, -std::numeric_limits<double>::infinity());
  while (centroids.size() < n_chunks) {
    double total = 0.0;
    std::vector<double> weight(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      best_sim[i] = std::max(best_sim[i], dot(sample.row(i), centroids.back()));
      const double d = chosen[i] ? 0.0 : std::max(0.0, 1.0 - best_sim[i]);
      weight[i] = d * d;
      total += weight[i];
    }
    std::size_t pick = n;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (weight[i] <= 0.0) continue;
        pick = i;
        target -= weight[i];
        if (target <= 0.0) break;
      }
    }
    if (pick == n) {
      // Every remaining point coincides with a centroid; take the first unchosen.
      pick = static_cast<std::size_t>(std::find(chosen.begin(), chosen.end(), false) - chosen.begin());
    }
    chosen[pick] = true;
    centroids.push_back(row_as_centroid(pick));
  }

  std::vector<std::size_t> assign(n, n_chunks);
  ChunkSet out;
  std::vector<double> member_sim(n, 0.0);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_s = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < n_chunks; ++c) {
        const double s = dot(sample.row(i), centroids[c]);
        if (s > best_s) {
          best_s = s;
          best = c;
        }
      }
      // Keep the current assignment on exact ties so the loop can settle.
      if (assign[i] < n_chunks && assign[i] != best &&
          dot(sample.row(i), centroids[assign[i]]) == best_s) {
        best = assign[i];
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
      member_sim[i] = best_s;
    }

    // Repair empty clusters from the largest cluster's least similar member.
    std::vector<std::size_t> counts(n_chunks, 0);
    for (std::size_t a : assign) ++counts[a];
    for (std::size_t c = 0; c < n_chunks; ++c) {
      if (counts[c] != 0) continue;
      const std::size_t largest =
          static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (assign[i] == largest && (far == n || member_sim[i] < member_sim[far])) far = i;
      }
      assign[far] = c;
      --counts[largest];
      ++counts[c];
      centroids[c] = row_as_centroid(far);
      changed = true;
    }

    // Update: normalized mean of members.
    std::vector<std::vector<double>> sums(n_chunks, std::vector<double>(dim, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      auto r = sample.row(i);
      auto& s = sums[assign[i]];
      for (std::size_t j = 0; j < dim; ++j) s[j] += r[j];
    }
    for (std::size_t c = 0; c < n_chunks; ++c) {
      double sq = 0.0;
      for (double x : sums[c]) sq += x * x;
      if (sq > 0.0) {
        normalize(sums[c]);
        centroids[c] = std::move(sums[c]);
      }
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += 1.0 - dot(sample.row(i), centroids[assign[i]]);
    out.inertia_history.push_back(inertia);
    out.iterations = iter + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
  }

  out.chunks.assign(n_chunks, {});
  for (std::size_t i = 0; i < n; ++i) out.chunks[assign[i]].push_back(sample.id(i));
  out.centroids.reserve(n_chunks);
  for (const auto& c : centroids) out.centroids.emplace_back(c.begin(), c.end());
  return out;
}

double partition_inertia(const EmbeddingMatrix& sample, const ChunkSet& chunks) {
  double inertia = 0.0;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    std::vector<double> centroid(sample.dim(), 0.0);
    if (c < chunks.centroids.size() && !chunks.centroids[c].empty()) {
      centroid.assign(chunks.centroids[c].begin(), chunks.centroids[c].end());
    } else {
      for (const auto& id : chunks.chunks[c]) {
        auto r = sample.row(id);
        for (std::size_t j = 0; j < r.size(); ++j) centroid[j] += r[j];
      }
      normalize(centroid);
    }
    for (const auto& id : chunks.chunks[c]) inertia += 1.0 - dot(sample.row(id), centroid);
  }
  return inertia;
}

void save_chunks(const ChunkSet& chunks, const std::filesystem::path& path,
                 const std::vector<std::string>& header_comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& line : header_comment) out << "# " << line << '\n';
  write_delimited_row(out, {"record_id", "chunk"});
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    for (const auto& id : chunks.chunks[c]) write_delimited_row(out, {id, std::to_string(c + 1)});
  }
}

ChunkSet load_chunks(const std::filesystem::path& path) {
  auto rows = read_delimited(path);
  std::map<std::size_t, std::vector<std::string>> by_chunk;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != 2) {
      throw ValidationError(path.string() + ": row " + std::to_string(rows[i].line) +
                            " must be record_id,chunk");
    }
    std::size_t chunk = 0;
    try {
      chunk = std::stoul(f[1]);
    } catch (const std::exception&) {
      chunk = 0;
    }
    if (chunk == 0) {
      throw ValidationError(path.string() + ": row " + std::to_string(rows[i].line) +
                            ": chunk must be a positive integer");
    }
    by_chunk[chunk].push_back(f[0]);
  }
  ChunkSet out;
  std::size_t expected = 1;
  for (auto& [chunk, ids] : by_chunk) {
    if (chunk != expected++) throw ValidationError(path.string() + ": chunk numbers are not contiguous");
    out.chunks.push_back(std::move(ids));
  }
  out.converged = true;
  return out;
}

}  // namespace aler
