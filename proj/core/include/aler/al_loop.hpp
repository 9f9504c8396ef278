#pragma once

// Partitioned active-learning orchestration: candidate pools per chunk, a
// fixed validation set, seed labels, per-chunk mini loops with patience-based
// early stopping, and final training of the recall and precision classifiers.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aler/ann_index.hpp"
#include "aler/features.hpp"
#include "aler/mlp.hpp"
#include "aler/oracle.hpp"
#include "aler/partitioner.hpp"
#include "aler/types.hpp"

namespace aler {

enum class SelectionStrategy { hybrid, uncertainty, random };

std::string to_string(SelectionStrategy strategy);
/// Accepts "hybrid", "uncertainty" or "random".
SelectionStrategy parse_strategy(const std::string& text);

struct LoopConfig {
  std::size_t b_seed = 100;
  std::size_t b = 300;
  std::size_t i_max = 8;
  std::size_t patience = 2;
  double min_delta = 0.05;
  double g_v = 0.1;
  std::size_t validation_cap = 1000;
  std::size_t k = 10;
  double confident_fraction = 0.5;
  std::uint64_t seed = 0;
  SelectionStrategy strategy = SelectionStrategy::hybrid;
  TrainConfig train;

  /// Throws ValidationError naming the offending field. i_max may be zero.
  void validate() const;
};

struct CandidatePool {
  std::size_t chunk = 0;  // 1-based
  std::vector<CandidatePair> pairs;
};

/// One pool per chunk: the top-k neighbors in the index of every chunk
/// member. Pairs keep query order, then neighbor rank.
std::vector<CandidatePool> build_pools(const ChunkSet& chunks, const HnswIndex& index,
                                       const EmbeddingMatrix& embeddings_r, std::size_t k,
                                       std::size_t ef_search = 0);

/// Per-pool validation draw: ceil(g_v * size) each, scaled down
/// proportionally (largest remainder) when the total exceeds `cap`.
std::vector<std::size_t> validation_allocation(std::span<const std::size_t> pool_sizes, double g_v,
                                               std::size_t cap);

struct LabeledEntry {
  CandidatePair pair;
  int label = 0;
  Provenance provenance;
};

/// Labeled pairs in insertion order. A pair can be added only once.
class LabeledSet {
 public:
  void add(CandidatePair pair, int label, Provenance provenance);

  bool contains(const CandidatePair& pair) const { return index_.contains(pair); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t positives() const { return positives_; }
  const std::vector<LabeledEntry>& entries() const { return entries_; }

  std::vector<CandidatePair> pairs() const;
  std::vector<int> labels() const;

  /// Order-sensitive FNV-1a over pairs and labels.
  std::uint64_t content_hash() const;

 private:
  std::vector<LabeledEntry> entries_;
  PairSet index_;
  std::size_t positives_ = 0;
};

/// Oracle answers attributed to their purpose.
class BudgetLedger {
 public:
  void record(const Provenance& provenance, std::size_t count);

  std::size_t seed() const { return seed_; }
  std::size_t validation() const { return validation_; }
  std::size_t loop() const;
  std::size_t total() const { return seed_ + validation_ + loop(); }
  const std::map<std::pair<std::size_t, std::size_t>, std::size_t>& loop_counts() const {
    return loop_;
  }

  std::size_t chunks = 0;
  bool truncated = false;
  std::optional<std::size_t> hard_cap;

 private:
  std::size_t seed_ = 0;
  std::size_t validation_ = 0;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> loop_;
};

/// Summary table `N,B_seed,|V|,Loop,Total,truncated`, preceded by '#'
/// comment lines.
void save_ledger(const BudgetLedger& ledger, const std::filesystem::path& path,
                 const std::vector<std::string>& header_comment = {});
/// Per-iteration attribution `chunk,iteration,queries`.
void save_ledger_detail(const BudgetLedger& ledger, const std::filesystem::path& path,
                        const std::vector<std::string>& header_comment = {});
BudgetLedger load_ledger(const std::filesystem::path& summary,
                         const std::filesystem::path& detail);

/// Picks up to `b` pairs not in `already_labeled`.
///   hybrid: ceil(confident_fraction * b) highest-probability pairs, the rest
///           filled with the pairs closest to 0.5 not already taken;
///   uncertainty: the b pairs closest to 0.5;
///   random: a uniform sample drawn with `rng`.
/// Probability ties are broken by ascending pair. When at most `b` eligible
/// pairs remain, all of them are returned.
std::vector<CandidatePair> select_pairs(std::span<const ScoredPair> scored, std::size_t b,
                                        double confident_fraction, const PairSet& already_labeled,
                                        SelectionStrategy strategy, std::mt19937_64& rng);

/// True iff each of the last `patience` entries improved on the best value
/// before it by less than `min_delta`. Needs more than `patience` entries.
bool early_stop(std::span<const double> f1_history, std::size_t patience, double min_delta);

/// Validation F1 of `probs` at its best threshold. With no positive label the
/// F1 is 0 and the threshold 0.5.
ThresholdResult validation_score(std::span<const double> probs, std::span<const int> labels);

struct IterationRecord {
  std::size_t chunk = 0;
  std::size_t iteration = 0;
  double f1 = 0.0;
  double threshold = 0.5;
  std::size_t training_size = 0;
  std::size_t queried = 0;
  bool stopped = false;
};

void save_f1_history(std::span<const IterationRecord> history, const std::filesystem::path& path,
                     const std::vector<std::string>& header_comment = {});
std::vector<IterationRecord> load_f1_history(const std::filesystem::path& path);

struct TrainedArtifacts {
  MlpModel recall_model;
  double recall_threshold = 0.5;
  double recall_f1 = 0.0;
  MlpModel precision_model;
  double precision_threshold = 0.5;
  double precision_f1 = 0.0;
  BudgetLedger ledger;
  std::vector<IterationRecord> history;
  LabeledSet training;
  LabeledSet validation;
  std::uint64_t validation_hash = 0;
};

/// Raised when the run cannot produce artifacts (the validation set could
/// not be completed). Carries the ledger of labels spent so far.
class RunAborted : public BudgetExhausted {
 public:
  RunAborted(const std::string& what, BudgetLedger ledger)
      : BudgetExhausted(what), ledger_(std::move(ledger)) {}
  const BudgetLedger& ledger() const { return ledger_; }

 private:
  BudgetLedger ledger_;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Runs the whole training phase. Pools must be non-empty and ordered by
/// chunk. Budget exhaustion after the validation set is complete ends the
/// run early with ledger.truncated set; exhaustion while building the
/// validation set throws RunAborted. Throws SingleClassError when the seed
/// set holds one class only.
TrainedArtifacts run_active_learning(const LoopConfig& config, const PairFeaturizer& featurizer,
                                     std::span<const CandidatePool> pools, Oracle& oracle,
                                     const IterationCallback& on_iteration = {});

/// Records on the query side of any labeled pair.
std::unordered_set<std::string> exclusion_set(const LabeledSet& training,
                                              const LabeledSet& validation);

/// `r_id,s_id,label,provenance` for both sets (training first).
void save_labeled(const LabeledSet& training, const LabeledSet& validation,
                  const std::filesystem::path& path,
                  const std::vector<std::string>& header_comment = {});
/// Splits by provenance: validation entries go to the second set.
std::pair<LabeledSet, LabeledSet> load_labeled(const std::filesystem::path& path);

}  // namespace aler
