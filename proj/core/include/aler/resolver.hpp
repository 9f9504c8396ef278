#pragma once

// Two-stage resolution of held-out records and evaluation.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "aler/ann_index.hpp"
#include "aler/features.hpp"
#include "aler/ingest.hpp"
#include "aler/mlp.hpp"

namespace aler {

using IdSet = std::unordered_set<std::string>;

/// Top-k index neighbors of every query row whose id is not excluded, in
/// query row order then neighbor rank.
std::vector<CandidatePair> generate_candidates(const HnswIndex& index,
                                               const EmbeddingMatrix& queries, std::size_t k,
                                               const IdSet& exclusion, std::size_t ef_search = 0);

struct Match {
  CandidatePair pair;
  double stage1_prob = 0.0;
  double stage2_prob = 0.0;
};

struct Resolution {
  std::vector<Match> matches;  // stage-2 probability descending, then pair
  std::size_t candidates = 0;
  std::size_t stage1_survivors = 0;
  std::size_t lexical_computations = 0;
};

/// Stage 1 keeps candidates with recall-model probability > recall_threshold;
/// stage 2 computes lexical features for the survivors only and keeps those
/// with precision-model probability > precision_threshold. Throws
/// ValidationError when a model's input width disagrees with the featurizer.
Resolution resolve(std::span<const CandidatePair> candidates, const MlpModel& recall_model,
                   double recall_threshold, const MlpModel& precision_model,
                   double precision_threshold, const PairFeaturizer& featurizer,
                   std::size_t batch_size = 4096);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double blocking_recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t candidates = 0;
  std::size_t predicted = 0;
};

/// 2PR/(P+R), or 0 when P + R = 0.
double f1_score(double precision, double recall);

/// Scores predictions against the truth pairs whose query record is not
/// excluded. Precision is 0 when nothing is predicted. Throws
/// ValidationError when no truth pair survives the exclusion.
Metrics evaluate(std::span<const CandidatePair> predicted, const MatchSet& truth,
                 std::span<const CandidatePair> candidates, const IdSet& exclusion);

/// `r_id,s_id,stage1_prob,stage2_prob`.
void save_matches(std::span<const Match> matches, const std::filesystem::path& path,
                  const std::vector<std::string>& header_comment = {});
std::vector<Match> load_matches(const std::filesystem::path& path);

/// `key = value` lines.
void save_metrics_text(const Metrics& metrics, const std::filesystem::path& path,
                       const std::vector<std::string>& header_comment = {});
Metrics load_metrics_text(const std::filesystem::path& path);
void save_metrics_json(const Metrics& metrics, const std::filesystem::path& path);

}  // namespace aler
