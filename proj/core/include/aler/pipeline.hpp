#pragma once

// Staged pipeline over an artifact directory, plus an in-memory variant for
// experiments.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aler/al_loop.hpp"
#include "aler/ann_index.hpp"
#include "aler/ingest.hpp"
#include "aler/manifest.hpp"
#include "aler/partitioner.hpp"
#include "aler/resolver.hpp"

namespace aler {

struct ArtifactPaths {
  explicit ArtifactPaths(std::filesystem::path dir);

  std::filesystem::path dir;
  std::filesystem::path embeddings_r;     // emb_R.bin
  std::filesystem::path embeddings_s;     // emb_S.bin
  std::filesystem::path index;            // index.hnsw
  std::filesystem::path chunks;           // chunks.csv
  std::filesystem::path recall_model;     // model_R.mlp
  std::filesystem::path precision_model;  // model_P.mlp
  std::filesystem::path thresholds;       // thresholds.txt
  std::filesystem::path ledger;           // ledger.csv
  std::filesystem::path ledger_detail;    // ledger_iterations.csv
  std::filesystem::path f1_history;       // f1_history.csv
  std::filesystem::path labeled;          // labeled.csv
  std::filesystem::path matches;          // matches.csv
  std::filesystem::path metrics_text;     // metrics.txt
  std::filesystem::path metrics_json;     // metrics.json

  /// `<stage>.provenance`: key = value record of the run that wrote a
  /// stage's binary artifacts.
  std::filesystem::path provenance(Stage stage) const;
};

/// Comment lines heading every text artifact: tool, stage, config hash, seed.
std::vector<std::string> provenance_header(const RunManifest& manifest, Stage stage);

/// Seeds derived from the manifest seed, one per randomized step.
struct StageSeeds {
  std::uint64_t index;
  std::uint64_t sample;
  std::uint64_t kmeans;
  std::uint64_t loop;
  static StageSeeds from(std::uint64_t seed);
};

void run_ingest(const RunManifest& manifest);
void run_index(const RunManifest& manifest);
void run_partition(const RunManifest& manifest);

struct TrainInputs {
  RecordCollection records_r;
  RecordCollection records_s;
  EmbeddingMatrix embeddings_r;
  EmbeddingMatrix embeddings_s;
  HnswIndex index;
  ChunkSet chunks;
};

/// Loads records and the artifacts written by ingest, index and partition.
/// Throws ValidationError naming the missing artifact and the command that
/// produces it.
TrainInputs load_train_inputs(const RunManifest& manifest);

/// Runs the training phase and writes models, thresholds, ledger, F1 history
/// and labeled pairs. On RunAborted the ledger is written before rethrowing.
TrainedArtifacts run_train(const RunManifest& manifest, const TrainInputs& inputs, Oracle& oracle,
                           const IterationCallback& on_iteration = {});

struct Thresholds {
  double recall = 0.5;
  double precision = 0.5;
  double recall_f1 = 0.0;
  double precision_f1 = 0.0;
};

void save_thresholds(const Thresholds& thresholds, const std::filesystem::path& path,
                     const std::vector<std::string>& header_comment = {});
Thresholds load_thresholds(const std::filesystem::path& path);

/// Two-stage resolution of every non-excluded R record; writes matches.csv.
/// Manifest threshold overrides replace the trained values.
Resolution run_resolve(const RunManifest& manifest);

/// Scores matches.csv against the truth file; writes metrics.txt and
/// metrics.json.
Metrics run_eval(const RunManifest& manifest);

// ---------------------------------------------------------------------------

struct ExperimentConfig {
  LoopConfig loop;
  HnswParams hnsw;
  double g_s = 0.2;
  std::size_t chunks = 0;  ///< 0 derives the count from the sample size
  std::size_t kmeans_max_iters = 100;
  std::optional<std::size_t> budget_cap;
  std::vector<std::string> key_attrs;
  std::uint64_t seed = 0;
};

struct ExperimentResult {
  TrainedArtifacts artifacts;
  Resolution resolution;
  Metrics metrics;
  std::size_t chunks = 0;
  std::size_t oracle_consumed = 0;
};

/// Index, partition, train with a ground-truth oracle, resolve and evaluate,
/// all in memory. Seeds follow the same derivation as the staged commands.
ExperimentResult run_experiment(const RecordCollection& records_r,
                                const RecordCollection& records_s,
                                const EmbeddingMatrix& embeddings_r,
                                const EmbeddingMatrix& embeddings_s, const MatchSet& truth,
                                const ExperimentConfig& config);

}  // namespace aler
