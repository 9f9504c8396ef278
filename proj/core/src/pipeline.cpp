#include "aler/pipeline.hpp"

#include "aler/features.hpp"
#include "aler/kv_text.hpp"

namespace aler {

namespace fs = std::filesystem;

ArtifactPaths::ArtifactPaths(fs::path d)
    : dir(std::move(d)),
      embeddings_r(dir / "emb_R.bin"),
      embeddings_s(dir / "emb_S.bin"),
      index(dir / "index.hnsw"),
      chunks(dir / "chunks.csv"),
      recall_model(dir / "model_R.mlp"),
      precision_model(dir / "model_P.mlp"),
      thresholds(dir / "thresholds.txt"),
      ledger(dir / "ledger.csv"),
      ledger_detail(dir / "ledger_iterations.csv"),
      f1_history(dir / "f1_history.csv"),
      labeled(dir / "labeled.csv"),
      matches(dir / "matches.csv"),
      metrics_text(dir / "metrics.txt"),
      metrics_json(dir / "metrics.json") {}

fs::path ArtifactPaths::provenance(Stage stage) const {
  return dir / (to_string(stage) + ".provenance");
}

std::vector<std::string> provenance_header(const RunManifest& manifest, Stage stage) {
  return {"aler " + to_string(stage), "config_hash=" + manifest.config_hash(),
          "seed=" + std::to_string(manifest.seed.value_or(0))};
}

StageSeeds StageSeeds::from(std::uint64_t seed) {
  return {mix_seed(seed, 1), mix_seed(seed, 2), mix_seed(seed, 3), mix_seed(seed, 4)};
}

namespace {

void write_provenance(const RunManifest& manifest, Stage stage, const ArtifactPaths& paths) {
  write_key_values({{"stage", to_string(stage)},
                    {"config_hash", manifest.config_hash()},
                    {"seed", std::to_string(manifest.seed.value_or(0))}},
                   paths.provenance(stage));
}

ArtifactPaths prepare(const RunManifest& manifest, Stage stage) {
  manifest.validate(stage);
  ArtifactPaths paths(manifest.artifact_dir());
  fs::create_directories(paths.dir);
  return paths;
}

void require_artifact(const fs::path& path, const char* producer) {
  if (!fs::is_regular_file(path)) {
    throw ValidationError("missing artifact " + path.string() + "; run `aler " + producer +
                          "` first");
  }
}

RecordCollection load_side(const RunManifest& m, const std::string& path) {
  return load_records(m.resolve(path), m.id_column, m.delimiter);
}

ChunkSet partition(const EmbeddingMatrix& embeddings_r, double g_s, std::size_t chunks,
                   std::size_t max_iters, const StageSeeds& seeds) {
  const auto plan = sample_records(embeddings_r.ids(), g_s, seeds.sample);
  const std::size_t n = chunks == 0 ? chunk_count(plan.sampled_ids.size()) : chunks;
  if (n > plan.sampled_ids.size()) {
    throw ValidationError("chunks: " + std::to_string(n) + " exceeds the sample size " +
                          std::to_string(plan.sampled_ids.size()));
  }
  return kmeans_partition(embeddings_r.subset(plan.sampled_ids), n, seeds.kmeans, max_iters);
}

IdSet load_exclusion(const ArtifactPaths& paths) {
  require_artifact(paths.labeled, "train");
  const auto [training, validation] = load_labeled(paths.labeled);
  return exclusion_set(training, validation);
}

}  // namespace

void run_ingest(const RunManifest& manifest) {
  const auto paths = prepare(manifest, Stage::ingest);
  const auto records_r = load_side(manifest, manifest.records_r);
  const auto records_s = load_side(manifest, manifest.records_s);

  EmbeddingMatrix er;
  EmbeddingMatrix es;
  if (!manifest.encoder_endpoint.empty()) {
    FetchOptions options;
    options.batch_size = manifest.encoder_batch_size;
    er = fetch_embeddings(manifest.encoder_endpoint, records_r, options);
    es = fetch_embeddings(manifest.encoder_endpoint, records_s, options);
  } else {
    er = load_embeddings(manifest.resolve(manifest.embeddings_r));
    es = load_embeddings(manifest.resolve(manifest.embeddings_s));
  }
  if (er.dim() != es.dim()) {
    throw ValidationError("embeddings_s: dim " + std::to_string(es.dim()) +
                          " differs from embeddings_r dim " + std::to_string(er.dim()));
  }
  check_coverage(er, records_r);
  check_coverage(es, records_s);
  const auto ids_r = records_r.ids();
  const auto ids_s = records_s.ids();
  save_embeddings(er.subset(ids_r), paths.embeddings_r);
  save_embeddings(es.subset(ids_s), paths.embeddings_s);
  write_provenance(manifest, Stage::ingest, paths);
}

void run_index(const RunManifest& manifest) {
  const auto paths = prepare(manifest, Stage::index);
  require_artifact(paths.embeddings_s, "ingest");
  const auto es = load_embeddings(paths.embeddings_s);
  const auto index = HnswIndex::build(es, manifest.hnsw, StageSeeds::from(*manifest.seed).index);
  index.save(paths.index);
  write_provenance(manifest, Stage::index, paths);
}

void run_partition(const RunManifest& manifest) {
  const auto paths = prepare(manifest, Stage::partition);
  require_artifact(paths.embeddings_r, "ingest");
  const auto er = load_embeddings(paths.embeddings_r);
  const auto chunks = partition(er, manifest.g_s, manifest.chunks, manifest.kmeans_max_iters,
                                StageSeeds::from(*manifest.seed));
  save_chunks(chunks, paths.chunks, provenance_header(manifest, Stage::partition));
}

TrainInputs load_train_inputs(const RunManifest& manifest) {
  manifest.validate(Stage::train);
  const ArtifactPaths paths(manifest.artifact_dir());
  require_artifact(paths.embeddings_r, "ingest");
  require_artifact(paths.embeddings_s, "ingest");
  require_artifact(paths.index, "index");
  require_artifact(paths.chunks, "partition");
  return {load_side(manifest, manifest.records_r), load_side(manifest, manifest.records_s),
          load_embeddings(paths.embeddings_r),      load_embeddings(paths.embeddings_s),
          HnswIndex::load(paths.index),             load_chunks(paths.chunks)};
}

void save_thresholds(const Thresholds& t, const fs::path& path,
                     const std::vector<std::string>& header_comment) {
  write_key_values({{"recall_threshold", format_double(t.recall)},
                    {"precision_threshold", format_double(t.precision)},
                    {"recall_f1", format_double(t.recall_f1)},
                    {"precision_f1", format_double(t.precision_f1)}},
                   path, header_comment);
}

Thresholds load_thresholds(const fs::path& path) {
  const auto kv = read_key_values(path);
  auto get = [&](const char* key) {
    const auto* v = find_value(kv, key);
    if (!v) throw ValidationError(path.string() + ": missing " + key);
    return parse_double(*v, key);
  };
  return {get("recall_threshold"), get("precision_threshold"), get("recall_f1"),
          get("precision_f1")};
}

TrainedArtifacts run_train(const RunManifest& manifest, const TrainInputs& inputs, Oracle& oracle,
                           const IterationCallback& on_iteration) {
  const auto paths = prepare(manifest, Stage::train);
  const auto header = provenance_header(manifest, Stage::train);
  const PairFeaturizer featurizer(inputs.embeddings_r, inputs.embeddings_s, &inputs.records_r,
                                  &inputs.records_s, manifest.key_attrs);
  const auto pools = build_pools(inputs.chunks, inputs.index, inputs.embeddings_r, manifest.loop.k,
                                 manifest.hnsw.ef_search);
  LoopConfig config = manifest.loop;
  config.seed = StageSeeds::from(*manifest.seed).loop;

  TrainedArtifacts art;
  try {
    art = run_active_learning(config, featurizer, pools, oracle, on_iteration);
  } catch (const RunAborted& aborted) {
    save_ledger(aborted.ledger(), paths.ledger, header);
    save_ledger_detail(aborted.ledger(), paths.ledger_detail, header);
    throw;
  }

  save_model(art.recall_model, paths.recall_model);
  save_model(art.precision_model, paths.precision_model);
  save_thresholds({art.recall_threshold, art.precision_threshold, art.recall_f1, art.precision_f1},
                  paths.thresholds, header);
  save_ledger(art.ledger, paths.ledger, header);
  save_ledger_detail(art.ledger, paths.ledger_detail, header);
  save_f1_history(art.history, paths.f1_history, header);
  save_labeled(art.training, art.validation, paths.labeled, header);
  write_provenance(manifest, Stage::train, paths);
  return art;
}

Resolution run_resolve(const RunManifest& manifest) {
  const auto paths = prepare(manifest, Stage::resolve);
  for (const auto& p : {paths.recall_model, paths.precision_model, paths.thresholds}) {
    require_artifact(p, "train");
  }
  require_artifact(paths.index, "index");
  require_artifact(paths.embeddings_r, "ingest");
  require_artifact(paths.embeddings_s, "ingest");

  const auto records_r = load_side(manifest, manifest.records_r);
  const auto records_s = load_side(manifest, manifest.records_s);
  const auto er = load_embeddings(paths.embeddings_r);
  const auto es = load_embeddings(paths.embeddings_s);
  const auto index = HnswIndex::load(paths.index);
  const auto recall_model = load_model(paths.recall_model);
  const auto precision_model = load_model(paths.precision_model);
  const auto thresholds = load_thresholds(paths.thresholds);
  const auto exclusion = load_exclusion(paths);

  const PairFeaturizer featurizer(er, es, &records_r, &records_s, manifest.key_attrs);
  const auto candidates =
      generate_candidates(index, er, manifest.loop.k, exclusion, manifest.hnsw.ef_search);
  auto result = resolve(candidates, recall_model,
                        manifest.recall_threshold.value_or(thresholds.recall), precision_model,
                        manifest.precision_threshold.value_or(thresholds.precision), featurizer);
  save_matches(result.matches, paths.matches, provenance_header(manifest, Stage::resolve));
  return result;
}

Metrics run_eval(const RunManifest& manifest) {
  const auto paths = prepare(manifest, Stage::eval);
  require_artifact(paths.matches, "resolve");
  require_artifact(paths.index, "index");
  require_artifact(paths.embeddings_r, "ingest");
  const auto records_r = load_side(manifest, manifest.records_r);
  const auto records_s = load_side(manifest, manifest.records_s);
  const auto truth = load_match_set(manifest.resolve(manifest.truth), &records_r, &records_s,
                                    manifest.delimiter);
  const auto exclusion = load_exclusion(paths);
  const auto er = load_embeddings(paths.embeddings_r);
  const auto index = HnswIndex::load(paths.index);
  const auto candidates =
      generate_candidates(index, er, manifest.loop.k, exclusion, manifest.hnsw.ef_search);

  std::vector<CandidatePair> predicted;
  for (const auto& m : load_matches(paths.matches)) predicted.push_back(m.pair);
  const auto metrics = evaluate(predicted, truth, candidates, exclusion);
  save_metrics_text(metrics, paths.metrics_text, provenance_header(manifest, Stage::eval));
  save_metrics_json(metrics, paths.metrics_json);
  return metrics;
}

ExperimentResult run_experiment(const RecordCollection& records_r,
                                const RecordCollection& records_s,
                                const EmbeddingMatrix& embeddings_r,
                                const EmbeddingMatrix& embeddings_s, const MatchSet& truth,
                                const ExperimentConfig& config) {
  const auto seeds = StageSeeds::from(config.seed);
  const auto index = HnswIndex::build(embeddings_s, config.hnsw, seeds.index);
  const auto chunks =
      partition(embeddings_r, config.g_s, config.chunks, config.kmeans_max_iters, seeds);
  const PairFeaturizer featurizer(embeddings_r, embeddings_s, &records_r, &records_s,
                                  config.key_attrs);
  const auto pools =
      build_pools(chunks, index, embeddings_r, config.loop.k, config.hnsw.ef_search);

  OracleBudget budget(config.budget_cap);
  GroundTruthOracle oracle(truth, budget);
  LoopConfig loop = config.loop;
  loop.seed = seeds.loop;

  ExperimentResult out;
  out.chunks = chunks.size();
  out.artifacts = run_active_learning(loop, featurizer, pools, oracle);
  out.oracle_consumed = budget.consumed();

  const auto exclusion = exclusion_set(out.artifacts.training, out.artifacts.validation);
  const auto candidates =
      generate_candidates(index, embeddings_r, config.loop.k, exclusion, config.hnsw.ef_search);
  out.resolution = resolve(candidates, out.artifacts.recall_model, out.artifacts.recall_threshold,
                           out.artifacts.precision_model, out.artifacts.precision_threshold,
                           featurizer);
  std::vector<CandidatePair> predicted;
  for (const auto& m : out.resolution.matches) predicted.push_back(m.pair);
  out.metrics = evaluate(predicted, truth, candidates, exclusion);
  return out;
}

}  // namespace aler
