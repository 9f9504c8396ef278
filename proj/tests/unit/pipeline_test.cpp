#include <gtest/gtest.h>

#include "aler/pipeline.hpp"
#include "aler/synthetic.hpp"
#include "test_support.hpp"

namespace aler {
namespace {

RunManifest corpus_manifest(const testing::TempDir& dir, std::size_t n) {
  PerturbationSpec spec;
  spec.seed = 2;
  write_corpus(generate(n, spec), dir.path());
  RunManifest m;
  m.base_dir = dir.path();
  m.records_r = "records_r.csv";
  m.records_s = "records_s.csv";
  m.embeddings_r = "emb_r.txt";
  m.embeddings_s = "emb_s.txt";
  m.truth = "truth.csv";
  m.key_attrs = {"title", "code"};
  m.output_dir = "art";
  m.seed = 5;
  m.loop.b_seed = 50;
  m.loop.b = 40;
  m.loop.i_max = 2;
  m.loop.validation_cap = 120;
  m.loop.train.max_epochs = 5;
  return m;
}

TEST(StageSeeds, DistinctAndDeterministic) {
  const auto a = StageSeeds::from(5), b = StageSeeds::from(5), c = StageSeeds::from(6);
  EXPECT_EQ(a.loop, b.loop);
  EXPECT_NE(a.loop, c.loop);
  EXPECT_NE(a.index, a.sample);
  EXPECT_NE(a.kmeans, a.loop);
}

TEST(Pipeline, StagedRunWritesEveryArtifact) {
  testing::TempDir dir;
  const auto m = corpus_manifest(dir, 400);
  const ArtifactPaths paths(m.artifact_dir());
  run_ingest(m);
  EXPECT_THROW(load_train_inputs(m), ValidationError);
  run_index(m);
  run_partition(m);
  const auto inputs = load_train_inputs(m);
  EXPECT_EQ(inputs.chunks.chunks.size(), 2u);  // sample of 80

  const auto truth = load_match_set(m.resolve(m.truth), nullptr, nullptr);
  OracleBudget budget;
  GroundTruthOracle oracle(truth, budget);
  const auto art = run_train(m, inputs, oracle);
  EXPECT_EQ(art.ledger.total(), budget.consumed());
  const auto res = run_resolve(m);
  const auto metrics = run_eval(m);

  for (const auto& p : {paths.embeddings_r, paths.embeddings_s, paths.index, paths.chunks, paths.recall_model,
                        paths.precision_model, paths.thresholds, paths.ledger, paths.ledger_detail,
                        paths.f1_history, paths.labeled, paths.matches, paths.metrics_text,
                        paths.metrics_json, paths.provenance(Stage::index)}) {
    EXPECT_TRUE(std::filesystem::exists(p)) << p;
  }
  const auto ledger_text = testing::read_file(paths.ledger);
  EXPECT_NE(ledger_text.find(m.config_hash()), std::string::npos);
  EXPECT_EQ(load_matches(paths.matches).size(), res.matches.size());
  EXPECT_EQ(load_metrics_text(paths.metrics_text).f1, metrics.f1);
  EXPECT_GT(metrics.f1, 0.5);
  EXPECT_GE(metrics.blocking_recall, 0.9);

  const auto th = load_thresholds(paths.thresholds);
  EXPECT_EQ(th.recall, art.recall_threshold);
  EXPECT_EQ(th.precision, art.precision_threshold);
  const auto [g, v] = load_labeled(paths.labeled);
  EXPECT_EQ(g.content_hash(), art.training.content_hash());
  EXPECT_EQ(v.content_hash(), art.validation_hash);
}

TEST(Pipeline, ThresholdOverrideOfOneYieldsNoMatches) {
  testing::TempDir dir;
  auto m = corpus_manifest(dir, 200);
  run_ingest(m);
  run_index(m);
  run_partition(m);
  const auto inputs = load_train_inputs(m);
  const auto truth = load_match_set(m.resolve(m.truth), nullptr, nullptr);
  OracleBudget budget;
  GroundTruthOracle oracle(truth, budget);
  run_train(m, inputs, oracle);
  m.set("precision_threshold", "1.0");
  const auto res = run_resolve(m);
  EXPECT_TRUE(res.matches.empty());
  EXPECT_EQ(run_eval(m).f1, 0.0);
}

TEST(Pipeline, StagedAndInMemoryRunsAgree) {
  testing::TempDir dir;
  const auto m = corpus_manifest(dir, 300);
  run_ingest(m);
  run_index(m);
  run_partition(m);
  const auto inputs = load_train_inputs(m);
  const auto truth = load_match_set(m.resolve(m.truth), nullptr, nullptr);
  OracleBudget budget;
  GroundTruthOracle oracle(truth, budget);
  run_train(m, inputs, oracle);
  run_resolve(m);
  const auto staged = run_eval(m);

  ExperimentConfig cfg;
  cfg.loop = m.loop;
  cfg.hnsw = m.hnsw;
  cfg.g_s = m.g_s;
  cfg.key_attrs = m.key_attrs;
  cfg.seed = *m.seed;
  const auto mem = run_experiment(inputs.records_r, inputs.records_s, inputs.embeddings_r, inputs.embeddings_s,
                                  truth, cfg);
  EXPECT_EQ(mem.oracle_consumed, budget.consumed());
  EXPECT_EQ(mem.metrics.f1, staged.f1);
  EXPECT_EQ(mem.metrics.true_positives, staged.true_positives);
}

TEST(Pipeline, AbortedRunStillWritesLedger) {
  testing::TempDir dir;
  auto m = corpus_manifest(dir, 200);
  m.budget_cap = 10;
  run_ingest(m);
  run_index(m);
  run_partition(m);
  const auto inputs = load_train_inputs(m);
  const auto truth = load_match_set(m.resolve(m.truth), nullptr, nullptr);
  OracleBudget budget(m.budget_cap);
  GroundTruthOracle oracle(truth, budget);
  EXPECT_THROW(run_train(m, inputs, oracle), RunAborted);
  const ArtifactPaths paths(m.artifact_dir());
  EXPECT_NE(testing::read_file(paths.ledger).find(",10,0,10,1"), std::string::npos);
}

}  // namespace
}  // namespace aler
