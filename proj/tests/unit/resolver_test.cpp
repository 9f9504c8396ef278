#include <algorithm>
#include <map>
#include <random>

#include <gtest/gtest.h>

#include "aler/resolver.hpp"
#include "test_support.hpp"

namespace aler {
namespace {

struct Fixture {
  EmbeddingMatrix r = testing::random_unit_vectors(40, 8, 1, "r");
  EmbeddingMatrix s = testing::random_unit_vectors(200, 8, 2, "s");
  HnswIndex index = HnswIndex::build(s, {}, 3);
  PairFeaturizer featurizer{r, s};
  std::vector<CandidatePair> candidates = generate_candidates(index, r, 10, {});
};

TEST(Candidates, ExclusionRemovesQueryRecords) {
  Fixture f;
  EXPECT_EQ(f.candidates.size(), 400u);
  const auto kept = generate_candidates(f.index, f.r, 10, {"r0", "r5"});
  EXPECT_EQ(kept.size(), 380u);
  for (const auto& p : kept) EXPECT_TRUE(p.r_id != "r0" && p.r_id != "r5");
  EXPECT_EQ(kept.front().r_id, "r1");
}

TEST(Resolve, UnitRecallThresholdSkipsAllLexicalWork) {
  Fixture f;
  const auto mr = MlpModel::constant(f.featurizer.interaction_dim(), 30.0);
  const auto mp = MlpModel::constant(f.featurizer.lexical_dim(), 30.0);
  const auto res = resolve(f.candidates, mr, 1.0, mp, 0.5, f.featurizer);
  EXPECT_EQ(res.candidates, 400u);
  EXPECT_EQ(res.stage1_survivors, 0u);
  EXPECT_EQ(res.lexical_computations, 0u);
  EXPECT_EQ(f.featurizer.lexical_count(), 0u);
  EXPECT_TRUE(res.matches.empty());
}

TEST(Resolve, ZeroThresholdsKeepEveryCandidate) {
  Fixture f;
  const auto mr = MlpModel::constant(f.featurizer.interaction_dim(), -30.0);
  const auto mp = MlpModel::constant(f.featurizer.lexical_dim(), -30.0);
  const auto res = resolve(f.candidates, mr, 0.0, mp, 0.0, f.featurizer, 64);
  EXPECT_EQ(res.stage1_survivors, 400u);
  EXPECT_EQ(res.lexical_computations, 400u);
  EXPECT_EQ(res.matches.size(), 400u);
}

TEST(Resolve, MatchesSortedByStageTwoThenPair) {
  Fixture f;
  const auto mr = MlpModel::initialize(f.featurizer.interaction_dim(), 0.0, 4);
  const auto mp = MlpModel::initialize(f.featurizer.lexical_dim(), 0.0, 5);
  const auto res = resolve(f.candidates, mr, 0.0, mp, 0.0, f.featurizer, 7);
  ASSERT_EQ(res.matches.size(), 400u);
  EXPECT_TRUE(std::is_sorted(res.matches.begin(), res.matches.end(), [](const Match& a, const Match& b) {
    return a.stage2_prob != b.stage2_prob ? a.stage2_prob > b.stage2_prob : a.pair < b.pair;
  }));
  // Batch size changes the product blocking, so only the last bits may move.
  const auto again = resolve(f.candidates, mr, 0.0, mp, 0.0, f.featurizer);
  std::map<CandidatePair, double> by_pair;
  for (const auto& m : again.matches) by_pair[m.pair] = m.stage2_prob;
  ASSERT_EQ(by_pair.size(), res.matches.size());
  for (const auto& m : res.matches) EXPECT_NEAR(by_pair.at(m.pair), m.stage2_prob, 1e-12);
}

TEST(Resolve, StrictThresholdComparison) {
  Fixture f;
  const auto mr = MlpModel::constant(f.featurizer.interaction_dim(), 0.0);
  const auto mp = MlpModel::constant(f.featurizer.lexical_dim(), 0.0);
  EXPECT_EQ(resolve(f.candidates, mr, 0.5, mp, 0.0, f.featurizer).stage1_survivors, 0u);
  EXPECT_EQ(resolve(f.candidates, mr, 0.4999, mp, 0.5, f.featurizer).matches.size(), 0u);
}

TEST(Resolve, ModelWidthMismatchIsRejected) {
  Fixture f;
  const auto mr = MlpModel::constant(f.featurizer.interaction_dim(), 0.0);
  const auto wide = MlpModel::constant(f.featurizer.lexical_dim() + 1, 0.0);
  EXPECT_THROW(resolve(f.candidates, mr, 0.5, wide, 0.5, f.featurizer), ValidationError);
  EXPECT_THROW(resolve(f.candidates, wide, 0.5, mr, 0.5, f.featurizer), ValidationError);
}

TEST(Evaluate, FScoreExample) {
  EXPECT_NEAR(f1_score(0.915, 0.682), 0.78150, 5e-6);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
}

MatchSet truth_of(std::initializer_list<CandidatePair> pairs) {
  MatchSet t;
  for (const auto& p : pairs) t.add(p);
  return t;
}

TEST(Evaluate, PerfectPredictionScoresOne) {
  const auto truth = truth_of({{"r1", "s1"}, {"r2", "s2"}, {"r3", "s3"}});
  const auto m = evaluate(truth.pairs(), truth, truth.pairs(), {});
  EXPECT_EQ(m.precision, 1.0);
  EXPECT_EQ(m.recall, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(m.blocking_recall, 1.0);
}

TEST(Evaluate, EmptyPredictionScoresZero) {
  const auto truth = truth_of({{"r1", "s1"}});
  const auto m = evaluate({}, truth, {}, {});
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.blocking_recall, 0.0);
}

TEST(Evaluate, CountsAgainstHandTally) {
  const auto truth = truth_of({{"r1", "s1"}, {"r2", "s2"}, {"r3", "s3"}, {"r4", "s4"}, {"r5", "s5"}});
  const std::vector<CandidatePair> predicted = {{"r1", "s1"}, {"r2", "s2"}, {"r2", "s9"}, {"r2", "s2"}};
  const std::vector<CandidatePair> candidates = {{"r1", "s1"}, {"r2", "s2"}, {"r2", "s9"}, {"r3", "s3"}};
  // r5 is excluded: 4 truth pairs remain, 2 found, 3 distinct predictions.
  const auto m = evaluate(predicted, truth, candidates, {"r5"});
  EXPECT_EQ(m.true_positives, 2u);
  EXPECT_EQ(m.false_positives, 1u);
  EXPECT_EQ(m.false_negatives, 2u);
  EXPECT_DOUBLE_EQ(m.precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.recall, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 2 * (2.0 / 3.0) * 0.5 / (2.0 / 3.0 + 0.5));
  EXPECT_DOUBLE_EQ(m.blocking_recall, 0.75);
  EXPECT_THROW(evaluate(predicted, truth_of({{"r5", "s5"}}), candidates, {"r5"}), ValidationError);
}

TEST(Evaluate, F1IsHarmonicMeanOnRandomSets) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    MatchSet truth;
    std::vector<CandidatePair> predicted;
    for (int i = 0; i < 20; ++i) {
      if (rng() % 2) truth.add({"r" + std::to_string(i), "s"});
      if (rng() % 2) predicted.push_back({"r" + std::to_string(i), "s"});
    }
    if (truth.empty()) continue;
    const auto m = evaluate(predicted, truth, predicted, {});
    const double expect = m.precision + m.recall == 0 ? 0 : 2 * m.precision * m.recall / (m.precision + m.recall);
    EXPECT_DOUBLE_EQ(m.f1, expect);
    EXPECT_LE(m.f1, std::max(m.precision, m.recall) + 1e-15);
    EXPECT_GE(m.f1, std::min(m.precision, m.recall) - 1e-15);
  }
}

TEST(Files, MatchesAndMetricsRoundTrip) {
  testing::TempDir dir;
  const std::vector<Match> matches = {{{"r1", "s1"}, 0.9, 0.8}, {{"r2", "s,2"}, 0.7, 0.6}};
  save_matches(matches, dir / "m.csv", {"aler resolve"});
  const auto back = load_matches(dir / "m.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].pair, matches[1].pair);
  EXPECT_EQ(back[0].stage2_prob, 0.8);

  Metrics m;
  m.precision = 0.915;
  m.recall = 0.682;
  m.f1 = f1_score(m.precision, m.recall);
  m.true_positives = 3;
  save_metrics_text(m, dir / "metrics.txt");
  const auto mb = load_metrics_text(dir / "metrics.txt");
  EXPECT_EQ(mb.f1, m.f1);
  EXPECT_EQ(mb.true_positives, 3u);
  save_metrics_json(m, dir / "metrics.json");
  EXPECT_NE(testing::read_file(dir / "metrics.json").find("\"f1\""), std::string::npos);
}

}  // namespace
}  // namespace aler
