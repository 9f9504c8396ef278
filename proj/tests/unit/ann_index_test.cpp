#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "aler/ann_index.hpp"
#include "test_support.hpp"

namespace aler {
namespace {

using testing::random_unit_vectors;

/// Exact top-k by a full sort of every similarity; independent of
/// brute_force_knn.
std::vector<std::string> sort_oracle(const EmbeddingMatrix& m, std::span<const float> q, std::size_t k) {
  std::vector<std::pair<float, std::string>> all;
  for (std::size_t i = 0; i < m.size(); ++i) {
    float dot = 0.0f;
    for (std::size_t d = 0; d < m.dim(); ++d) dot += m.row(i)[d] * q[d];
    all.emplace_back(-dot, m.id(i));
  }
  std::sort(all.begin(), all.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

std::vector<std::string> ids_of(const std::vector<Neighbor>& hits) {
  std::vector<std::string> out;
  for (const auto& h : hits) out.push_back(h.id);
  return out;
}

TEST(Hnsw, SingletonCorpusAlwaysAnswersItsOnlyId) {
  const auto m = random_unit_vectors(1, 8, 1);
  const auto index = HnswIndex::build(m, {}, 3);
  const auto probes = random_unit_vectors(5, 8, 2, "q");
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto hits = index.query(probes.row(i), 10);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, "v0");
  }
}

TEST(Hnsw, SelfQueryReturnsItselfWithUnitSimilarity) {
  const auto m = random_unit_vectors(500, 16, 5);
  const auto index = HnswIndex::build(m, {}, 1);
  for (std::size_t i = 0; i < m.size(); i += 37) {
    const auto hits = index.query(m.row(i), 1);
    ASSERT_EQ(hits.size(), 1u);
    EXPECT_EQ(hits[0].id, m.id(i));
    EXPECT_NEAR(hits[0].similarity, 1.0f, 1e-5f);
  }
}

TEST(Hnsw, KIsCappedByCorpusSize) {
  const auto m = random_unit_vectors(4, 8, 6);
  const auto index = HnswIndex::build(m, {}, 1);
  EXPECT_EQ(index.query(m.row(0), 10).size(), 4u);
}

TEST(Hnsw, OrthogonalAndNegatedVectors) {
  EmbeddingMatrix m(3);
  const float a[] = {1, 0, 0}, b[] = {0, 1, 0}, c[] = {0.6f, 0.8f, 0};
  m.add("a", a);
  m.add("b", b);
  m.add("c", c);
  const auto index = HnswIndex::build(m, {}, 1);
  const float qa[] = {1, 0, 0};
  auto hits = index.query(qa, 3);
  EXPECT_EQ(ids_of(hits), (std::vector<std::string>{"a", "c", "b"}));
  EXPECT_FLOAT_EQ(hits[0].similarity, 1.0f);
  EXPECT_FLOAT_EQ(hits[2].similarity, 0.0f);
  const float neg_c[] = {-0.6f, -0.8f, 0};
  hits = index.query(neg_c, 3);
  EXPECT_EQ(hits.back().id, "c");
  EXPECT_NEAR(hits.back().similarity, -1.0f, 1e-6f);
}

TEST(Hnsw, SmallMatrixEqualsExhaustiveSort) {
  const auto m = random_unit_vectors(100, 8, 7);
  const auto index = HnswIndex::build(m, {}, 2);
  const auto probes = random_unit_vectors(50, 8, 8, "q");
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto expect = sort_oracle(m, probes.row(i), 10);
    EXPECT_EQ(ids_of(brute_force_knn(m, probes.row(i), 10)), expect);
    EXPECT_EQ(ids_of(index.query(probes.row(i), 10, 100)), expect);
  }
}

TEST(Hnsw, ResultsSortedBySimilarityThenId) {
  EmbeddingMatrix m(2);
  const float v[] = {1, 0};
  for (const char* id : {"d", "b", "c", "a"}) m.add(id, v);
  const auto index = HnswIndex::build(m, {}, 1);
  EXPECT_EQ(ids_of(index.query(v, 4)), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(ids_of(brute_force_knn(m, v, 4)), (std::vector<std::string>{"a", "b", "c", "d"}));
}

TEST(Hnsw, SameSeedSameAnswers) {
  const auto m = random_unit_vectors(2000, 16, 9);
  const auto a = HnswIndex::build(m, {}, 77);
  const auto b = HnswIndex::build(m, {}, 77);
  const auto probes = random_unit_vectors(100, 16, 10, "q");
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const auto x = a.query(probes.row(i), 10);
    const auto y = b.query(probes.row(i), 10);
    ASSERT_EQ(ids_of(x), ids_of(y));
    for (std::size_t j = 0; j < x.size(); ++j) EXPECT_EQ(x[j].similarity, y[j].similarity);
  }
}

TEST(Hnsw, GraphInvariantsHold) {
  const auto m = random_unit_vectors(3000, 16, 11);
  HnswParams p;
  p.m = 8;
  p.ef_construction = 64;
  const auto index = HnswIndex::build(m, p, 5);
  EXPECT_NO_THROW(index.validate());
  EXPECT_EQ(index.level(index.entry_point()), index.max_level());
  for (std::uint32_t n = 0; n < index.size(); ++n) {
    for (int layer = 0; layer <= index.level(n); ++layer) {
      EXPECT_LE(index.neighbors(n, layer).size(), layer == 0 ? 2 * p.m : p.m);
    }
  }
}

TEST(Hnsw, RecallAgainstExactOracleOnModerateCorpus) {
  const auto m = random_unit_vectors(3000, 32, 12);
  const auto index = HnswIndex::build(m, {}, 1);
  const auto probes = random_unit_vectors(200, 32, 13, "q");
  double hit = 0;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    auto truth = ids_of(brute_force_knn(m, probes.row(i), 10));
    auto got = ids_of(index.query(probes.row(i), 10));
    std::sort(truth.begin(), truth.end());
    std::sort(got.begin(), got.end());
    std::vector<std::string> common;
    std::set_intersection(truth.begin(), truth.end(), got.begin(), got.end(), std::back_inserter(common));
    hit += static_cast<double>(common.size()) / 10.0;
  }
  EXPECT_GE(hit / probes.size(), 0.95);
}

TEST(Hnsw, SaveLoadPreservesAnswers) {
  testing::TempDir dir;
  const auto m = random_unit_vectors(800, 16, 14);
  const auto index = HnswIndex::build(m, {}, 3);
  index.save(dir / "index.hnsw");
  const auto back = HnswIndex::load(dir / "index.hnsw");
  EXPECT_EQ(back.size(), index.size());
  EXPECT_EQ(back.entry_point(), index.entry_point());
  const auto probes = random_unit_vectors(30, 16, 15, "q");
  for (std::size_t i = 0; i < probes.size(); ++i) {
    EXPECT_EQ(ids_of(back.query(probes.row(i), 10)), ids_of(index.query(probes.row(i), 10)));
  }
  index.save(dir / "again.hnsw");
  EXPECT_EQ(testing::read_file(dir / "index.hnsw"), testing::read_file(dir / "again.hnsw"));
}

TEST(Hnsw, RejectsCorruptFileAndBadParams) {
  testing::TempDir dir;
  testing::write_file(dir / "bad.hnsw", "not an index");
  EXPECT_THROW(HnswIndex::load(dir / "bad.hnsw"), Error);
  const auto m = random_unit_vectors(10, 4, 1);
  HnswParams p;
  p.m = 1;
  EXPECT_THROW(HnswIndex::build(m, p, 1), ValidationError);
  EXPECT_THROW(HnswIndex::build(EmbeddingMatrix(4), {}, 1), ValidationError);
}

}  // namespace
}  // namespace aler
