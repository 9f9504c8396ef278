#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "aler/features.hpp"
#include "test_support.hpp"

namespace aler {
namespace {

TEST(Interaction, IdenticalInputsZeroTheDifferenceBlock) {
  const std::vector<float> v = {0.6f, 0.8f};
  const auto out = interaction_vector(v, v);
  const std::vector<double> expect = {0.6, 0.8, 0.6, 0.8, 0.0, 0.0, 0.36, 0.64};
  ASSERT_EQ(out.size(), expect.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], expect[i], 1e-6) << i;
}

TEST(Interaction, OrthogonalAxes) {
  const std::vector<float> a = {1.0f, 0.0f}, b = {0.0f, 1.0f};
  EXPECT_EQ(interaction_vector(a, b), (std::vector<double>{1, 0, 0, 1, 1, 1, 0, 0}));
}

TEST(Interaction, LengthIsFourTimesDimAndDimsMustAgree) {
  const std::vector<float> a(384, 0.05f), b(384, 0.05f), c(383, 0.05f);
  EXPECT_EQ(interaction_vector(a, b).size(), 1536u);
  EXPECT_THROW(interaction_vector(a, c), ValidationError);
}

TEST(JaroWinkler, IdentityAndDisjoint) {
  EXPECT_EQ(jaro_winkler("query", "query"), 1.0);
  EXPECT_EQ(jaro_winkler("abc", "xyz"), 0.0);
}

TEST(JaroWinkler, MarthaMarhtaMatchesHandEvaluation) {
  // m = 6 matching characters, t = 1 transposition (TH/HT), common prefix 3.
  const double m = 6.0, t = 1.0;
  const double j = (m / 6.0 + m / 6.0 + (m - t) / m) / 3.0;
  const double jw = j + 3 * 0.1 * (1.0 - j);
  EXPECT_NEAR(jw, 0.9611, 1e-4);
  EXPECT_NEAR(jaro_winkler("MARTHA", "MARHTA"), jw, 1e-12);
  EXPECT_NEAR(jaro("MARTHA", "MARHTA"), j, 1e-12);
}

TEST(JaroWinkler, EmptyStringConventions) {
  EXPECT_EQ(jaro_winkler("", ""), 1.0);
  EXPECT_EQ(jaro_winkler("", "a"), 0.0);
  EXPECT_EQ(jaro_winkler("a", ""), 0.0);
  EXPECT_EQ(jaro_winkler("   ", "  "), 1.0);
}

TEST(JaroWinkler, CaseAndSurroundingSpaceAreIgnored) {
  EXPECT_EQ(jaro_winkler("  Sony Camera ", "sony camera"), 1.0);
  EXPECT_LT(jaro_winkler("sony camera", "sony  camera"), 1.0);
}

/// Textbook Jaro written independently: counts matches and transpositions
/// from explicit matched-character sequences.
double reference_jaro(const std::string& s1, const std::string& s2) {
  if (s1.empty() && s2.empty()) return 1.0;
  if (s1.empty() || s2.empty()) return 0.0;
  const int range = std::max(0, static_cast<int>(std::max(s1.size(), s2.size())) / 2 - 1);
  std::vector<int> used(s2.size(), 0);
  std::string m1, m2;
  for (int i = 0; i < static_cast<int>(s1.size()); ++i) {
    for (int j = std::max(0, i - range); j <= std::min<int>(s2.size() - 1, i + range); ++j) {
      if (!used[j] && s1[i] == s2[j]) {
        used[j] = 1;
        m1 += s1[i];
        break;
      }
    }
  }
  for (std::size_t j = 0; j < s2.size(); ++j) {
    if (used[j]) m2 += s2[j];
  }
  if (m1.empty()) return 0.0;
  int half = 0;
  for (std::size_t i = 0; i < m1.size(); ++i) half += m1[i] != m2[i];
  const double m = static_cast<double>(m1.size());
  return (m / s1.size() + m / s2.size() + (m - half / 2.0) / m) / 3.0;
}

TEST(JaroWinkler, JaroAgreesWithReferenceOnRandomStrings) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> len(0, 9), ch(0, 3);
  for (int trial = 0; trial < 5000; ++trial) {
    std::string a, b;
    for (int i = len(rng); i > 0; --i) a += static_cast<char>('a' + ch(rng));
    for (int i = len(rng); i > 0; --i) b += static_cast<char>('a' + ch(rng));
    EXPECT_NEAR(jaro(a, b), reference_jaro(a, b), 1e-12) << a << " / " << b;
  }
}

TEST(JaroWinkler, SymmetricAndBoundedOnRandomStrings) {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> len(0, 12), ch(0, 5);
  for (int trial = 0; trial < 5000; ++trial) {
    std::string a, b;
    for (int i = len(rng); i > 0; --i) a += static_cast<char>('a' + ch(rng));
    for (int i = len(rng); i > 0; --i) b += static_cast<char>('A' + ch(rng));
    const double x = jaro_winkler(a, b);
    EXPECT_EQ(x, jaro_winkler(b, a)) << a << " / " << b;
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
    std::string lower_b = b;
    for (char& c : lower_b) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    // Equal after case folding (including both empty) is exactly the 1.0 case.
    EXPECT_EQ(x == 1.0, a == lower_b) << a << " / " << b;
  }
}

struct TwoSides {
  RecordCollection r{{"title", "name"}};
  RecordCollection s{{"name", "title", "extra"}};
  EmbeddingMatrix er{4};
  EmbeddingMatrix es{4};
};

TwoSides make_sides() {
  TwoSides t;
  t.r.add({"r1", {"Apple iPod", "john"}});
  t.r.add({"r2", {"Zune", ""}});
  t.s.add({"s1", {"john", "apple ipod", "x"}});
  t.s.add({"s2", {"mary", "Zune", "y"}});
  const std::vector<float> a = {0.5f, 0.5f, 0.5f, 0.5f}, b = {1.0f, 0.0f, 0.0f, 0.0f};
  t.er.add("r1", a);
  t.er.add("r2", b);
  t.es.add("s1", a);
  t.es.add("s2", a);
  return t;
}

TEST(Lexical, PerfectPairHasUnitTailAndZeroDifference) {
  const auto t = make_sides();
  const PairFeaturizer f(t.er, t.es, &t.r, &t.s, {"title"});
  const auto v = f.lexical_vector({"r1", "s1"});
  ASSERT_EQ(v.size(), 17u);
  EXPECT_EQ(v.back(), 1.0);
  for (std::size_t i = 8; i < 12; ++i) EXPECT_EQ(v[i], 0.0);
}

TEST(Lexical, EmptyValueOnOneSideGivesZeroAndLengthIsFourDPlusM) {
  const auto t = make_sides();
  const PairFeaturizer f(t.er, t.es, &t.r, &t.s, {"title", "name"});
  EXPECT_EQ(f.lexical_dim(), 18u);
  const auto v = f.lexical_vector({"r2", "s2"});
  ASSERT_EQ(v.size(), 18u);
  EXPECT_EQ(v[16], 1.0);
  EXPECT_EQ(v[17], 0.0);
}

TEST(Lexical, UnknownAttributeOrRecordIsAnError) {
  const auto t = make_sides();
  EXPECT_THROW(PairFeaturizer(t.er, t.es, &t.r, &t.s, {"extra"}), ValidationError);
  const PairFeaturizer f(t.er, t.es, &t.r, &t.s, {"title"});
  EXPECT_THROW(f.lexical_vector({"r9", "s1"}), ValidationError);
}

TEST(Featurizer, BatchRowsEqualSingleVectorsAndCountLexicalWork) {
  const auto e = testing::random_unit_vectors(30, 8, 4, "x");
  const PairFeaturizer f(e, e);
  std::vector<CandidatePair> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back({"x" + std::to_string(i), "x" + std::to_string(29 - i)});
  const auto inter = f.interaction(pairs);
  const auto lex = f.lexical(pairs);
  EXPECT_EQ(f.lexical_count(), pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto ref = interaction_vector(e.row(pairs[i].r_id), e.row(pairs[i].s_id));
    for (std::size_t c = 0; c < ref.size(); ++c) {
      EXPECT_EQ(inter(i, c), ref[c]);
      EXPECT_EQ(lex(i, c), ref[c]);
      if (c >= 16 && c < 24) {
        EXPECT_GE(inter(i, c), 0.0);
      }
    }
  }
}

}  // namespace
}  // namespace aler
