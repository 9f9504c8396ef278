#include <sys/wait.h>

#include <cstdio>
#include <regex>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace {

using aler::testing::read_file;
using aler::testing::write_file;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

CliResult aler_cli(const std::string& args, const std::filesystem::path& scratch) {
  const auto out = scratch / "stdout.txt", err = scratch / "stderr.txt";
  const std::string cmd = std::string(ALER_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(out);
  r.err = read_file(err);
  return r;
}

/// A synthetic corpus in a temp dir plus helpers for running stages on it.
class CliCorpus : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus_ = dir_.path() / "corpus";
    const auto r = run("synth --out " + corpus_.string() + " --records 1000 --seed 3");
    ASSERT_EQ(r.code, 0) << r.err;
  }

  CliResult run(const std::string& args) { return aler_cli(args, dir_.path()); }
  std::filesystem::path manifest() const { return corpus_ / "manifest.txt"; }
  std::filesystem::path artifact(const std::string& name) const { return corpus_ / "artifacts" / name; }
  // Overrides keep the training loop short.
  std::string m() const {
    return " --manifest " + manifest().string() +
           " --override i_max=2 --override b=100 --override validation_cap=200 --override epochs=8";
  }

  void prepare() {
    for (const char* stage : {"ingest", "index", "partition"}) {
      const auto r = run(std::string(stage) + m());
      ASSERT_EQ(r.code, 0) << stage << ": " << r.err;
    }
  }

  aler::testing::TempDir dir_;
  std::filesystem::path corpus_;
};

std::size_t data_rows(const std::string& csv) {
  std::size_t rows = 0;
  std::istringstream in(csv);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  return rows == 0 ? 0 : rows - 1;
}

double metric(const std::string& out, const std::string& name) {
  std::smatch mt;
  const std::regex re(name + " ([0-9.]+)");
  if (!std::regex_search(out, mt, re)) return -1;
  return std::stod(mt[1]);
}

TEST_F(CliCorpus, FullPipelineAndMetrics) {
  prepare();
  EXPECT_EQ(data_rows(read_file(artifact("chunks.csv"))), 200u);
  const auto train = run("train" + m());
  ASSERT_EQ(train.code, 0) << train.err;
  ASSERT_EQ(run("resolve" + m()).code, 0);
  const auto eval = run("eval" + m());
  ASSERT_EQ(eval.code, 0) << eval.err;
  const double p = metric(eval.out, "precision"), r = metric(eval.out, "recall"), f = metric(eval.out, "f1");
  ASSERT_GT(p + r, 0.0) << eval.out;
  // Printed values carry four decimals.
  EXPECT_NEAR(f, 2 * p * r / (p + r), 2e-4);
  EXPECT_GT(f, 0.5);
  EXPECT_NE(read_file(artifact("metrics.json")).find("\"f1\""), std::string::npos);
}

TEST_F(CliCorpus, RerunningStagesIsByteIdentical) {
  prepare();
  const auto index = read_file(artifact("index.hnsw"));
  const auto chunks = read_file(artifact("chunks.csv"));
  ASSERT_EQ(run("index" + m()).code, 0);
  ASSERT_EQ(run("partition" + m()).code, 0);
  EXPECT_EQ(read_file(artifact("index.hnsw")), index);
  EXPECT_EQ(read_file(artifact("chunks.csv")), chunks);

  ASSERT_EQ(run("train" + m()).code, 0);
  ASSERT_EQ(run("resolve" + m()).code, 0);
  const auto matches = read_file(artifact("matches.csv"));
  const auto labeled = read_file(artifact("labeled.csv"));
  ASSERT_EQ(run("train" + m()).code, 0);
  ASSERT_EQ(run("resolve" + m()).code, 0);
  EXPECT_EQ(read_file(artifact("matches.csv")), matches);
  EXPECT_EQ(read_file(artifact("labeled.csv")), labeled);
}

TEST_F(CliCorpus, MissingEmbeddingsFieldIsNamed) {
  write_file(corpus_ / "bad.txt", "records_r = records_r.csv\nrecords_s = records_s.csv\n"
                                  "embeddings_s = emb_s.txt\noutput_dir = artifacts\nseed = 1\n");
  const auto r = run("ingest --manifest " + (corpus_ / "bad.txt").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("embeddings_r"), std::string::npos) << r.err;
}

TEST_F(CliCorpus, UnknownOverrideKeyIsAValidationError) {
  const auto r = run("index" + m() + " --override colour=red");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("colour"), std::string::npos);
}

TEST_F(CliCorpus, PrecisionThresholdOfOneYieldsNoMatches) {
  prepare();
  ASSERT_EQ(run("train" + m()).code, 0);
  ASSERT_EQ(run("resolve" + m() + " --override precision_threshold=1.0").code, 0);
  EXPECT_EQ(data_rows(read_file(artifact("matches.csv"))), 0u);
}

TEST_F(CliCorpus, StrategiesWriteTheirOwnHistories) {
  prepare();
  ASSERT_EQ(run("train" + m() + " --strategy random").code, 0);
  const auto random_log = read_file(artifact("f1_history.csv"));
  ASSERT_EQ(run("train" + m() + " --strategy hybrid").code, 0);
  const auto hybrid_log = read_file(artifact("f1_history.csv"));
  EXPECT_GE(data_rows(random_log), 1u);
  EXPECT_GE(data_rows(hybrid_log), 1u);
  EXPECT_NE(random_log, hybrid_log);
}

TEST_F(CliCorpus, BudgetCapEndsTrainingWithExitThree) {
  prepare();
  // Validation takes up to 200 labels and the seed 100; the loop gets 50.
  const auto r = run("train" + m() + " --override budget_cap=350");
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(read_file(artifact("ledger.csv")).find(",350,1"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(artifact("model_R.mlp")));
  const auto aborted = run("train" + m() + " --override budget_cap=20");
  EXPECT_EQ(aborted.code, 3);
  EXPECT_NE(aborted.err.find("labels:"), std::string::npos);
}

TEST(Cli, BadArgumentsExitTwo) {
  aler::testing::TempDir dir;
  EXPECT_EQ(aler_cli("train", dir.path()).code, 2);
  EXPECT_EQ(aler_cli("train --manifest x --oracle carrier-pigeon", dir.path()).code, 2);
  EXPECT_EQ(aler_cli("", dir.path()).code, 2);
}

}  // namespace
