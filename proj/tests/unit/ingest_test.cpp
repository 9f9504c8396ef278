#include <atomic>
#include <cmath>
#include <thread>

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include "aler/ingest.hpp"
#include "aler/types.hpp"
#include "test_support.hpp"

namespace aler {
namespace {

using testing::TempDir;
using testing::write_file;

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

TEST(LoadRecords, ThreeRowFile) {
  TempDir dir;
  write_file(dir / "r.csv", "id,title,price\n1,ipod,199\n2,zune,99\n3,walkman,49\n");
  const auto rc = load_records(dir / "r.csv", "id");
  EXPECT_EQ(rc.size(), 3u);
  EXPECT_EQ(rc.schema(), (std::vector<std::string>{"title", "price"}));
  EXPECT_EQ(rc.at("2").values, (std::vector<std::string>{"zune", "99"}));
}

TEST(LoadRecords, IdColumnNeedNotComeFirst) {
  TempDir dir;
  write_file(dir / "r.csv", "title,key,price\nipod,a,1\n");
  const auto rc = load_records(dir / "r.csv", "key");
  EXPECT_EQ(rc.schema(), (std::vector<std::string>{"title", "price"}));
  EXPECT_EQ(rc.records()[0].id, "a");
}

TEST(LoadRecords, DuplicateIdNamesIdAndBothRows) {
  TempDir dir;
  std::string text = "id,title\n";
  // Header is row 1; "7" sits on rows 2 and 9.
  const char* ids[] = {"7", "1", "2", "3", "4", "5", "6", "7"};
  for (const char* id : ids) text += std::string(id) + ",x\n";
  write_file(dir / "r.csv", text);
  const auto msg = error_of([&] { load_records(dir / "r.csv", "id"); });
  EXPECT_NE(msg.find("\"7\""), std::string::npos) << msg;
  EXPECT_NE(msg.find("2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("9"), std::string::npos) << msg;
  EXPECT_NE(msg.find("rows 2 and 9"), std::string::npos) << msg;
}

TEST(LoadRecords, EmptyCellIsEmptyValue) {
  TempDir dir;
  write_file(dir / "r.csv", "id,title,price\n1,,5\n");
  const auto rc = load_records(dir / "r.csv", "id");
  EXPECT_EQ(rc.at("1").values[0], "");
}

TEST(LoadRecords, MissingIdColumnAndUnreadableFile) {
  TempDir dir;
  write_file(dir / "r.csv", "key,title\n1,a\n");
  EXPECT_NE(error_of([&] { load_records(dir / "r.csv", "id"); }).find("id"), std::string::npos);
  EXPECT_THROW(load_records(dir / "none.csv", "id"), ValidationError);
}

TEST(LoadRecords, RaggedRowReportsRowNumber) {
  TempDir dir;
  write_file(dir / "r.csv", "id,title\n1,a\n2,b,extra\n");
  EXPECT_NE(error_of([&] { load_records(dir / "r.csv", "id"); }).find("row 3"), std::string::npos);
}

TEST(Records, SaveLoadRoundTripWithQuoting) {
  TempDir dir;
  RecordCollection rc({"title", "note"});
  rc.add({"a", {"x, y", "say \"hi\""}});
  rc.add({"b", {"multi\nline", ""}});
  save_records(rc, dir / "r.csv");
  const auto back = load_records(dir / "r.csv", "id");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back.at("a").values, rc.at("a").values);
  EXPECT_EQ(back.at("b").values, rc.at("b").values);
}

TEST(Records, TextForEncoder) {
  RecordCollection rc({"title", "price"});
  rc.add({"1", {"ipod nano", "199"}});
  EXPECT_EQ(record_text(rc, rc.at("1")), "title: ipod nano price: 199");
}

std::string text_embeddings(std::size_t dim, const std::vector<std::pair<std::string, std::vector<float>>>& rows) {
  std::string s = "dim=" + std::to_string(dim) + " count=" + std::to_string(rows.size()) + "\n";
  for (const auto& [id, v] : rows) {
    s += id;
    for (float x : v) s += " " + std::to_string(x);
    s += "\n";
  }
  return s;
}

TEST(LoadEmbeddings, Dim384RowsAreUnitVectors) {
  TempDir dir;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  std::vector<std::pair<std::string, std::vector<float>>> rows;
  for (int i = 0; i < 25; ++i) {
    std::vector<float> v(384);
    for (auto& x : v) x = u(rng);
    rows.emplace_back("id" + std::to_string(i), v);
  }
  write_file(dir / "e.txt", text_embeddings(384, rows));
  const auto m = load_embeddings(dir / "e.txt");
  EXPECT_EQ(m.size(), 25u);
  EXPECT_EQ(m.dim(), 384u);
  for (std::size_t i = 0; i < m.size(); ++i) {
    double n = 0;
    for (float x : m.row(i)) n += double(x) * x;
    EXPECT_NEAR(std::sqrt(n), 1.0, 1e-6);
  }
}

TEST(LoadEmbeddings, NanRowNamesRecord) {
  TempDir dir;
  write_file(dir / "e.txt", "dim=2 count=2\na 1 0\nbad nan 1\n");
  const auto msg = error_of([&] { load_embeddings(dir / "e.txt"); });
  EXPECT_NE(msg.find("bad"), std::string::npos) << msg;
}

TEST(LoadEmbeddings, ZeroRowCannotBeNormalized) {
  TempDir dir;
  write_file(dir / "e.txt", "dim=2 count=1\nz 0 0\n");
  const auto msg = error_of([&] { load_embeddings(dir / "e.txt"); });
  EXPECT_NE(msg.find("z"), std::string::npos);
  EXPECT_NE(msg.find("normalized"), std::string::npos);
}

TEST(LoadEmbeddings, DimMismatchWithHeader) {
  TempDir dir;
  write_file(dir / "e.txt", "dim=3 count=1\na 1 0\n");
  EXPECT_THROW(load_embeddings(dir / "e.txt"), ValidationError);
}

TEST(Embeddings, BinaryAndTextRoundTripBitExact) {
  TempDir dir;
  const auto m = testing::random_unit_vectors(50, 16, 9);
  for (auto fmt : {EmbeddingFormat::binary, EmbeddingFormat::text}) {
    save_embeddings(m, dir / "e.bin", fmt);
    const auto back = load_embeddings(dir / "e.bin");
    ASSERT_EQ(back.ids(), m.ids());
    EXPECT_EQ(back.data(), m.data());
  }
}

TEST(Embeddings, CoverageNamesMissingRecord) {
  RecordCollection rc({"t"});
  rc.add({"a", {"x"}});
  rc.add({"b", {"y"}});
  EmbeddingMatrix m(2);
  const float v[] = {1.0f, 0.0f};
  m.add("a", v);
  const auto msg = error_of([&] { check_coverage(m, rc); });
  EXPECT_NE(msg.find("\"b\""), std::string::npos) << msg;
}

TEST(MatchSetFile, RoundTripAndUnknownIds) {
  TempDir dir;
  MatchSet truth;
  truth.add({"r1", "s2"});
  truth.add({"r2", "s1"});
  save_match_set(truth, dir / "t.csv");
  const auto back = load_match_set(dir / "t.csv", nullptr, nullptr);
  EXPECT_EQ(back.pairs(), truth.pairs());
  RecordCollection r({"t"}), s({"t"});
  r.add({"r1", {""}});
  s.add({"s2", {""}});
  EXPECT_THROW(load_match_set(dir / "t.csv", &r, &s), ValidationError);
  EXPECT_THROW(truth.add({"r1", "s2"}), ValidationError);
}

/// Local stand-in for an encoder service: answers every text with a vector
/// of `dims[request]` (last entry repeats) and counts requests.
class FakeEncoder {
 public:
  explicit FakeEncoder(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    server_.Post("/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = nlohmann::json::parse(req.body);
      const std::size_t call = requests_++;
      const std::size_t dim = dims_[std::min(call, dims_.size() - 1)];
      nlohmann::json vectors = nlohmann::json::array();
      for (std::size_t i = 0; i < body["texts"].size(); ++i) {
        std::vector<float> v(dim, 0.0f);
        v[i % dim] = 1.0f;
        vectors.push_back(v);
      }
      res.set_content(nlohmann::json{{"vectors", vectors}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEncoder() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/embed"; }
  std::size_t requests() const { return requests_; }

 private:
  std::vector<std::size_t> dims_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<std::size_t> requests_{0};
};

RecordCollection numbered_records(std::size_t n) {
  RecordCollection rc({"title"});
  for (std::size_t i = 0; i < n; ++i) rc.add({"r" + std::to_string(i), {"item " + std::to_string(i)}});
  return rc;
}

TEST(FetchEmbeddings, HundredRecordsInFourBatches) {
  FakeEncoder encoder({8});
  FetchOptions options;
  options.batch_size = 32;
  const auto m = fetch_embeddings(encoder.url(), numbered_records(100), options);
  EXPECT_EQ(encoder.requests(), 4u);
  EXPECT_EQ(m.size(), 100u);
  EXPECT_EQ(m.dim(), 8u);
  EXPECT_EQ(m.id(99), "r99");
}

TEST(FetchEmbeddings, DimensionChangeNamesBothDims) {
  FakeEncoder encoder({384, 512});
  FetchOptions options;
  options.batch_size = 2;
  const auto msg = error_of([&] { fetch_embeddings(encoder.url(), numbered_records(4), options); });
  EXPECT_NE(msg.find("384"), std::string::npos) << msg;
  EXPECT_NE(msg.find("512"), std::string::npos) << msg;
}

TEST(FetchEmbeddings, EmptyTextStillGetsVectorWithWarning) {
  FakeEncoder encoder({4});
  RecordCollection rc({"title"});
  rc.add({"blank", {""}});
  rc.add({"full", {"x"}});
  ::testing::internal::CaptureStderr();
  const auto m = fetch_embeddings(encoder.url(), rc);
  const auto err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(m.size(), 2u);
  EXPECT_TRUE(m.find("blank").has_value());
  EXPECT_NE(err.find("warning"), std::string::npos);
  EXPECT_NE(err.find("blank"), std::string::npos);
}

TEST(FetchEmbeddings, UnreachableServiceFailsAfterRetries) {
  FetchOptions options;
  options.max_retries = 1;
  options.timeout_seconds = 1;
  // Port 1 on loopback refuses connections.
  EXPECT_THROW(fetch_embeddings("http://127.0.0.1:1/embed", numbered_records(3), options), Error);
}

}  // namespace
}  // namespace aler
