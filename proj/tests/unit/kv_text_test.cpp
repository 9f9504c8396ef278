#include <gtest/gtest.h>

#include "aler/kv_text.hpp"
#include "aler/types.hpp"
#include "test_support.hpp"

namespace aler {
namespace {

TEST(KeyValues, ParsesTrimmedPairsAndSkipsComments) {
  const auto kv = parse_key_values("# header\n\n seed = 7 \nkey_attrs=title, code\nempty =\n");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], (std::pair<std::string, std::string>{"seed", "7"}));
  EXPECT_EQ(kv[1].second, "title, code");
  EXPECT_EQ(kv[2].second, "");
  EXPECT_EQ(*find_value(kv, "seed"), "7");
  EXPECT_EQ(find_value(kv, "missing"), nullptr);
}

TEST(KeyValues, ValueMayContainEquals) {
  const auto kv = parse_key_values("url = http://h/x?a=b\n");
  EXPECT_EQ(kv[0].second, "http://h/x?a=b");
}

TEST(KeyValues, ErrorsNameSourceAndLine) {
  try {
    parse_key_values("a = 1\nbroken\n", "run.txt");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("run.txt:2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_key_values(" = 1\n"), ValidationError);
  EXPECT_THROW(parse_key_values("a = 1\na = 2\n"), ValidationError);
}

TEST(KeyValues, FileRoundTrip) {
  testing::TempDir dir;
  const KeyValues kv = {{"a", "1"}, {"b", "x y"}, {"c", ""}};
  write_key_values(kv, dir / "kv.txt", {"made by test"});
  EXPECT_EQ(testing::read_file(dir / "kv.txt").rfind("# made by test\n", 0), 0u);
  EXPECT_EQ(read_key_values(dir / "kv.txt"), kv);
  EXPECT_THROW(read_key_values(dir / "absent.txt"), ValidationError);
}

}  // namespace
}  // namespace aler
