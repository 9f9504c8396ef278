#include <sstream>

#include <gtest/gtest.h>

#include "aler/delimited.hpp"
#include "aler/types.hpp"

namespace aler {
namespace {

TEST(Delimited, QuotedFieldsAndLineNumbers) {
  const auto rows = parse_delimited("id,title\n1,\"a, \"\"b\"\"\"\n2,\"two\nlines\"\r\n3,\n");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"1", "a, \"b\""}));
  EXPECT_EQ(rows[2].fields[1], "two\nlines");
  EXPECT_EQ(rows[2].line, 3u);
  EXPECT_EQ(rows[3].line, 5u);
  EXPECT_EQ(rows[3].fields, (std::vector<std::string>{"3", ""}));
}

TEST(Delimited, SkipsCommentLinesAndHonorsDelimiter) {
  const auto rows = parse_delimited("# provenance\na\tb\nc,d\te\n", '\t');
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].fields, (std::vector<std::string>{"c,d", "e"}));
}

TEST(Delimited, UnterminatedQuoteIsAnError) {
  EXPECT_THROW(parse_delimited("a,\"b\n"), ValidationError);
}

TEST(Delimited, WriteThenParseRoundTrip) {
  const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "new\nline", ""};
  std::ostringstream out;
  write_delimited_row(out, fields);
  const auto rows = parse_delimited(out.str());
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].fields, fields);
  EXPECT_EQ(quote_field("plain"), "plain");
  EXPECT_EQ(quote_field("a,b"), "\"a,b\"");
}

}  // namespace
}  // namespace aler
