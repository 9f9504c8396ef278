#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace aler {

/// One parsed row of a delimited-text file together with the 1-based file
/// line on which it starts (the header is line 1).
struct DelimitedRow {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// Reads a delimited-text file with RFC 4180 quoting ("a,""b""" style), CRLF
/// or LF line endings, and embedded newlines inside quoted fields. Lines that
/// start with '#' outside quotes are skipped. Throws ValidationError when the
/// file cannot be opened or a quote is left open.
std::vector<DelimitedRow> read_delimited(const std::filesystem::path& path,
                                         char delimiter = ',');

std::vector<DelimitedRow> parse_delimited(std::string_view text, char delimiter = ',');

/// Quotes a field only when it contains the delimiter, a quote, or a newline.
std::string quote_field(std::string_view field, char delimiter = ',');

void write_delimited_row(std::ostream& out, const std::vector<std::string>& fields,
                         char delimiter = ',');

}  // namespace aler
