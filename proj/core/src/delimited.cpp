#include "aler/delimited.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "aler/types.hpp"

namespace aler {

std::vector<DelimitedRow> parse_delimited(std::string_view text, char delimiter) {
  std::vector<DelimitedRow> rows;
  std::size_t line = 1;
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (n >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  while (i < n) {
    if (text[i] == '#') {
      while (i < n && text[i] != '\n') ++i;
      ++i;
      ++line;
      continue;
    }
    DelimitedRow row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool done = false;
    while (!done) {
      if (i >= n) {
        if (in_quotes) {
          throw ValidationError("unterminated quoted field starting on line " +
                                std::to_string(row.line));
        }
        row.fields.push_back(std::move(field));
        done = true;
        break;
      }
      const char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < n && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
          } else {
            in_quotes = false;
            ++i;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
          ++i;
        }
        continue;
      }
      if (c == '"' && field.empty()) {
        in_quotes = true;
        ++i;
      } else if (c == delimiter) {
        row.fields.push_back(std::move(field));
        field.clear();
        ++i;
      } else if (c == '\r' && i + 1 < n && text[i + 1] == '\n') {
        ++i;
      } else if (c == '\n') {
        row.fields.push_back(std::move(field));
        ++i;
        ++line;
        done = true;
      } else {
        field.push_back(c);
        ++i;
      }
    }
    // A bare empty line carries no data.
    if (!(row.fields.size() == 1 && row.fields[0].empty())) rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<DelimitedRow> read_delimited(const std::filesystem::path& path, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) throw ValidationError("error reading file " + path.string());
  return parse_delimited(buffer.str(), delimiter);
}

std::string quote_field(std::string_view field, char delimiter) {
  if (field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) == std::string_view::npos &&
      (field.empty() || field.front() != '#')) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_delimited_row(std::ostream& out, const std::vector<std::string>& fields,
                         char delimiter) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << delimiter;
    out << quote_field(fields[i], delimiter);
  }
  out << '\n';
}

}  // namespace aler
