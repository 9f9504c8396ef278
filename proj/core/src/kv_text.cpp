#include "aler/kv_text.hpp"

#include <fstream>
#include <sstream>

#include "aler/types.hpp"

namespace aler {

namespace {

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

KeyValues parse_key_values(std::string_view text, std::string_view source) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) throw ValidationError(where + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ValidationError(where + ": empty key");
    if (find_value(out, key)) throw ValidationError(where + ": duplicate key \"" + key + "\"");
    out.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

std::string format_key_values(const KeyValues& values,
                              const std::vector<std::string>& header_comment) {
  std::string out;
  for (const auto& line : header_comment) out += "# " + line + "\n";
  for (const auto& [k, v] : values) out += k + " = " + v + "\n";
  return out;
}

void write_key_values(const KeyValues& values, const std::filesystem::path& path,
                      const std::vector<std::string>& header_comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << format_key_values(values, header_comment);
}

const std::string* find_value(const KeyValues& values, std::string_view key) {
  for (const auto& [k, v] : values) {
    if (k == key) return &v;
  }
  return nullptr;
}

}  // namespace aler
