#pragma once

// `key = value` text: one pair per line, '#' starts a comment line, blank
// lines ignored, surrounding whitespace trimmed.

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace aler {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

/// Throws ValidationError naming the line for a missing '=', an empty key,
/// or a repeated key.
KeyValues parse_key_values(std::string_view text, std::string_view source = "<text>");
KeyValues read_key_values(const std::filesystem::path& path);

std::string format_key_values(const KeyValues& values,
                              const std::vector<std::string>& header_comment = {});
void write_key_values(const KeyValues& values, const std::filesystem::path& path,
                      const std::vector<std::string>& header_comment = {});

/// Value for `key`, or nullptr.
const std::string* find_value(const KeyValues& values, std::string_view key);

}  // namespace aler
