#include "aler/types.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace aler {

std::string to_string(const CandidatePair& pair) {
  return "(" + pair.r_id + ", " + pair.s_id + ")";
}

std::size_t CandidatePairHash::operator()(const CandidatePair& pair) const noexcept {
  const std::size_t h1 = std::hash<std::string>{}(pair.r_id);
  const std::size_t h2 = std::hash<std::string>{}(pair.s_id);
  return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
}

std::string to_string(const Provenance& provenance) {
  switch (provenance.kind) {
    case Provenance::Kind::seed:
      return "seed";
    case Provenance::Kind::validation:
      return "validation";
    case Provenance::Kind::loop:
      return "loop-" + std::to_string(provenance.chunk) + "-" +
             std::to_string(provenance.iteration);
  }
  return "unknown";
}

Provenance parse_provenance(const std::string& text) {
  if (text == "seed") return Provenance::seed();
  if (text == "validation") return Provenance::validation();
  std::size_t chunk = 0;
  std::size_t iteration = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "loop-%zu-%zu%c", &chunk, &iteration, &tail) == 2) {
    return Provenance::loop(chunk, iteration);
  }
  throw ValidationError("unrecognized provenance tag \"" + text + "\"");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_double(double value) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

double parse_double(std::string_view text, std::string_view what) {
  std::string s(text);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ValidationError(std::string(what) + ": expected a number, got \"" + s + "\"");
  }
  return v;
}

std::size_t parse_size(std::string_view text, std::string_view what) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || end != text.data() + text.size()) {
    throw ValidationError(std::string(what) + ": expected a non-negative integer, got \"" +
                          std::string(text) + "\"");
  }
  return v;
}

}  // namespace aler
