#include "aler/features.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace aler {

void write_interaction(std::span<const float> a, std::span<const float> b, std::span<double> out) {
  const std::size_t d = a.size();
  for (std::size_t i = 0; i < d; ++i) {
    const double x = a[i];
    const double y = b[i];
    out[i] = x;
    out[d + i] = y;
    out[2 * d + i] = std::abs(x - y);
    out[3 * d + i] = x * y;
  }
}

std::vector<double> interaction_vector(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw ValidationError("interaction_vector: dims " + std::to_string(a.size()) + " and " +
                          std::to_string(b.size()) + " differ");
  }
  std::vector<double> out(4 * a.size());
  write_interaction(a, b, out);
  return out;
}

double jaro(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const std::size_t la = a.size();
  const std::size_t lb = b.size();
  const std::size_t longest = std::max(la, lb);
  const std::size_t window = longest / 2 > 0 ? longest / 2 - 1 : 0;

  std::vector<bool> a_matched(la, false);
  std::vector<bool> b_matched(lb, false);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < la; ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(lb, i + window + 1);
    for (std::size_t j = lo; j < hi; ++j) {
      if (!b_matched[j] && a[i] == b[j]) {
        a_matched[i] = true;
        b_matched[j] = true;
        ++matches;
        break;
      }
    }
  }
  if (matches == 0) return 0.0;

  std::size_t half_transpositions = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < la; ++i) {
    if (!a_matched[i]) continue;
    while (!b_matched[k]) ++k;
    if (a[i] != b[k]) ++half_transpositions;
    ++k;
  }
  const double m = static_cast<double>(matches);
  const double t = static_cast<double>(half_transpositions) / 2.0;
  return (m / static_cast<double>(la) + m / static_cast<double>(lb) + (m - t) / m) / 3.0;
}

namespace {

std::string fold(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t begin = 0;
  std::size_t end = s.size();
  while (begin < end && is_space(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && is_space(static_cast<unsigned char>(s[end - 1]))) --end;
  std::string out(s.substr(begin, end - begin));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

double jaro_winkler(std::string_view a, std::string_view b) {
  std::string x = fold(a);
  std::string y = fold(b);
  // Greedy matching depends on argument order in rare cases; a canonical
  // order makes the measure symmetric.
  if (y < x) std::swap(x, y);
  const double j = jaro(x, y);
  if (x.empty() || y.empty()) return j;
  std::size_t prefix = 0;
  const std::size_t cap = std::min<std::size_t>({4, x.size(), y.size()});
  while (prefix < cap && x[prefix] == y[prefix]) ++prefix;
  return j + static_cast<double>(prefix) * 0.1 * (1.0 - j);
}

PairFeaturizer::PairFeaturizer(const EmbeddingMatrix& embeddings_r,
                               const EmbeddingMatrix& embeddings_s,
                               const RecordCollection* records_r,
                               const RecordCollection* records_s,
                               std::vector<std::string> key_attrs)
    : embeddings_r_(&embeddings_r),
      embeddings_s_(&embeddings_s),
      records_r_(records_r),
      records_s_(records_s),
      key_attrs_(std::move(key_attrs)) {
  if (embeddings_r.dim() != embeddings_s.dim()) {
    throw ValidationError("embedding dims differ: " + std::to_string(embeddings_r.dim()) + " vs " +
                          std::to_string(embeddings_s.dim()));
  }
  if (!key_attrs_.empty() && (!records_r_ || !records_s_)) {
    throw ValidationError("key attributes require both record collections");
  }
  for (const auto& name : key_attrs_) {
    auto ir = records_r_->attribute_index(name);
    auto is = records_s_->attribute_index(name);
    if (!ir || !is) throw ValidationError("unknown key attribute \"" + name + "\"");
    attr_r_.push_back(*ir);
    attr_s_.push_back(*is);
  }
}

FeatureMatrix PairFeaturizer::interaction(std::span<const CandidatePair> pairs) const {
  FeatureMatrix out(static_cast<Eigen::Index>(pairs.size()),
                    static_cast<Eigen::Index>(interaction_dim()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::span<double> row(out.data() + i * interaction_dim(), interaction_dim());
    write_interaction(embeddings_r_->row(pairs[i].r_id), embeddings_s_->row(pairs[i].s_id), row);
  }
  return out;
}

void PairFeaturizer::write_lexical(const CandidatePair& pair, std::span<double> out) const {
  write_interaction(embeddings_r_->row(pair.r_id), embeddings_s_->row(pair.s_id),
                    out.first(interaction_dim()));
  if (!key_attrs_.empty()) {
    const Record& r = records_r_->at(pair.r_id);
    const Record& s = records_s_->at(pair.s_id);
    for (std::size_t a = 0; a < key_attrs_.size(); ++a) {
      out[interaction_dim() + a] = jaro_winkler(r.values[attr_r_[a]], s.values[attr_s_[a]]);
    }
  }
  lexical_count_.fetch_add(1, std::memory_order_relaxed);
}

FeatureMatrix PairFeaturizer::lexical(std::span<const CandidatePair> pairs) const {
  FeatureMatrix out(static_cast<Eigen::Index>(pairs.size()),
                    static_cast<Eigen::Index>(lexical_dim()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    write_lexical(pairs[i], std::span<double>(out.data() + i * lexical_dim(), lexical_dim()));
  }
  return out;
}

std::vector<double> PairFeaturizer::lexical_vector(const CandidatePair& pair) const {
  std::vector<double> out(lexical_dim());
  write_lexical(pair, out);
  return out;
}

}  // namespace aler
