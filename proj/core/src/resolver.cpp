#include "aler/resolver.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "aler/delimited.hpp"
#include "aler/kv_text.hpp"

namespace aler {

std::vector<CandidatePair> generate_candidates(const HnswIndex& index,
                                               const EmbeddingMatrix& queries, std::size_t k,
                                               const IdSet& exclusion, std::size_t ef_search) {
  if (k == 0) throw ValidationError("k must be positive");
  const std::size_t ef = ef_search == 0 ? index.params().ef_search : ef_search;
  std::vector<CandidatePair> out;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::string& r_id = queries.id(i);
    if (exclusion.contains(r_id)) continue;
    for (const auto& hit : index.query(queries.row(i), k, ef)) out.push_back({r_id, hit.id});
  }
  return out;
}

Resolution resolve(std::span<const CandidatePair> candidates, const MlpModel& recall_model,
                   double recall_threshold, const MlpModel& precision_model,
                   double precision_threshold, const PairFeaturizer& featurizer,
                   std::size_t batch_size) {
  if (recall_model.input_dim() != featurizer.interaction_dim()) {
    throw ValidationError("recall model expects " + std::to_string(recall_model.input_dim()) +
                          " features, interaction vectors have " +
                          std::to_string(featurizer.interaction_dim()));
  }
  if (precision_model.input_dim() != featurizer.lexical_dim()) {
    throw ValidationError("precision model expects " +
                          std::to_string(precision_model.input_dim()) +
                          " features, lexical vectors have " +
                          std::to_string(featurizer.lexical_dim()));
  }
  if (batch_size == 0) batch_size = 4096;

  Resolution out;
  out.candidates = candidates.size();

  std::vector<CandidatePair> survivors;
  std::vector<double> stage1;
  for (std::size_t begin = 0; begin < candidates.size(); begin += batch_size) {
    const auto batch = candidates.subspan(begin, std::min(batch_size, candidates.size() - begin));
    const auto probs = recall_model.predict(featurizer.interaction(batch));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (probs[i] > recall_threshold) {
        survivors.push_back(batch[i]);
        stage1.push_back(probs[i]);
      }
    }
  }
  out.stage1_survivors = survivors.size();

  const std::size_t before = featurizer.lexical_count();
  for (std::size_t begin = 0; begin < survivors.size(); begin += batch_size) {
    const std::size_t n = std::min(batch_size, survivors.size() - begin);
    const auto batch = std::span<const CandidatePair>(survivors).subspan(begin, n);
    const auto probs = precision_model.predict(featurizer.lexical(batch));
    for (std::size_t i = 0; i < n; ++i) {
      if (probs[i] > precision_threshold) {
        out.matches.push_back({batch[i], stage1[begin + i], probs[i]});
      }
    }
  }
  out.lexical_computations = featurizer.lexical_count() - before;

  std::sort(out.matches.begin(), out.matches.end(), [](const Match& a, const Match& b) {
    if (a.stage2_prob != b.stage2_prob) return a.stage2_prob > b.stage2_prob;
    return a.pair < b.pair;
  });
  return out;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics evaluate(std::span<const CandidatePair> predicted, const MatchSet& truth,
                 std::span<const CandidatePair> candidates, const IdSet& exclusion) {
  PairSet effective;
  for (const auto& p : truth.pairs()) {
    if (!exclusion.contains(p.r_id)) effective.insert(p);
  }
  if (effective.empty()) throw ValidationError("no ground-truth pair survives the exclusion set");

  Metrics m;
  PairSet seen;
  for (const auto& p : predicted) {
    if (!seen.insert(p).second) continue;
    if (effective.contains(p)) {
      ++m.true_positives;
    } else {
      ++m.false_positives;
    }
  }
  m.predicted = seen.size();
  m.false_negatives = effective.size() - m.true_positives;
  m.precision = m.predicted == 0 ? 0.0
                                 : static_cast<double>(m.true_positives) /
                                       static_cast<double>(m.predicted);
  m.recall = static_cast<double>(m.true_positives) / static_cast<double>(effective.size());
  m.f1 = f1_score(m.precision, m.recall);

  PairSet blocked;
  for (const auto& p : candidates) {
    if (effective.contains(p)) blocked.insert(p);
  }
  m.candidates = candidates.size();
  m.blocking_recall = static_cast<double>(blocked.size()) / static_cast<double>(effective.size());
  return m;
}

void save_matches(std::span<const Match> matches, const std::filesystem::path& path,
                  const std::vector<std::string>& header_comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& line : header_comment) out << "# " << line << '\n';
  write_delimited_row(out, {"r_id", "s_id", "stage1_prob", "stage2_prob"});
  for (const auto& m : matches) {
    write_delimited_row(out, {m.pair.r_id, m.pair.s_id, format_double(m.stage1_prob),
                              format_double(m.stage2_prob)});
  }
}

std::vector<Match> load_matches(const std::filesystem::path& path) {
  const auto rows = read_delimited(path);
  std::vector<Match> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (f.size() != 4) {
      throw ValidationError(path.string() + ": row " + std::to_string(rows[i].line) +
                            " must be r_id,s_id,stage1_prob,stage2_prob");
    }
    out.push_back({{f[0], f[1]}, parse_double(f[2], "stage1_prob"), parse_double(f[3], "stage2_prob")});
  }
  return out;
}

namespace {

KeyValues metric_values(const Metrics& m) {
  return {{"precision", format_double(m.precision)},
          {"recall", format_double(m.recall)},
          {"f1", format_double(m.f1)},
          {"blocking_recall", format_double(m.blocking_recall)},
          {"true_positives", std::to_string(m.true_positives)},
          {"false_positives", std::to_string(m.false_positives)},
          {"false_negatives", std::to_string(m.false_negatives)},
          {"candidates", std::to_string(m.candidates)},
          {"predicted", std::to_string(m.predicted)}};
}

}  // namespace

void save_metrics_text(const Metrics& metrics, const std::filesystem::path& path,
                       const std::vector<std::string>& header_comment) {
  write_key_values(metric_values(metrics), path, header_comment);
}

Metrics load_metrics_text(const std::filesystem::path& path) {
  const auto kv = read_key_values(path);
  auto get = [&](const char* key) -> const std::string& {
    const auto* v = find_value(kv, key);
    if (!v) throw ValidationError(path.string() + ": missing " + key);
    return *v;
  };
  Metrics m;
  m.precision = parse_double(get("precision"), "precision");
  m.recall = parse_double(get("recall"), "recall");
  m.f1 = parse_double(get("f1"), "f1");
  m.blocking_recall = parse_double(get("blocking_recall"), "blocking_recall");
  m.true_positives = parse_size(get("true_positives"), "true_positives");
  m.false_positives = parse_size(get("false_positives"), "false_positives");
  m.false_negatives = parse_size(get("false_negatives"), "false_negatives");
  m.candidates = parse_size(get("candidates"), "candidates");
  m.predicted = parse_size(get("predicted"), "predicted");
  return m;
}

void save_metrics_json(const Metrics& m, const std::filesystem::path& path) {
  const nlohmann::ordered_json j = {
      {"precision", m.precision},
      {"recall", m.recall},
      {"f1", m.f1},
      {"blocking_recall", m.blocking_recall},
      {"true_positives", m.true_positives},
      {"false_positives", m.false_positives},
      {"false_negatives", m.false_negatives},
      {"candidates", m.candidates},
      {"predicted", m.predicted},
  };
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace aler
