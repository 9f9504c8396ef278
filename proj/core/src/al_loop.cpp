#include "aler/al_loop.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "aler/delimited.hpp"

namespace aler {

std::string to_string(SelectionStrategy strategy) {
  switch (strategy) {
    case SelectionStrategy::hybrid:
      return "hybrid";
    case SelectionStrategy::uncertainty:
      return "uncertainty";
    case SelectionStrategy::random:
      return "random";
  }
  return "hybrid";
}

SelectionStrategy parse_strategy(const std::string& text) {
  if (text == "hybrid") return SelectionStrategy::hybrid;
  if (text == "uncertainty") return SelectionStrategy::uncertainty;
  if (text == "random") return SelectionStrategy::random;
  throw ValidationError("strategy: expected hybrid, uncertainty or random, got \"" + text + "\"");
}

void LoopConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string(name) + " must be positive");
  };
  positive(b_seed, "b_seed");
  positive(b, "b");
  positive(patience, "patience");
  positive(validation_cap, "validation_cap");
  positive(k, "k");
  positive(train.batch_size, "batch_size");
  positive(train.max_epochs, "epochs");
  if (!(min_delta >= 0.0)) throw ValidationError("min_delta must be non-negative");
  if (!(g_v > 0.0 && g_v <= 1.0)) throw ValidationError("g_v must lie in (0, 1]");
  if (!(confident_fraction >= 0.0 && confident_fraction <= 1.0)) {
    throw ValidationError("confident_fraction must lie in [0, 1]");
  }
  if (!(train.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(train.dropout_rate >= 0.0 && train.dropout_rate < 1.0)) {
    throw ValidationError("dropout must lie in [0, 1)");
  }
}

std::vector<CandidatePool> build_pools(const ChunkSet& chunks, const HnswIndex& index,
                                       const EmbeddingMatrix& embeddings_r, std::size_t k,
                                       std::size_t ef_search) {
  if (index.size() == 0) throw ValidationError("build_pools: empty index");
  if (chunks.size() == 0) throw ValidationError("build_pools: no chunks");
  const std::size_t ef = ef_search == 0 ? index.params().ef_search : ef_search;
  std::vector<CandidatePool> pools;
  pools.reserve(chunks.size());
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    CandidatePool pool;
    pool.chunk = c + 1;
    PairSet seen;
    for (const auto& r_id : chunks.chunks[c]) {
      for (const auto& hit : index.query(embeddings_r.row(r_id), k, ef)) {
        CandidatePair pair{r_id, hit.id};
        if (seen.insert(pair).second) pool.pairs.push_back(std::move(pair));
      }
    }
    pools.push_back(std::move(pool));
  }
  return pools;
}

std::vector<std::size_t> validation_allocation(std::span<const std::size_t> pool_sizes, double g_v,
                                               std::size_t cap) {
  std::vector<std::size_t> want(pool_sizes.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < pool_sizes.size(); ++i) {
    const double raw = std::ceil(g_v * static_cast<double>(pool_sizes[i]) - 1e-9);
    want[i] = std::min(pool_sizes[i], static_cast<std::size_t>(std::max(0.0, raw)));
    total += want[i];
  }
  if (total <= cap) return want;

  std::vector<std::size_t> out(want.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double exact =
        static_cast<double>(want[i]) * static_cast<double>(cap) / static_cast<double>(total);
    out[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += out[i];
    remainders.emplace_back(exact - static_cast<double>(out[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < cap && j < remainders.size(); ++j) {
    const std::size_t i = remainders[j].second;
    if (out[i] < want[i]) {
      ++out[i];
      ++assigned;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void LabeledSet::add(CandidatePair pair, int label, Provenance provenance) {
  if (label != 0 && label != 1) throw ValidationError("label must be 0 or 1");
  if (!index_.insert(pair).second) {
    throw ValidationError("pair " + to_string(pair) + " is already labeled");
  }
  positives_ += static_cast<std::size_t>(label);
  entries_.push_back({std::move(pair), label, provenance});
}

std::vector<CandidatePair> LabeledSet::pairs() const {
  std::vector<CandidatePair> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.pair);
  return out;
}

std::vector<int> LabeledSet::labels() const {
  std::vector<int> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.label);
  return out;
}

std::uint64_t LabeledSet::content_hash() const {
  std::uint64_t h = fnv1a("");
  for (const auto& e : entries_) {
    h = fnv1a(e.pair.r_id, h);
    h = fnv1a("\x1f", h);
    h = fnv1a(e.pair.s_id, h);
    h = fnv1a(e.label ? "\x1f" "1\n" : "\x1f" "0\n", h);
  }
  return h;
}

// ---------------------------------------------------------------------------

void BudgetLedger::record(const Provenance& provenance, std::size_t count) {
  switch (provenance.kind) {
    case Provenance::Kind::seed:
      seed_ += count;
      break;
    case Provenance::Kind::validation:
      validation_ += count;
      break;
    case Provenance::Kind::loop:
      loop_[{provenance.chunk, provenance.iteration}] += count;
      break;
  }
}

std::size_t BudgetLedger::loop() const {
  std::size_t n = 0;
  for (const auto& [key, count] : loop_) n += count;
  return n;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path,
                          const std::vector<std::string>& header_comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  for (const auto& line : header_comment) out << "# " << line << '\n';
  return out;
}

void expect_columns(const std::filesystem::path& path, const DelimitedRow& row, std::size_t n) {
  if (row.fields.size() != n) {
    throw ValidationError(path.string() + ": row " + std::to_string(row.line) + " has " +
                          std::to_string(row.fields.size()) + " fields, expected " +
                          std::to_string(n));
  }
}

}  // namespace

void save_ledger(const BudgetLedger& ledger, const std::filesystem::path& path,
                 const std::vector<std::string>& header_comment) {
  auto out = open_output(path, header_comment);
  write_delimited_row(out, {"N", "B_seed", "|V|", "Loop", "Total", "truncated"});
  write_delimited_row(out, {std::to_string(ledger.chunks), std::to_string(ledger.seed()),
                            std::to_string(ledger.validation()), std::to_string(ledger.loop()),
                            std::to_string(ledger.total()), ledger.truncated ? "1" : "0"});
}

void save_ledger_detail(const BudgetLedger& ledger, const std::filesystem::path& path,
                        const std::vector<std::string>& header_comment) {
  auto out = open_output(path, header_comment);
  write_delimited_row(out, {"chunk", "iteration", "queries"});
  for (const auto& [key, count] : ledger.loop_counts()) {
    write_delimited_row(
        out, {std::to_string(key.first), std::to_string(key.second), std::to_string(count)});
  }
}

BudgetLedger load_ledger(const std::filesystem::path& summary,
                         const std::filesystem::path& detail) {
  BudgetLedger ledger;
  const auto rows = read_delimited(summary);
  if (rows.size() != 2) throw ValidationError(summary.string() + ": expected one ledger row");
  expect_columns(summary, rows[1], 6);
  const auto& f = rows[1].fields;
  ledger.chunks = parse_size(f[0], "N");
  ledger.record(Provenance::seed(), parse_size(f[1], "B_seed"));
  ledger.record(Provenance::validation(), parse_size(f[2], "|V|"));
  ledger.truncated = f[5] == "1";
  const auto detail_rows = read_delimited(detail);
  for (std::size_t i = 1; i < detail_rows.size(); ++i) {
    const auto& row = detail_rows[i];
    expect_columns(detail, row, 3);
    ledger.record(Provenance::loop(parse_size(row.fields[0], "chunk"),
                                   parse_size(row.fields[1], "iteration")),
                  parse_size(row.fields[2], "queries"));
  }
  if (ledger.loop() != parse_size(f[3], "Loop") || ledger.total() != parse_size(f[4], "Total")) {
    throw ValidationError(summary.string() + ": ledger totals disagree with " + detail.string());
  }
  return ledger;
}

// ---------------------------------------------------------------------------

std::vector<CandidatePair> select_pairs(std::span<const ScoredPair> scored, std::size_t b,
                                        double confident_fraction, const PairSet& already_labeled,
                                        SelectionStrategy strategy, std::mt19937_64& rng) {
  std::vector<const ScoredPair*> eligible;
  PairSet seen;
  for (const auto& sp : scored) {
    if (already_labeled.contains(sp.pair)) continue;
    if (!seen.insert(sp.pair).second) continue;
    eligible.push_back(&sp);
  }
  if (eligible.size() <= b) {
    std::vector<CandidatePair> all;
    all.reserve(eligible.size());
    for (const auto* sp : eligible) all.push_back(sp->pair);
    return all;
  }

  std::vector<CandidatePair> out;
  out.reserve(b);
  if (strategy == SelectionStrategy::random) {
    for (std::size_t i = 0; i < b; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, eligible.size() - 1);
      std::swap(eligible[i], eligible[pick(rng)]);
      out.push_back(eligible[i]->pair);
    }
    return out;
  }

  auto by_confusion = [](const ScoredPair* a, const ScoredPair* b) {
    const double da = std::abs(a->prob - 0.5);
    const double db = std::abs(b->prob - 0.5);
    if (da != db) return da < db;
    return a->pair < b->pair;
  };

  PairSet taken;
  if (strategy == SelectionStrategy::hybrid) {
    const auto n_confident = std::min(
        b, static_cast<std::size_t>(std::ceil(confident_fraction * static_cast<double>(b) - 1e-9)));
    auto by_confidence = [](const ScoredPair* a, const ScoredPair* b) {
      if (a->prob != b->prob) return a->prob > b->prob;
      return a->pair < b->pair;
    };
    std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(n_confident),
                      eligible.end(), by_confidence);
    for (std::size_t i = 0; i < n_confident; ++i) {
      out.push_back(eligible[i]->pair);
      taken.insert(eligible[i]->pair);
    }
  }
  std::sort(eligible.begin(), eligible.end(), by_confusion);
  for (const auto* sp : eligible) {
    if (out.size() >= b) break;
    if (taken.contains(sp->pair)) continue;
    out.push_back(sp->pair);
  }
  return out;
}

bool early_stop(std::span<const double> f1_history, std::size_t patience, double min_delta) {
  if (patience == 0 || f1_history.size() <= patience) return false;
  const std::size_t first = f1_history.size() - patience;
  double best = *std::max_element(f1_history.begin(), f1_history.begin() + static_cast<std::ptrdiff_t>(first));
  for (std::size_t j = first; j < f1_history.size(); ++j) {
    if (f1_history[j] - best >= min_delta) return false;
    best = std::max(best, f1_history[j]);
  }
  return true;
}

ThresholdResult validation_score(std::span<const double> probs, std::span<const int> labels) {
  if (std::find(labels.begin(), labels.end(), 1) == labels.end()) {
    return ThresholdResult{};
  }
  return optimal_threshold(probs, labels);
}

void save_f1_history(std::span<const IterationRecord> history, const std::filesystem::path& path,
                     const std::vector<std::string>& header_comment) {
  auto out = open_output(path, header_comment);
  write_delimited_row(
      out, {"chunk", "iteration", "f1", "threshold", "training_size", "queried", "stopped"});
  for (const auto& r : history) {
    write_delimited_row(out, {std::to_string(r.chunk), std::to_string(r.iteration),
                              format_double(r.f1), format_double(r.threshold),
                              std::to_string(r.training_size), std::to_string(r.queried),
                              r.stopped ? "1" : "0"});
  }
}

std::vector<IterationRecord> load_f1_history(const std::filesystem::path& path) {
  std::vector<IterationRecord> out;
  const auto rows = read_delimited(path);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    expect_columns(path, rows[i], 7);
    const auto& f = rows[i].fields;
    IterationRecord r;
    r.chunk = parse_size(f[0], "chunk");
    r.iteration = parse_size(f[1], "iteration");
    r.f1 = parse_double(f[2], "f1");
    r.threshold = parse_double(f[3], "threshold");
    r.training_size = parse_size(f[4], "training_size");
    r.queried = parse_size(f[5], "queried");
    r.stopped = f[6] == "1";
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_both_classes(const LabeledSet& g) {
  if (g.positives() == 0 || g.positives() == g.size()) {
    throw SingleClassError("seed set of " + std::to_string(g.size()) + " labels holds only " +
                           (g.positives() == 0 ? "non-matches" : "matches") +
                           "; raise b_seed so both classes are present");
  }
}

TrainConfig seeded(const TrainConfig& base, std::uint64_t seed) {
  TrainConfig cfg = base;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TrainedArtifacts run_active_learning(const LoopConfig& config, const PairFeaturizer& featurizer,
                                     std::span<const CandidatePool> pools, Oracle& oracle,
                                     const IterationCallback& on_iteration) {
  config.validate();
  if (pools.empty()) throw ValidationError("run_active_learning: no candidate pools");

  TrainedArtifacts art;
  BudgetLedger& ledger = art.ledger;
  ledger.chunks = pools.size();
  ledger.hard_cap = oracle.budget().hard_cap();
  LabeledSet& g = art.training;
  LabeledSet& v = art.validation;
  PairSet labeled;
  std::mt19937_64 rng(mix_seed(config.seed, 0xa1));

  // Fixed validation set, stratified by pool.
  std::vector<std::size_t> sizes;
  for (const auto& pool : pools) sizes.push_back(pool.pairs.size());
  const auto allocation = validation_allocation(sizes, config.g_v, config.validation_cap);
  std::vector<CandidatePair> v_request;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    std::vector<std::size_t> order(pools[i].pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t j = 0; j < allocation[i]; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, order.size() - 1);
      std::swap(order[j], order[pick(rng)]);
      v_request.push_back(pools[i].pairs[order[j]]);
    }
  }
  {
    const auto answer = oracle.label(v_request, Provenance::validation());
    ledger.record(Provenance::validation(), answer.answered());
    if (answer.answered() < v_request.size()) {
      ledger.truncated = true;
      throw RunAborted(answer.timed_out ? "validation labeling timed out"
                                        : "label budget exhausted while building the validation set",
                       ledger);
    }
    for (std::size_t i = 0; i < v_request.size(); ++i) {
      v.add(v_request[i], *answer.labels[i], Provenance::validation());
      labeled.insert(v_request[i]);
    }
  }
  art.validation_hash = v.content_hash();
  const auto v_pairs = v.pairs();
  const auto v_labels = v.labels();
  const FeatureMatrix v_interaction = featurizer.interaction(v_pairs);

  // Seed set: uniform from the first pool, topped up from the next ones.
  std::vector<CandidatePair> s_request;
  for (const auto& pool : pools) {
    std::vector<CandidatePair> free;
    for (const auto& p : pool.pairs) {
      if (!labeled.contains(p)) free.push_back(p);
    }
    const std::size_t want = std::min(config.b_seed - s_request.size(), free.size());
    for (std::size_t j = 0; j < want; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, free.size() - 1);
      std::swap(free[j], free[pick(rng)]);
      s_request.push_back(free[j]);
    }
    if (s_request.size() >= config.b_seed) break;
  }
  {
    const auto answer = oracle.label(s_request, Provenance::seed());
    ledger.record(Provenance::seed(), answer.answered());
    if (answer.exhausted) ledger.truncated = true;
    for (std::size_t i = 0; i < s_request.size(); ++i) {
      if (!answer.labels[i]) continue;
      g.add(s_request[i], *answer.labels[i], Provenance::seed());
      labeled.insert(s_request[i]);
    }
  }
  check_both_classes(g);

  // Mini loop per chunk.
  for (const auto& pool : pools) {
    if (ledger.truncated) break;
    std::vector<double> f1s;
    for (std::size_t j = 1; j <= config.i_max; ++j) {
      const auto model = train(featurizer.interaction(g.pairs()), g.labels(),
                               seeded(config.train, mix_seed(config.seed, pool.chunk, j)));
      const auto score = validation_score(model.predict(v_interaction), v_labels);
      f1s.push_back(score.f1);

      IterationRecord rec;
      rec.chunk = pool.chunk;
      rec.iteration = j;
      rec.f1 = score.f1;
      rec.threshold = score.threshold;
      rec.training_size = g.size();

      std::vector<CandidatePair> unlabeled;
      if (!early_stop(f1s, config.patience, config.min_delta)) {
        for (const auto& p : pool.pairs) {
          if (!labeled.contains(p)) unlabeled.push_back(p);
        }
      }
      if (unlabeled.empty()) {
        rec.stopped = true;
        art.history.push_back(rec);
        if (on_iteration) on_iteration(rec);
        break;
      }

      const auto probs = model.predict(featurizer.interaction(unlabeled));
      std::vector<ScoredPair> scored(unlabeled.size());
      for (std::size_t t = 0; t < unlabeled.size(); ++t) scored[t] = {unlabeled[t], probs[t]};
      const auto query =
          select_pairs(scored, config.b, config.confident_fraction, labeled, config.strategy, rng);

      const auto prov = Provenance::loop(pool.chunk, j);
      const auto answer = oracle.label(query, prov);
      ledger.record(prov, answer.answered());
      for (std::size_t t = 0; t < query.size(); ++t) {
        if (!answer.labels[t]) continue;
        g.add(query[t], *answer.labels[t], prov);
        labeled.insert(query[t]);
      }
      rec.queried = answer.answered();
      if (answer.exhausted) {
        ledger.truncated = true;
        rec.stopped = true;
      }
      art.history.push_back(rec);
      if (on_iteration) on_iteration(rec);
      if (ledger.truncated) break;
    }
  }

  // Final classifiers on everything labeled for training.
  const auto g_pairs = g.pairs();
  const auto g_labels = g.labels();
  art.recall_model = train(featurizer.interaction(g_pairs), g_labels,
                           seeded(config.train, mix_seed(config.seed, 0xf1, 1)));
  const auto recall_score = validation_score(art.recall_model.predict(v_interaction), v_labels);
  art.recall_threshold = recall_score.threshold;
  art.recall_f1 = recall_score.f1;

  art.precision_model = train(featurizer.lexical(g_pairs), g_labels,
                              seeded(config.train, mix_seed(config.seed, 0xf1, 2)));
  const auto precision_score =
      validation_score(art.precision_model.predict(featurizer.lexical(v_pairs)), v_labels);
  art.precision_threshold = precision_score.threshold;
  art.precision_f1 = precision_score.f1;
  return art;
}

std::unordered_set<std::string> exclusion_set(const LabeledSet& training,
                                              const LabeledSet& validation) {
  std::unordered_set<std::string> out;
  for (const auto& e : training.entries()) out.insert(e.pair.r_id);
  for (const auto& e : validation.entries()) out.insert(e.pair.r_id);
  return out;
}

void save_labeled(const LabeledSet& training, const LabeledSet& validation,
                  const std::filesystem::path& path,
                  const std::vector<std::string>& header_comment) {
  auto out = open_output(path, header_comment);
  write_delimited_row(out, {"r_id", "s_id", "label", "provenance"});
  for (const auto* set : {&training, &validation}) {
    for (const auto& e : set->entries()) {
      write_delimited_row(out, {e.pair.r_id, e.pair.s_id, e.label ? "1" : "0",
                                to_string(e.provenance)});
    }
  }
}

std::pair<LabeledSet, LabeledSet> load_labeled(const std::filesystem::path& path) {
  std::pair<LabeledSet, LabeledSet> out;
  const auto rows = read_delimited(path);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    expect_columns(path, rows[i], 4);
    const auto& f = rows[i].fields;
    if (f[2] != "0" && f[2] != "1") {
      throw ValidationError(path.string() + ": row " + std::to_string(rows[i].line) +
                            ": label must be 0 or 1");
    }
    const auto prov = parse_provenance(f[3]);
    auto& target = prov.kind == Provenance::Kind::validation ? out.second : out.first;
    target.add({f[0], f[1]}, f[2] == "1" ? 1 : 0, prov);
  }
  return out;
}

}  // namespace aler
