#pragma once

// Labeling authority: a budgeted ground-truth oracle for experiments and a
// task queue that lets humans answer over HTTP.

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aler/ingest.hpp"
#include "aler/types.hpp"

namespace aler {

/// Counts answered queries against an optional hard cap. Thread-safe.
class OracleBudget {
 public:
  explicit OracleBudget(std::optional<std::size_t> hard_cap = std::nullopt);

  /// Consumes one unit; false (and no change) when the cap is reached.
  bool try_consume();
  std::size_t consumed() const;
  std::optional<std::size_t> hard_cap() const { return hard_cap_; }
  std::optional<std::size_t> remaining() const;
  bool exhausted() const;

 private:
  mutable std::mutex mu_;
  std::optional<std::size_t> hard_cap_;
  std::size_t consumed_ = 0;
};

/// Labels for one request batch, aligned with the request. A missing entry
/// means the pair was not answered (budget exhausted or timeout).
struct OracleAnswer {
  std::vector<std::optional<int>> labels;
  bool exhausted = false;
  bool timed_out = false;

  std::size_t answered() const;
};

class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual OracleAnswer label(std::span<const CandidatePair> pairs, const Provenance& provenance) = 0;
  virtual const OracleBudget& budget() const = 0;
};

/// Perfect oracle backed by a ground-truth match set.
class GroundTruthOracle : public Oracle {
 public:
  GroundTruthOracle(const MatchSet& truth, OracleBudget& budget);

  /// 1 iff the pair is in the truth set. Throws BudgetExhausted (consuming
  /// nothing) once the cap is reached.
  int label_one(const CandidatePair& pair);

  /// Labels in order until the budget runs out.
  OracleAnswer label(std::span<const CandidatePair> pairs, const Provenance& provenance) override;
  const OracleBudget& budget() const override { return *budget_; }

 private:
  const MatchSet* truth_;
  OracleBudget* budget_;
};

struct LabelTask {
  enum class Status { pending, answered };

  std::uint64_t id = 0;
  CandidatePair pair;
  std::vector<std::pair<std::string, std::string>> r_attributes;
  std::vector<std::pair<std::string, std::string>> s_attributes;
  Status status = Status::pending;
  std::optional<int> answer;
  Provenance provenance;
};

struct SubmitResult {
  std::size_t consumed = 0;
  std::optional<std::size_t> remaining;
};

class TaskNotFound : public Error {
 public:
  using Error::Error;
};

class TaskAlreadyAnswered : public Error {
 public:
  using Error::Error;
};

/// Concurrent human-labeling queue. Task ids start at 1 and increase
/// monotonically. Answered tasks are immutable; each successful submit
/// consumes exactly one unit of the shared budget.
class LabelQueue {
 public:
  explicit LabelQueue(OracleBudget& budget);

  /// Creates pending tasks carrying both records' attributes. Throws
  /// ValidationError naming a pair that is already pending (nothing is
  /// enqueued in that case).
  std::vector<std::uint64_t> enqueue(std::span<const CandidatePair> pairs,
                                     const RecordCollection& records_r,
                                     const RecordCollection& records_s,
                                     const Provenance& provenance);

  /// Up to `limit` pending tasks in ascending id order.
  std::vector<LabelTask> pending(std::size_t limit) const;
  std::optional<LabelTask> task(std::uint64_t id) const;

  /// Throws TaskNotFound, TaskAlreadyAnswered, BudgetExhausted, or
  /// ValidationError for an answer other than 0/1. Failed submits leave the
  /// budget untouched.
  SubmitResult submit(std::uint64_t id, int answer);

  /// Blocks until every listed task is answered, the budget is exhausted, or
  /// `timeout` elapses (nullopt waits indefinitely). Unanswered tasks are
  /// withdrawn from the queue before returning.
  OracleAnswer wait(std::span<const std::uint64_t> ids,
                    std::optional<std::chrono::milliseconds> timeout);

  std::size_t answered_count() const;
  const OracleBudget& budget() const { return *budget_; }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  OracleBudget* budget_;
  std::map<std::uint64_t, LabelTask> tasks_;
  PairSet pending_pairs_;
  std::uint64_t next_id_ = 1;
  std::size_t answered_ = 0;
};

/// Oracle that publishes pairs to a LabelQueue and waits for humans.
class HumanOracle : public Oracle {
 public:
  HumanOracle(LabelQueue& queue, const RecordCollection& records_r,
              const RecordCollection& records_s,
              std::optional<std::chrono::milliseconds> timeout = std::nullopt);

  OracleAnswer label(std::span<const CandidatePair> pairs, const Provenance& provenance) override;
  const OracleBudget& budget() const override { return queue_->budget(); }

 private:
  LabelQueue* queue_;
  const RecordCollection* records_r_;
  const RecordCollection* records_s_;
  std::optional<std::chrono::milliseconds> timeout_;
};

/// Live run status shared between the training loop and the HTTP service.
class RunStatusBoard {
 public:
  struct Snapshot {
    std::size_t chunk = 0;
    std::size_t iteration = 0;
    std::vector<double> f1_history;
    std::string phase = "idle";
  };

  void update(std::size_t chunk, std::size_t iteration, std::optional<double> f1);
  void set_phase(std::string phase);
  Snapshot snapshot() const;

 private:
  mutable std::mutex mu_;
  Snapshot state_;
};

}  // namespace aler
