#include "aler/oracle.hpp"

#include <algorithm>

namespace aler {

OracleBudget::OracleBudget(std::optional<std::size_t> hard_cap) : hard_cap_(hard_cap) {
  if (hard_cap_ && *hard_cap_ == 0) throw ValidationError("budget hard cap must be positive");
}

bool OracleBudget::try_consume() {
  std::lock_guard lock(mu_);
  if (hard_cap_ && consumed_ >= *hard_cap_) return false;
  ++consumed_;
  return true;
}

std::size_t OracleBudget::consumed() const {
  std::lock_guard lock(mu_);
  return consumed_;
}

std::optional<std::size_t> OracleBudget::remaining() const {
  std::lock_guard lock(mu_);
  if (!hard_cap_) return std::nullopt;
  return *hard_cap_ - consumed_;
}

bool OracleBudget::exhausted() const {
  std::lock_guard lock(mu_);
  return hard_cap_ && consumed_ >= *hard_cap_;
}

std::size_t OracleAnswer::answered() const {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(), [](const auto& l) { return l.has_value(); }));
}

GroundTruthOracle::GroundTruthOracle(const MatchSet& truth, OracleBudget& budget)
    : truth_(&truth), budget_(&budget) {}

int GroundTruthOracle::label_one(const CandidatePair& pair) {
  if (!budget_->try_consume()) throw BudgetExhausted("oracle budget exhausted");
  return truth_->contains(pair) ? 1 : 0;
}

OracleAnswer GroundTruthOracle::label(std::span<const CandidatePair> pairs, const Provenance&) {
  OracleAnswer answer;
  answer.labels.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!budget_->try_consume()) {
      answer.exhausted = true;
      break;
    }
    answer.labels[i] = truth_->contains(pairs[i]) ? 1 : 0;
  }
  return answer;
}

// ---------------------------------------------------------------------------

LabelQueue::LabelQueue(OracleBudget& budget) : budget_(&budget) {}

std::vector<std::uint64_t> LabelQueue::enqueue(std::span<const CandidatePair> pairs,
                                               const RecordCollection& records_r,
                                               const RecordCollection& records_s,
                                               const Provenance& provenance) {
  std::vector<LabelTask> staged;
  staged.reserve(pairs.size());
  PairSet batch;
  for (const auto& pair : pairs) {
    LabelTask task;
    task.pair = pair;
    task.r_attributes = records_r.attributes(records_r.at(pair.r_id));
    task.s_attributes = records_s.attributes(records_s.at(pair.s_id));
    task.provenance = provenance;
    if (!batch.insert(pair).second) {
      throw ValidationError("pair " + to_string(pair) + " appears twice in one enqueue");
    }
    staged.push_back(std::move(task));
  }

  std::lock_guard lock(mu_);
  for (const auto& t : staged) {
    if (pending_pairs_.contains(t.pair)) {
      throw ValidationError("pair " + to_string(t.pair) + " is already pending");
    }
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(staged.size());
  for (auto& t : staged) {
    t.id = next_id_++;
    ids.push_back(t.id);
    pending_pairs_.insert(t.pair);
    tasks_.emplace(t.id, std::move(t));
  }
  cv_.notify_all();
  return ids;
}

std::vector<LabelTask> LabelQueue::pending(std::size_t limit) const {
  std::lock_guard lock(mu_);
  std::vector<LabelTask> out;
  for (const auto& [id, task] : tasks_) {
    if (out.size() >= limit) break;
    if (task.status == LabelTask::Status::pending) out.push_back(task);
  }
  return out;
}

std::optional<LabelTask> LabelQueue::task(std::uint64_t id) const {
  std::lock_guard lock(mu_);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) return std::nullopt;
  return it->second;
}

SubmitResult LabelQueue::submit(std::uint64_t id, int answer) {
  if (answer != 0 && answer != 1) throw ValidationError("label must be 0 or 1");
  std::lock_guard lock(mu_);
  auto it = tasks_.find(id);
  if (it == tasks_.end()) throw TaskNotFound("task " + std::to_string(id) + " not found");
  LabelTask& task = it->second;
  if (task.status == LabelTask::Status::answered) {
    throw TaskAlreadyAnswered("task " + std::to_string(id) + " already answered");
  }
  if (!budget_->try_consume()) {
    cv_.notify_all();
    throw BudgetExhausted("label budget exhausted");
  }
  task.status = LabelTask::Status::answered;
  task.answer = answer;
  pending_pairs_.erase(task.pair);
  ++answered_;
  cv_.notify_all();
  return {budget_->consumed(), budget_->remaining()};
}

OracleAnswer LabelQueue::wait(std::span<const std::uint64_t> ids,
                              std::optional<std::chrono::milliseconds> timeout) {
  std::unique_lock lock(mu_);
  auto all_answered = [&] {
    return std::all_of(ids.begin(), ids.end(), [&](std::uint64_t id) {
      auto it = tasks_.find(id);
      return it != tasks_.end() && it->second.status == LabelTask::Status::answered;
    });
  };
  auto done = [&] { return all_answered() || budget_->exhausted(); };

  bool timed_out = false;
  if (timeout) {
    timed_out = !cv_.wait_for(lock, *timeout, done);
  } else {
    cv_.wait(lock, done);
  }

  OracleAnswer answer;
  answer.labels.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto it = tasks_.find(ids[i]);
    if (it == tasks_.end()) continue;
    if (it->second.status == LabelTask::Status::answered) {
      answer.labels[i] = it->second.answer;
    } else {
      pending_pairs_.erase(it->second.pair);
      tasks_.erase(it);
    }
  }
  answer.timed_out = timed_out;
  answer.exhausted = answer.answered() < ids.size() && budget_->exhausted();
  return answer;
}

std::size_t LabelQueue::answered_count() const {
  std::lock_guard lock(mu_);
  return answered_;
}

HumanOracle::HumanOracle(LabelQueue& queue, const RecordCollection& records_r,
                         const RecordCollection& records_s,
                         std::optional<std::chrono::milliseconds> timeout)
    : queue_(&queue), records_r_(&records_r), records_s_(&records_s), timeout_(timeout) {}

OracleAnswer HumanOracle::label(std::span<const CandidatePair> pairs, const Provenance& provenance) {
  if (pairs.empty()) return {};
  if (queue_->budget().exhausted()) {
    OracleAnswer answer;
    answer.labels.resize(pairs.size());
    answer.exhausted = true;
    return answer;
  }
  const auto ids = queue_->enqueue(pairs, *records_r_, *records_s_, provenance);
  return queue_->wait(ids, timeout_);
}

// ---------------------------------------------------------------------------

void RunStatusBoard::update(std::size_t chunk, std::size_t iteration, std::optional<double> f1) {
  std::lock_guard lock(mu_);
  state_.chunk = chunk;
  state_.iteration = iteration;
  if (f1) state_.f1_history.push_back(*f1);
}

void RunStatusBoard::set_phase(std::string phase) {
  std::lock_guard lock(mu_);
  state_.phase = std::move(phase);
}

RunStatusBoard::Snapshot RunStatusBoard::snapshot() const {
  std::lock_guard lock(mu_);
  return state_;
}

}  // namespace aler
