#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lss/artifact_store.hpp"
#include "lss/errors.hpp"

namespace lss {

enum class TaskState { pending, claimed, executing, done, failed, reviewed };

inline std::string_view to_string(TaskState s) {
  switch (s) {
    case TaskState::pending: return "pending";
    case TaskState::claimed: return "claimed";
    case TaskState::executing: return "executing";
    case TaskState::done: return "done";
    case TaskState::failed: return "failed";
    case TaskState::reviewed: return "reviewed";
  }
  return "?";
}

struct Task {
  std::string task_id;      // artifact id of the task.md
  long round = 1;
  std::string intent_text;
  std::optional<std::string> assignee;
  TaskState state = TaskState::pending;
  std::vector<std::string> log;
  std::string result_digest;
};

enum class RoundVerdict { open, accepted, iterate };

struct Round {
  long round_number = 1;
  std::vector<std::string> task_ids;
  RoundVerdict verdict = RoundVerdict::open;
  std::vector<std::string> warnings;
};

struct ResultMemoryEntry {
  std::string task_id;
  std::string summary_text;
  long round = 1;
  bool success = true;
};

/// Reviewer predicate over the finished tasks' summaries; true = accept.
using Reviewer = std::function<bool(const std::vector<ResultMemoryEntry>&)>;

enum class TaskOp { claim, append_log, complete, review };

/// The legal-transition table of the task state machine.
inline bool transition_legal(TaskState state, TaskOp op) {
  switch (op) {
    case TaskOp::claim:
      return state == TaskState::pending;
    case TaskOp::append_log:
      return state == TaskState::claimed || state == TaskState::executing;
    case TaskOp::complete:
      return state == TaskState::executing;
    case TaskOp::review:
      return state == TaskState::done || state == TaskState::failed;
  }
  return false;
}

struct TaskPoolConfig {
  long per_round_cap = 10;
  long max_rounds = 10;
};

/// File-mediated task distribution: every task is a kind=task artifact and
/// every mutation lands as a palimpsest entry on it.
class TaskPool {
 public:
  explicit TaskPool(Store& store, TaskPoolConfig config = {})
      : store_(store), config_(config) {
    if (config_.per_round_cap < 1)
      fail(ErrorCode::EmptyRound, "per-round cap must be >= 1");
  }

  const TaskPoolConfig& config() const { return config_; }

  /// Materializes up to cap tasks as pending task.md artifacts; excess texts
  /// are rejected with a logged warning. Returns nothing once max_rounds is
  /// exhausted (the attempt itself is logged).
  Round* generate_round(const std::string& round_intent,
                        const std::vector<std::string>& task_texts) {
    std::lock_guard lock(mu_);
    if (task_texts.empty()) fail(ErrorCode::EmptyRound, "no task texts");
    if (static_cast<long>(rounds_.size()) >= config_.max_rounds) {
      global_warnings_.push_back("round limit " + std::to_string(config_.max_rounds) +
                                 " reached; round for '" + round_intent + "' rejected");
      return nullptr;
    }
    Round round;
    round.round_number = static_cast<long>(rounds_.size()) + 1;
    for (std::size_t i = 0; i < task_texts.size(); ++i) {
      if (static_cast<long>(i) >= config_.per_round_cap) {
        round.warnings.push_back("task text " + std::to_string(i) +
                                 " exceeds per-round cap, dropped");
        continue;
      }
      Task task;
      task.round = round.round_number;
      task.intent_text = task_texts[i];
      FrontMatter fm;
      fm.set("round", std::to_string(round.round_number));
      fm.set("state", "pending");
      const Artifact& art =
          store_.put_artifact(ArtifactKind::task, task_body(task), std::move(fm));
      task.task_id = art.id;
      round.task_ids.push_back(art.id);
      tasks_.emplace(art.id, std::move(task));
    }
    rounds_.push_back(std::move(round));
    return &rounds_.back();
  }

  const Task& task(const std::string& task_id) const {
    std::lock_guard lock(mu_);
    return find(task_id);
  }

  const std::vector<Round>& rounds() const { return rounds_; }
  const std::vector<ResultMemoryEntry>& result_memory() const { return memory_; }
  const std::vector<std::string>& global_warnings() const { return global_warnings_; }

  /// Exclusive claim; compare-and-set on state under the pool lock.
  const Task& claim_task(const std::string& task_id, const std::string& agent_id) {
    std::lock_guard lock(mu_);
    Task& t = find(task_id);
    if (!transition_legal(t.state, TaskOp::claim))
      fail(ErrorCode::AlreadyClaimed,
           "task '" + task_id + "' is " + std::string(to_string(t.state)));
    t.state = TaskState::claimed;
    t.assignee = agent_id;
    persist(t, "claimed by " + agent_id, agent_id);
    return t;
  }

  /// First append moves claimed -> executing.
  const Task& append_log(const std::string& task_id, const std::string& entry) {
    std::lock_guard lock(mu_);
    Task& t = find(task_id);
    if (!transition_legal(t.state, TaskOp::append_log))
      fail(ErrorCode::IllegalTransition,
           "cannot log against " + std::string(to_string(t.state)) + " task");
    if (t.state == TaskState::claimed) t.state = TaskState::executing;
    t.log.push_back(entry);
    persist(t, "execution log", t.assignee.value_or("worker"));
    return t;
  }

  const Task& complete_task(const std::string& task_id, bool success,
                            const std::string& summary) {
    std::lock_guard lock(mu_);
    Task& t = find(task_id);
    if (!transition_legal(t.state, TaskOp::complete))
      fail(ErrorCode::IllegalTransition,
           "cannot complete " + std::string(to_string(t.state)) + " task");
    t.state = success ? TaskState::done : TaskState::failed;
    t.result_digest = summary;
    memory_.push_back({t.task_id, summary, t.round, success});
    persist(t, success ? "completed" : "failed", t.assignee.value_or("worker"));
    return t;
  }

  /// Reads the round's summaries through the reviewer; accepted halts the
  /// workflow, iterate lets the caller generate the next round. All tasks
  /// move to reviewed either way.
  RoundVerdict review_round(long round_number, const Reviewer& reviewer) {
    std::lock_guard lock(mu_);
    if (round_number < 1 || round_number > static_cast<long>(rounds_.size()))
      fail(ErrorCode::NotFound, "round " + std::to_string(round_number));
    Round& round = rounds_[static_cast<std::size_t>(round_number) - 1];
    std::vector<ResultMemoryEntry> summaries;
    for (const std::string& id : round.task_ids) {
      const Task& t = find(id);
      if (!transition_legal(t.state, TaskOp::review))
        fail(ErrorCode::RoundIncomplete,
             "task '" + id + "' is " + std::string(to_string(t.state)));
      for (const ResultMemoryEntry& e : memory_)
        if (e.task_id == id) summaries.push_back(e);
    }
    bool accepted = reviewer(summaries);
    round.verdict = accepted ? RoundVerdict::accepted : RoundVerdict::iterate;
    for (const std::string& id : round.task_ids) {
      Task& t = find(id);
      t.state = TaskState::reviewed;
      persist(t, "reviewed", "reviewer");
    }
    if (!accepted && static_cast<long>(rounds_.size()) >= config_.max_rounds) {
      global_warnings_.push_back("iterate verdict at round " +
                                 std::to_string(round_number) +
                                 " but round limit reached; forced halt");
      round.verdict = RoundVerdict::accepted;  // forced halt
      return RoundVerdict::accepted;
    }
    return round.verdict;
  }

  /// ResultMemory file: append-only `round \t task_id \t status \t summary`.
  std::string serialize_result_memory() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const ResultMemoryEntry& e : memory_) {
      out += std::to_string(e.round);
      out += '\t';
      out += e.task_id;
      out += '\t';
      out += e.success ? "done" : "failed";
      out += '\t';
      out += e.summary_text;
      out += '\n';
    }
    return out;
  }

 private:
  Task& find(const std::string& task_id) {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) fail(ErrorCode::NotFound, "task '" + task_id + "'");
    return it->second;
  }
  const Task& find(const std::string& task_id) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) fail(ErrorCode::NotFound, "task '" + task_id + "'");
    return it->second;
  }

  static std::string task_body(const Task& t) {
    std::string body = "## Intent\n" + t.intent_text + "\n## Log\n";
    for (const std::string& entry : t.log) body += entry + "\n";
    body += "## Result\n" + t.result_digest + "\n";
    return body;
  }

  void persist(const Task& t, const std::string& rationale, const std::string& author) {
    store_.revise_artifact(t.task_id, task_body(t), rationale, author);
    // state mirrored in front matter for readers of the raw file; the
    // palimpsest history carries the body audit trail
    store_.set_front_matter(t.task_id, "state", std::string(to_string(t.state)));
    if (t.assignee) store_.set_front_matter(t.task_id, "assignee", *t.assignee);
  }

  Store& store_;
  TaskPoolConfig config_;
  mutable std::recursive_mutex mu_;
  std::map<std::string, Task> tasks_;
  std::vector<Round> rounds_;
  std::vector<ResultMemoryEntry> memory_;
  std::vector<std::string> global_warnings_;
};

}  // namespace lss
