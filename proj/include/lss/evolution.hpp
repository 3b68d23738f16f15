#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lss/agent.hpp"
#include "lss/artifact_store.hpp"
#include "lss/errors.hpp"

namespace lss {

// --- sandbox ----------------------------------------------------------------

/// Copy-on-write overlay over a base store (or a parent sandbox). Reads fall
/// through to the base until an artifact is overlaid; writes land only in the
/// overlay. The base is never touched unless select_merge commits.
class SandboxEnv : public StoreInterface {
 public:
  explicit SandboxEnv(StoreInterface& base)
      : base_(&base), depth_(1), step_(base.current_step()) {
    if (auto* parent = dynamic_cast<SandboxEnv*>(&base)) depth_ = parent->depth() + 1;
  }

  // nesting over another sandbox; keeps the copy constructor from winning
  // overload resolution for lvalue sandboxes
  explicit SandboxEnv(SandboxEnv& base)
      : SandboxEnv(static_cast<StoreInterface&>(base)) {}

  SandboxEnv(const SandboxEnv&) = delete;
  SandboxEnv& operator=(const SandboxEnv&) = delete;

  int depth() const { return depth_; }

  Artifact& put_artifact(ArtifactKind kind, std::string content,
                         FrontMatter front_matter,
                         std::string explicit_id = {}) override {
    std::string id = explicit_id.empty()
                         ? "sbx" + std::to_string(depth_) + "-" +
                               std::string(to_string(kind)) + "-" +
                               std::to_string(++id_seq_)
                         : std::move(explicit_id);
    if (overlay_.count(id) || base_->has_artifact(id))
      fail(ErrorCode::IdCollision, "artifact id '" + id + "' already exists");
    Artifact a;
    a.id = id;
    a.kind = kind;
    a.content = std::move(content);
    a.front_matter = std::move(front_matter);
    a.front_matter.set("kind", std::string(to_string(kind)));
    if (!a.front_matter.has("name")) a.front_matter.set("name", id);
    a.created_step = a.last_used_step = ++step_;
    PalimpsestEntry e;
    e.version = 1;
    e.rationale = "created";
    e.content_after = a.content;
    e.author = "sandbox";
    e.step = a.created_step;
    a.history.push_back(std::move(e));
    auto [it, _] = overlay_.emplace(id, std::move(a));
    return it->second;
  }

  const Artifact& get_artifact(const std::string& id) const override {
    auto it = overlay_.find(id);
    if (it != overlay_.end()) return it->second;
    return base_->get_artifact(id);
  }

  bool has_artifact(const std::string& id) const override {
    return overlay_.count(id) > 0 || base_->has_artifact(id);
  }

  const PalimpsestEntry& revise_artifact(const std::string& id, std::string new_content,
                                         std::string rationale, std::string author,
                                         std::uint64_t expected_version = 0) override {
    if (rationale.empty())
      fail(ErrorCode::RationaleRequired, "revision of '" + id + "' needs a rationale");
    Artifact& a = overlaid(id);
    if (expected_version != 0 && expected_version != a.current_version())
      fail(ErrorCode::ConcurrentEdit, "artifact '" + id + "' moved under the caller");
    PalimpsestEntry e;
    e.version = a.current_version() + 1;
    e.rationale = std::move(rationale);
    e.content_before = a.content;
    e.content_after = new_content;
    e.author = std::move(author);
    e.step = ++step_;
    a.content = std::move(new_content);
    a.history.push_back(std::move(e));
    return a.history.back();
  }

  const Artifact& rollback_artifact(const std::string& id, std::uint64_t target_version,
                                    std::string author = "sandbox") override {
    Artifact& a = overlaid(id);
    if (target_version < 1 || target_version > a.current_version())
      fail(ErrorCode::VersionNotFound,
           "artifact '" + id + "' has no version " + std::to_string(target_version));
    PalimpsestEntry e;
    e.version = a.current_version() + 1;
    e.rationale = "rollback to v" + std::to_string(target_version);
    e.content_before = a.content;
    e.content_after = a.history[target_version - 1].content_after;
    e.author = std::move(author);
    e.step = ++step_;
    a.content = e.content_after;
    a.history.push_back(std::move(e));
    return a;
  }

  const Artifact& record_use(const std::string& id, bool validated,
                             const std::string& subject = "sandbox") override {
    Artifact& a = overlaid(id);
    a.last_used_step = ++step_;
    log_.append(BindingKind::tool_call, subject, a.id,
                validated ? "validated use" : "unvalidated use", std::nullopt, step_,
                validated ? BindingOutcome::validated : BindingOutcome::failed);
    if (validated) ++a.use_count;
    return a;
  }

  std::vector<std::string> artifact_ids() const override {
    std::vector<std::string> ids = base_->artifact_ids();
    for (const auto& [id, _] : overlay_)
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  BindingLog& bindings() override { return log_; }
  std::uint64_t current_step() const override { return step_; }
  std::uint64_t advance_step() override { return ++step_; }

 private:
  Artifact& overlaid(const std::string& id) {
    auto it = overlay_.find(id);
    if (it != overlay_.end()) return it->second;
    const Artifact& base = base_->get_artifact(id);  // NotFound propagates
    auto [nit, _] = overlay_.emplace(id, base);
    return nit->second;
  }

  StoreInterface* base_;
  std::map<std::string, Artifact> overlay_;
  BindingLog log_;
  int depth_;
  std::uint64_t step_;
  std::uint64_t id_seq_ = 0;
};

inline SandboxEnv open_sandbox(StoreInterface& base) { return SandboxEnv(base); }

// --- patches ----------------------------------------------------------------

enum class PatchStatus { proposed, sandboxed, merged, rejected };

struct Patch {
  std::uint64_t patch_id = 0;
  std::string target_artifact;
  std::string hypothesis;  // what behavior the edit should change
  std::string edit;        // replacement body
  std::vector<std::uint64_t> rollback_chain;
  PatchStatus status = PatchStatus::proposed;
};

struct FitnessReport {
  std::uint64_t candidate_id = 0;
  std::string task_suite_id;
  double score = 0.0;  // fraction of replay checks passed
  long token_cost = 0;
  bool verdict_pass = false;
  std::optional<double> control_score;  // A/B sibling, when run
};

inline std::uint64_t g_patch_seq = 0;

inline Patch propose_patch(const StoreInterface& store, const std::string& target,
                           std::string new_body, std::string hypothesis) {
  if (hypothesis.empty())
    fail(ErrorCode::HypothesisRequired, "patch against '" + target + "'");
  const Artifact& a = store.get_artifact(target);
  Patch p;
  p.patch_id = ++g_patch_seq;
  p.target_artifact = target;
  p.hypothesis = std::move(hypothesis);
  p.edit = std::move(new_body);
  p.rollback_chain = {a.current_version()};
  return p;
}

// --- replay tasks -----------------------------------------------------------

/// A scripted task: replay the transcript against the store and check the
/// expectation. View-scoped expectations see projected artifact bodies, so a
/// patch changes the outcome even though the transcript is fixed.
struct ReplayTask {
  enum class Where { output, view };
  std::string name;
  std::string intent;
  std::vector<Output> transcript;
  std::string expect_substring;
  Where expect_where = Where::output;
  long budget = 512;
  long max_steps = 8;
};

inline bool replay_task_passed(const Trajectory& trajectory, const ReplayTask& task) {
  for (const StepRecord& s : trajectory.steps) {
    const std::string haystack =
        task.expect_where == ReplayTask::Where::output ? s.output : s.view.to_text();
    if (haystack.find(task.expect_substring) != std::string::npos) return true;
  }
  return false;
}

inline bool run_replay_task(StoreInterface& store, const ReplayTask& task) {
  AgentRuntime runtime(store);
  AgentInstance& inst = runtime.create_instance("replay-" + task.name);
  ScriptedReasoner reasoner(task.transcript);
  Intent intent{task.intent, Intent::Source::user, std::nullopt};
  RunCycleOptions opts;
  opts.budget = task.budget;
  opts.max_steps = task.max_steps;
  runtime.run_cycle(inst, intent, reasoner, opts);
  return replay_task_passed(inst.trajectory, task);
}

struct EvaluateOptions {
  double pass_threshold = 1.0;
  bool ab_mode = false;
  std::string task_suite_id = "suite";
};

/// Applies the patch in the sandbox overlay and replays the suite there; in
/// A/B mode the same suite also runs on an unpatched sibling of the same base.
inline FitnessReport evaluate_in_sandbox(SandboxEnv& sandbox, StoreInterface& base,
                                         Patch& patch,
                                         const std::vector<ReplayTask>& suite,
                                         const EvaluateOptions& opts = {}) {
  if (suite.empty()) fail(ErrorCode::EmptySuite, "no replay tasks");
  sandbox.revise_artifact(patch.target_artifact, patch.edit,
                          "patch: " + patch.hypothesis, "evolver");
  patch.status = PatchStatus::sandboxed;
  FitnessReport report;
  report.candidate_id = patch.patch_id;
  report.task_suite_id = opts.task_suite_id;
  long passed = 0;
  for (const ReplayTask& task : suite) {
    SandboxEnv task_env(sandbox);  // keep task side effects out of the patch overlay
    if (run_replay_task(task_env, task)) ++passed;
    for (const Output& o : task.transcript) report.token_cost += estimate_tokens(o.text);
  }
  report.score = static_cast<double>(passed) / static_cast<double>(suite.size());
  report.verdict_pass = report.score >= opts.pass_threshold;
  if (opts.ab_mode) {
    SandboxEnv control(base);
    long control_passed = 0;
    for (const ReplayTask& task : suite) {
      SandboxEnv task_env(control);
      if (run_replay_task(task_env, task)) ++control_passed;
    }
    report.control_score =
        static_cast<double>(control_passed) / static_cast<double>(suite.size());
  }
  return report;
}

struct MergeOptions {
  double pass_threshold = 1.0;
  long merge_cap = 5;  // hard per-round limit
};

/// Gated merge back into the persistent store, in patch_id order. A patch
/// merges iff its best report clears the threshold (and beats its A/B control
/// when one was run). Losers are rejected; their sandboxes are discarded.
inline std::vector<std::uint64_t> select_merge(
    Store& store, std::vector<std::pair<Patch*, FitnessReport>>& patches_with_reports,
    const MergeOptions& opts = {}) {
  std::sort(patches_with_reports.begin(), patches_with_reports.end(),
            [](const auto& x, const auto& y) { return x.first->patch_id < y.first->patch_id; });
  std::vector<std::uint64_t> merged;
  for (auto& [patch, report] : patches_with_reports) {
    bool pass = report.score >= opts.pass_threshold;
    if (pass && report.control_score && report.score < *report.control_score) pass = false;
    if (!pass) {
      patch->status = PatchStatus::rejected;
      continue;
    }
    if (static_cast<long>(merged.size()) >= opts.merge_cap) break;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", report.score);
    store.revise_artifact(patch->target_artifact, patch->edit,
                          patch->hypothesis + " | score=" + buf, "evolver");
    patch->status = PatchStatus::merged;
    merged.push_back(patch->patch_id);
  }
  return merged;
}

// --- genetic round ----------------------------------------------------------

enum class MutationOp { drop_step, swap_tool_return, inject_fragment };

struct GeneticOptions {
  std::size_t population_size = 4;
  std::size_t survivors = 1;
  std::vector<MutationOp> mutation_ops = {MutationOp::drop_step,
                                          MutationOp::swap_tool_return,
                                          MutationOp::inject_fragment};
  std::uint64_t seed = 0;
  std::vector<Output> alternates;  // swap pool for swap_tool_return
  std::vector<Output> fragments;   // inject pool for inject_fragment
  long fork_budget = 512;
};

struct GeneticCandidate {
  std::size_t index = 0;
  double score = 0.0;
  long token_cost = 0;
  std::vector<ReplayTask> mutated_suite;
};

struct GeneticOutcome {
  std::vector<GeneticCandidate> candidates;
  std::vector<std::size_t> survivor_indices;        // by candidate index
  std::vector<std::string> trace_artifact_ids;      // distilled survivor lessons
};

namespace detail {

inline void mutate_suite(std::vector<ReplayTask>& suite, MutationOp op,
                         std::mt19937_64& rng, const GeneticOptions& opts) {
  if (suite.empty()) return;
  ReplayTask& task = suite[rng() % suite.size()];
  if (task.transcript.empty() && op == MutationOp::drop_step) return;
  switch (op) {
    case MutationOp::drop_step: {
      std::size_t i = rng() % task.transcript.size();
      task.transcript.erase(task.transcript.begin() + static_cast<long>(i));
      break;
    }
    case MutationOp::swap_tool_return: {
      if (opts.alternates.empty() || task.transcript.empty()) return;
      std::size_t i = rng() % task.transcript.size();
      task.transcript[i] = opts.alternates[rng() % opts.alternates.size()];
      break;
    }
    case MutationOp::inject_fragment: {
      if (opts.fragments.empty()) return;
      std::size_t i = rng() % (task.transcript.size() + 1);
      task.transcript.insert(task.transcript.begin() + static_cast<long>(i),
                             opts.fragments[rng() % opts.fragments.size()]);
      break;
    }
  }
}

}  // namespace detail

/// One agent-level selection round: fork the baseline population_size times,
/// apply one seeded random mutation to each candidate's replay suite, score
/// every candidate in its own sandbox, keep the top survivors, and distill
/// each survivor's novel outputs into a trace artifact. Everything a
/// non-survivor touched is discarded with its sandbox.
inline GeneticOutcome genetic_round(Store& store, const Trajectory& baseline,
                                    const std::vector<ReplayTask>& task_suite,
                                    const GeneticOptions& opts) {
  if (opts.mutation_ops.empty()) fail(ErrorCode::NoMutations, "no mutation ops");
  if (opts.population_size < opts.survivors || opts.survivors < 1)
    fail(ErrorCode::InvalidK, "population must be >= survivors >= 1");
  std::mt19937_64 rng(opts.seed);
  GeneticOutcome outcome;
  std::vector<std::vector<std::string>> candidate_outputs(opts.population_size);
  for (std::size_t c = 0; c < opts.population_size; ++c) {
    GeneticCandidate cand;
    cand.index = c;
    cand.mutated_suite = task_suite;
    MutationOp op = opts.mutation_ops[rng() % opts.mutation_ops.size()];
    detail::mutate_suite(cand.mutated_suite, op, rng, opts);
    SandboxEnv sandbox(store);
    AgentRuntime runtime(sandbox);
    AgentInstance& seed_inst = runtime.create_instance("baseline");
    seed_inst.trajectory = baseline;
    AgentInstance& child = runtime.fork_single(seed_inst, "evolve", opts.fork_budget);
    long passed = 0;
    for (const ReplayTask& task : cand.mutated_suite) {
      SandboxEnv task_env(sandbox);
      AgentRuntime task_runtime(task_env);
      AgentInstance& inst = task_runtime.create_instance(child.instance_id + "-" + task.name);
      inst.trajectory = child.trajectory;
      ScriptedReasoner reasoner(task.transcript);
      RunCycleOptions rc;
      rc.budget = task.budget;
      rc.max_steps = task.max_steps;
      task_runtime.run_cycle(inst, {task.intent, Intent::Source::self, std::nullopt},
                             reasoner, rc);
      for (const StepRecord& s : inst.trajectory.steps) {
        cand.token_cost += estimate_tokens(s.output);
        candidate_outputs[c].push_back(s.output);
      }
      if (replay_task_passed(inst.trajectory, task)) ++passed;
    }
    cand.score = task_suite.empty()
                     ? 0.0
                     : static_cast<double>(passed) /
                           static_cast<double>(cand.mutated_suite.size());
    outcome.candidates.push_back(std::move(cand));
  }
  std::vector<std::size_t> order(opts.population_size);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (outcome.candidates[x].score != outcome.candidates[y].score)
      return outcome.candidates[x].score > outcome.candidates[y].score;
    return x < y;
  });
  order.resize(opts.survivors);
  std::sort(order.begin(), order.end());
  outcome.survivor_indices = order;
  // distill: novel output lines (absent from the baseline) become a trace
  std::set<std::string> baseline_lines;
  for (const StepRecord& s : baseline.steps) baseline_lines.insert(s.output);
  for (std::size_t idx : outcome.survivor_indices) {
    std::string body;
    for (const std::string& line : candidate_outputs[idx])
      if (!baseline_lines.count(line) && !line.empty()) body += line + "\n";
    FrontMatter fm;
    fm.set("name", "survivor-" + std::to_string(idx));
    const Artifact& trace =
        store.put_artifact(ArtifactKind::trace, body, std::move(fm));
    outcome.trace_artifact_ids.push_back(trace.id);
  }
  return outcome;
}

// --- evolve.md --------------------------------------------------------------

struct EvolveSpec {
  long cap = 5;
  double pass_threshold = 1.0;
  std::vector<std::string> mutation_ops;
  std::string task_suite;
};

/// evolve.md schema: `cap:`, `pass_threshold:`, `mutation_ops:`, `task_suite:`.
inline EvolveSpec parse_evolve_spec(const std::string& body) {
  EvolveSpec spec;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t eol = body.find('\n', pos);
    if (eol == std::string::npos) eol = body.size();
    std::string line = body.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.starts_with("cap: ")) spec.cap = std::stol(line.substr(5));
    else if (line.starts_with("pass_threshold: "))
      spec.pass_threshold = std::stod(line.substr(16));
    else if (line.starts_with("mutation_ops: ")) {
      std::string ops = line.substr(14);
      std::size_t p = 0;
      while (p < ops.size()) {
        std::size_t sp = ops.find(' ', p);
        if (sp == std::string::npos) sp = ops.size();
        if (sp > p) spec.mutation_ops.push_back(ops.substr(p, sp - p));
        p = sp + 1;
      }
    } else if (line.starts_with("task_suite: "))
      spec.task_suite = line.substr(12);
  }
  return spec;
}

}  // namespace lss
