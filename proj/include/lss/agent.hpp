#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lss/artifact_store.hpp"
#include "lss/binding.hpp"
#include "lss/digest.hpp"
#include "lss/errors.hpp"
#include "lss/view.hpp"

namespace lss {

struct Intent {
  enum class Source { user, agent, self };
  std::string text;
  Source source = Source::user;
  std::optional<std::string> target;
};

struct Output {
  std::string text;
  std::string environment_feedback;
  std::vector<std::string> actions;  // declared side effects, one per entry
};

enum class PredicateKind {
  required_output_present,
  budget_exhausted,
  signal_received,
  max_steps,
};

struct EndPredicate {
  PredicateKind kind = PredicateKind::max_steps;
  std::string text_param;
  long number_param = 0;
};

struct EndCriteria {
  std::vector<EndPredicate> predicates;  // disjunction
  std::vector<std::string> termination_hooks;
};

enum class AgentStatus { active, terminated };

struct AgentInstance {
  std::string instance_id;
  Trajectory trajectory;
  EndCriteria end_criteria;
  std::vector<std::string> parent_ids;
  AgentStatus status = AgentStatus::active;
  std::set<std::string> signals;
  bool hooks_fired = false;
};

struct AgentClassSignature {
  std::uint64_t view_sequence_digest = 0;
  bool operator==(const AgentClassSignature&) const = default;
};

/// Identity induced by the ordered view sequence alone; intents and outputs
/// never contribute.
inline AgentClassSignature class_signature(const AgentInstance& instance) {
  Fnv64 d;
  for (const StepRecord& s : instance.trajectory.steps) d.mix(s.view.to_text());
  return {d.value()};
}

// --- reasoner contract -----------------------------------------------------

class Reasoner {
 public:
  virtual ~Reasoner() = default;
  virtual Output respond(const std::string& view_text, const std::string& intent_text,
                         const std::string& history_digest) = 0;
};

/// Extractive fallback: answers with the view line sharing the most tokens
/// with the intent. Fully deterministic.
class LexicalReasoner : public Reasoner {
 public:
  Output respond(const std::string& view_text, const std::string& intent_text,
                 const std::string&) override {
    auto intent_tokens = token_set(intent_text);
    std::string best;
    long best_score = -1;
    std::size_t pos = 0;
    while (pos < view_text.size()) {
      std::size_t eol = view_text.find('\n', pos);
      if (eol == std::string::npos) eol = view_text.size();
      std::string line = view_text.substr(pos, eol - pos);
      pos = eol + 1;
      if (line.starts_with("### ")) continue;
      long score = overlap_score(intent_tokens, line);
      if (score > best_score) {
        best_score = score;
        best = line;
      }
    }
    return {best, "", {}};
  }
};

/// Replays a fixed transcript of canned outputs keyed by call order.
/// Bit-deterministic given the same transcript.
class ScriptedReasoner : public Reasoner {
 public:
  explicit ScriptedReasoner(std::vector<Output> transcript)
      : transcript_(std::move(transcript)) {}

  Output respond(const std::string&, const std::string&, const std::string&) override {
    if (next_ >= transcript_.size()) return {"", "", {}};
    return transcript_[next_++];
  }

  void reset() { next_ = 0; }
  const std::vector<Output>& transcript() const { return transcript_; }
  std::vector<Output>& transcript() { return transcript_; }

 private:
  std::vector<Output> transcript_;
  std::size_t next_ = 0;
};

// --- action grammar --------------------------------------------------------

struct ParsedAction {
  std::string tool;
  std::string args;
};

/// Actions are declared in output text as `ACTION: <tool> <args>` lines;
/// writes as `WRITE: <artifact-id>` lines.
inline std::vector<ParsedAction> parse_actions(const Output& out) {
  std::vector<ParsedAction> actions;
  auto scan = [&](const std::string& line) {
    if (line.starts_with("ACTION: ")) {
      std::string rest = line.substr(8);
      std::size_t sp = rest.find(' ');
      if (sp == std::string::npos)
        actions.push_back({rest, ""});
      else
        actions.push_back({rest.substr(0, sp), rest.substr(sp + 1)});
    }
  };
  std::size_t pos = 0;
  while (pos < out.text.size()) {
    std::size_t eol = out.text.find('\n', pos);
    if (eol == std::string::npos) eol = out.text.size();
    scan(out.text.substr(pos, eol - pos));
    pos = eol + 1;
  }
  for (const std::string& a : out.actions) scan("ACTION: " + a);
  return actions;
}

inline std::vector<std::string> parse_writes(const std::string& output_text) {
  std::vector<std::string> ids;
  std::size_t pos = 0;
  while (pos < output_text.size()) {
    std::size_t eol = output_text.find('\n', pos);
    if (eol == std::string::npos) eol = output_text.size();
    std::string line = output_text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.starts_with("WRITE: ")) ids.push_back(line.substr(7));
  }
  return ids;
}

/// Output body with the action grammar lines stripped; what a WRITE persists.
inline std::string strip_directives(const std::string& output_text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < output_text.size()) {
    std::size_t eol = output_text.find('\n', pos);
    bool last = eol == std::string::npos;
    if (last) eol = output_text.size();
    std::string line = output_text.substr(pos, eol - pos);
    pos = eol + 1;
    if (line.starts_with("ACTION: ") || line.starts_with("WRITE: ") ||
        line.starts_with("INTENT:"))
      continue;
    out += line;
    if (!last) out += '\n';
  }
  return out;
}

/// Default formulator: extracts `INTENT:` lines of the last output, with an
/// optional `@agent-id` target suffix.
inline std::vector<Intent> formulate(const Trajectory& trajectory) {
  if (trajectory.steps.empty())
    fail(ErrorCode::NothingToFormulate, "trajectory is empty");
  std::vector<Intent> intents;
  const std::string& text = trajectory.steps.back().output;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.starts_with("INTENT:")) continue;
    std::string body = line.substr(7);
    while (!body.empty() && body.front() == ' ') body.erase(body.begin());
    Intent intent;
    intent.source = Intent::Source::agent;
    std::size_t at = body.rfind(" @");
    if (at != std::string::npos && at + 2 < body.size()) {
      intent.target = body.substr(at + 2);
      body = body.substr(0, at);
    }
    intent.text = body;
    intents.push_back(std::move(intent));
  }
  return intents;
}

// --- pattern shifter -------------------------------------------------------

enum class MappingStrategy { EmbeddedMechanism, DerivedExecution, Collaboration };

inline std::string_view to_string(MappingStrategy s) {
  switch (s) {
    case MappingStrategy::EmbeddedMechanism: return "EmbeddedMechanism";
    case MappingStrategy::DerivedExecution: return "DerivedExecution";
    case MappingStrategy::Collaboration: return "Collaboration";
  }
  return "?";
}

struct ShiftPolicy {
  double high_watermark = 0.8;
};

struct InstanceMetrics {
  double context_utilization = 0.0;  // in [0, 1]
  bool ambiguity_flag = false;
};

/// Threshold policy: heavy context pressure offloads to a derived child,
/// ambiguity asks for a team, otherwise stay embedded.
inline MappingStrategy shift_pattern(const InstanceMetrics& metrics,
                                     const ShiftPolicy& policy, BindingLog& log,
                                     std::uint64_t step,
                                     const std::string& subject = "shifter") {
  MappingStrategy decision = MappingStrategy::EmbeddedMechanism;
  if (metrics.context_utilization > policy.high_watermark)
    decision = MappingStrategy::DerivedExecution;
  else if (metrics.ambiguity_flag)
    decision = MappingStrategy::Collaboration;
  log.append(BindingKind::route, subject, std::string(to_string(decision)),
             "utilization=" + std::to_string(metrics.context_utilization) +
                 " ambiguity=" + (metrics.ambiguity_flag ? "1" : "0"),
             std::nullopt, step, BindingOutcome::validated);
  return decision;
}

// --- role bundles ----------------------------------------------------------

/// Maps logical patterns onto named agent processes. The default bundle is
/// the Worker -> agent-generator -> lens flow.
struct RoleBundle {
  std::map<std::string, std::string> pattern_to_agent;

  static RoleBundle default_bundle() {
    RoleBundle b;
    b.pattern_to_agent = {{"worker", "worker"},
                          {"agent_generator", "agent-generator"},
                          {"lens", "lens"},
                          {"router", "router"},
                          {"curator", "curator"}};
    return b;
  }
};

// --- runtime ---------------------------------------------------------------

using ToolHandler = std::function<std::string(const std::string& args)>;
using TerminationHook = std::function<void(AgentInstance&)>;

struct RunCycleOptions {
  long budget = 512;
  long max_steps = 16;
};

class AgentRuntime {
 public:
  explicit AgentRuntime(StoreInterface& store) : store_(store) {}

  StoreInterface& store() { return store_; }

  AgentInstance& create_instance(const std::string& instance_id,
                                 EndCriteria criteria = {}) {
    AgentInstance inst;
    inst.instance_id = instance_id;
    inst.trajectory.owner = instance_id;
    inst.end_criteria = std::move(criteria);
    auto [it, ok] = instances_.emplace(instance_id, std::move(inst));
    if (!ok) fail(ErrorCode::IdCollision, "instance '" + instance_id + "'");
    return it->second;
  }

  AgentInstance& instance(const std::string& id) {
    auto it = instances_.find(id);
    if (it == instances_.end()) fail(ErrorCode::NotFound, "instance '" + id + "'");
    return it->second;
  }

  bool has_instance(const std::string& id) const { return instances_.count(id) > 0; }

  void register_tool(const std::string& name, ToolHandler handler) {
    tools_[name] = std::move(handler);
  }

  void register_hook(const std::string& name, TerminationHook hook) {
    hooks_[name] = std::move(hook);
  }

  void deliver_signal(const std::string& instance_id, const std::string& signal) {
    instance(instance_id).signals.insert(signal);
  }

  std::string history_digest(const AgentInstance& inst) const {
    Fnv64 d;
    for (const StepRecord& s : inst.trajectory.steps) {
      d.mix(s.view.to_text());
      d.mix(s.intent);
      d.mix(s.output);
      d.mix(s.feedback);
    }
    return d.hex();
  }

  /// One Execute: reasoner inference, tool dispatch, step append, criteria
  /// check. An unknown tool is recorded in feedback and the step completes.
  Output execute_step(AgentInstance& inst, const View& view, const Intent& intent,
                      Reasoner& reasoner) {
    if (inst.status == AgentStatus::terminated)
      fail(ErrorCode::AgentTerminated, "instance '" + inst.instance_id + "'");
    Output out =
        reasoner.respond(view.to_text(), intent.text, history_digest(inst));
    std::string feedback = out.environment_feedback;
    for (const ParsedAction& a : parse_actions(out)) {
      if (!feedback.empty()) feedback += '\n';
      auto it = tools_.find(a.tool);
      if (it == tools_.end()) {
        feedback += "UnknownTool: " + a.tool;
      } else {
        feedback += a.tool + ": " + it->second(a.args);
      }
    }
    out.environment_feedback = feedback;
    StepRecord step;
    step.view = view;
    step.intent = intent.text;
    step.output = out.text;
    step.feedback = feedback;
    inst.trajectory.append(std::move(step));
    evaluate_end_criteria(inst);
    return out;
  }

  /// True when ANY predicate holds. Termination hooks run exactly once, on
  /// the first true transition.
  std::pair<bool, std::vector<PredicateKind>> evaluate_end_criteria(AgentInstance& inst) {
    std::vector<PredicateKind> fired;
    for (const EndPredicate& p : inst.end_criteria.predicates) {
      bool hit = false;
      switch (p.kind) {
        case PredicateKind::required_output_present:
          for (const StepRecord& s : inst.trajectory.steps)
            if (s.output.find(p.text_param) != std::string::npos) {
              hit = true;
              break;
            }
          break;
        case PredicateKind::budget_exhausted: {
          long total = 0;
          for (const StepRecord& s : inst.trajectory.steps)
            total += estimate_tokens(s.output);
          hit = total >= p.number_param;
          break;
        }
        case PredicateKind::signal_received:
          hit = inst.signals.count(p.text_param) > 0;
          break;
        case PredicateKind::max_steps:
          hit = static_cast<long>(inst.trajectory.size()) >= p.number_param;
          break;
      }
      if (hit) fired.push_back(p.kind);
    }
    bool done = !fired.empty();
    if (done && !inst.hooks_fired) {
      inst.hooks_fired = true;
      for (const std::string& name : inst.end_criteria.termination_hooks) {
        auto it = hooks_.find(name);
        if (it != hooks_.end()) it->second(inst);
      }
      inst.status = AgentStatus::terminated;
    }
    return {done, fired};
  }

  /// The execution cycle: project -> execute -> update (declared writes) ->
  /// formulate, until the end criteria fire, the agent formulates nothing,
  /// or max_steps is reached.
  Trajectory& run_cycle(AgentInstance& inst, Intent intent, Reasoner& reasoner,
                        const RunCycleOptions& opts = {}) {
    for (long step = 0; step < opts.max_steps; ++step) {
      if (inst.status == AgentStatus::terminated) break;
      ArtifactPool pool;
      for (const std::string& id : store_.artifact_ids())
        pool.push_back(store_.get_artifact(id));
      View view = project(pool, intent.text, opts.budget);
      Output out = execute_step(inst, view, intent, reasoner);
      for (const std::string& artifact_id : parse_writes(out.text)) {
        store_.revise_artifact(artifact_id, strip_directives(out.text),
                               "step " + std::to_string(inst.trajectory.size()) + ": " +
                                   intent.text,
                               inst.instance_id);
      }
      if (inst.status == AgentStatus::terminated) break;
      std::vector<Intent> next = formulate(inst.trajectory);
      if (next.empty()) break;
      intent = next.front();
    }
    return inst.trajectory;
  }

  /// Derives a child seeded with the curated minimal trajectory. Records one
  /// fork artifact and one inherit binding event.
  AgentInstance& fork_single(AgentInstance& parent, const std::string& intent,
                             long budget) {
    std::vector<std::size_t> kept = curate_indices(parent.trajectory, intent, budget);
    std::string child_id = parent.instance_id + "-fork" + std::to_string(++fork_seq_);
    AgentInstance& child = create_instance(child_id, parent.end_criteria);
    child.parent_ids = {parent.instance_id};
    for (std::size_t i : kept) child.trajectory.steps.push_back(parent.trajectory.steps[i]);
    record_fork(child, {{parent.instance_id, kept}}, intent);
    return child;
  }

  /// Multiple inheritance: each parent contributes a curated fragment under
  /// an equal share of the budget, concatenated in parent order.
  AgentInstance& fork_multi(const std::vector<AgentInstance*>& parents,
                            const std::string& intent, long budget) {
    if (parents.size() < 2)
      fail(ErrorCode::UseForkSingle, "fork_multi needs at least two parents");
    long share = std::max<long>(1, budget / static_cast<long>(parents.size()));
    std::string child_id = "multi";
    for (const AgentInstance* p : parents) child_id += "-" + p->instance_id;
    child_id += "-fork" + std::to_string(++fork_seq_);
    AgentInstance& child = create_instance(child_id);
    std::vector<std::pair<std::string, std::vector<std::size_t>>> fragments;
    for (const AgentInstance* p : parents) {
      std::vector<std::size_t> kept = curate_indices(p->trajectory, intent, share);
      for (std::size_t i : kept) child.trajectory.steps.push_back(p->trajectory.steps[i]);
      child.parent_ids.push_back(p->instance_id);
      fragments.emplace_back(p->instance_id, std::move(kept));
    }
    record_fork(child, fragments, intent);
    return child;
  }

 private:
  /// fork.md body: `parent:` lines + `fragment: parent-id steps a..b` lines.
  void record_fork(
      AgentInstance& child,
      const std::vector<std::pair<std::string, std::vector<std::size_t>>>& fragments,
      const std::string& intent) {
    std::string body;
    for (const auto& [parent_id, _] : fragments) body += "parent: " + parent_id + "\n";
    for (const auto& [parent_id, steps] : fragments) {
      if (steps.empty()) continue;
      // contiguous ranges of kept indices
      std::size_t start = steps[0], prev = steps[0];
      auto flush = [&](std::size_t end) {
        body += "fragment: " + parent_id + " steps " + std::to_string(start) + ".." +
                std::to_string(end) + "\n";
      };
      for (std::size_t i = 1; i < steps.size(); ++i) {
        if (steps[i] == prev + 1) {
          prev = steps[i];
          continue;
        }
        flush(prev);
        start = prev = steps[i];
      }
      flush(prev);
    }
    FrontMatter fm;
    fm.set("name", child.instance_id);
    store_.put_artifact(ArtifactKind::fork, body, std::move(fm));
    std::string parent_list;
    for (const auto& [pid, _] : fragments) {
      if (!parent_list.empty()) parent_list += ",";
      parent_list += pid;
    }
    store_.bindings().append(BindingKind::inherit, child.instance_id, parent_list,
                             "intent=" + intent, std::nullopt, store_.advance_step(),
                             BindingOutcome::validated);
  }

  StoreInterface& store_;
  std::map<std::string, AgentInstance> instances_;
  std::map<std::string, ToolHandler> tools_;
  std::map<std::string, TerminationHook> hooks_;
  std::uint64_t fork_seq_ = 0;
};

// --- mediator --------------------------------------------------------------

/// Fills contract clauses round by round; returns once per round.
using Negotiator = std::function<void(long round, const std::string& task_intent,
                                      Contract& contract)>;

inline Negotiator scripted_negotiator() {
  return [](long, const std::string& intent, Contract& c) {
    c.roles = "a: producer; b: consumer";
    c.io_schema = "input: intent text; output: result text";
    c.state_commitments = "no shared mutable state beyond the store";
    c.allowed_side_effects = "artifact writes scoped to: " + intent;
  };
}

struct MediationResult {
  Contract contract;
  std::string contract_artifact_id;
  std::string child_a;
  std::string child_b;
};

/// Negotiates an explicit contract between two parties, then forks two
/// clean-scoped children seeded with the minimal trajectory plus the
/// finalized contract. Parents are never modified.
inline MediationResult mediate(AgentRuntime& runtime, const std::string& party_a,
                               const std::string& party_b,
                               const std::string& task_intent,
                               const Negotiator& negotiator, long max_rounds = 4,
                               long child_budget = 256) {
  if (party_a == party_b) fail(ErrorCode::NoRoute, "parties must be distinct");
  Contract contract;
  contract.parties = {party_a, party_b};
  for (long round = 1; round <= max_rounds; ++round) {
    contract.negotiation_rounds = round;
    negotiator(round, task_intent, contract);
    if (contract.complete()) break;
  }
  if (!contract.complete())
    fail(ErrorCode::NegotiationFailed,
         "clauses incomplete after " + std::to_string(max_rounds) + " rounds");
  contract.final_ = true;
  FrontMatter fm;
  fm.set("name", "contract-" + party_a + "-" + party_b);
  const Artifact& art = runtime.store().put_artifact(
      ArtifactKind::contract, serialize_contract(contract), std::move(fm));
  runtime.store().bindings().append(BindingKind::contract, party_a + "+" + party_b,
                                    art.id, "rounds=" +
                                        std::to_string(contract.negotiation_rounds),
                                    std::nullopt, runtime.store().advance_step(),
                                    BindingOutcome::validated);
  MediationResult result;
  result.contract = contract;
  result.contract_artifact_id = art.id;
  for (const std::string& party : {party_a, party_b}) {
    AgentInstance& parent = runtime.instance(party);
    AgentInstance& child = runtime.fork_single(parent, task_intent, child_budget);
    // step 0 of each child carries the contract text in its view
    StepRecord seed;
    seed.view.budget = child_budget;
    seed.view.intent_echo = task_intent;
    ViewSegment seg{art.id, serialize_contract(contract), 2, 0};
    seg.token_cost = estimate_tokens(seg.text);
    seed.view.segments.push_back(std::move(seg));
    seed.view.total_tokens = seed.view.segments[0].token_cost;
    seed.intent = task_intent;
    seed.output = "contract acknowledged";
    child.trajectory.steps.insert(child.trajectory.steps.begin(), std::move(seed));
    (party == party_a ? result.child_a : result.child_b) = child.instance_id;
  }
  return result;
}

}  // namespace lss
