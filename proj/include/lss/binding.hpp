#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lss/artifact_store.hpp"
#include "lss/errors.hpp"
#include "lss/provenance.hpp"
#include "lss/tokens.hpp"

namespace lss {

using Scorer = std::function<long(std::string_view evidence, const std::string& intent)>;

inline long lexical_scorer(std::string_view evidence, const std::string& intent) {
  return overlap_score(intent, evidence);
}

// --- semantic lens ---------------------------------------------------------

struct LensCandidate {
  std::string id;
  std::string text;
  std::string task_scope;  // empty = unscoped
};

struct LensOptions {
  long brief_limit = 280;
  std::string subject = "lens";
  std::optional<std::uint64_t> parent_event;
  std::string caller_scope;
  bool allow_cross_scope = false;
  Scorer scorer = lexical_scorer;
};

struct LensResult {
  std::vector<std::string> selected;        // ids, best first
  std::vector<std::uint64_t> event_ids;     // one lens_select event per pick
  std::vector<long> scores;                 // per candidate, input order
  long peak_brief_chars = 0;                // most text held at once
};

namespace detail {

inline std::string score_table(const std::vector<LensCandidate>& candidates,
                               const std::vector<long>& scores) {
  std::string out = "all=[";
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) out += ' ';
    out += candidates[i].id + "=" + std::to_string(scores[i]);
  }
  out += ']';
  return out;
}

inline bool scope_allowed(const std::string& candidate_scope,
                          const std::string& caller_scope, bool allow_cross) {
  if (candidate_scope.empty() || allow_cross) return true;
  return candidate_scope == caller_scope;
}

}  // namespace detail

/// Scores candidates one brief at a time (never holding more than brief_limit
/// characters of evidence) and returns the k best ids, ties by ascending
/// candidate index. Emits one lens_select event per pick whose evidence
/// carries the full score table, so the decision replays from the log alone.
inline LensResult lens_select(const std::vector<LensCandidate>& candidates,
                              const std::string& intent, int k, BindingLog& log,
                              std::uint64_t step, const LensOptions& opts = {}) {
  if (k <= 0) fail(ErrorCode::InvalidK, "k must be >= 1");
  LensResult result;
  result.scores.reserve(candidates.size());
  std::vector<std::pair<long, std::size_t>> ranked;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const LensCandidate& c = candidates[i];
    if (!detail::scope_allowed(c.task_scope, opts.caller_scope, opts.allow_cross_scope)) {
      result.scores.push_back(-1);
      continue;
    }
    std::string brief = c.text.substr(0, static_cast<std::size_t>(opts.brief_limit));
    result.peak_brief_chars =
        std::max(result.peak_brief_chars, static_cast<long>(brief.size()));
    long score = opts.scorer(brief, intent);
    result.scores.push_back(score);
    ranked.emplace_back(score, i);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  const std::string table = detail::score_table(candidates, result.scores);
  for (std::size_t r = 0; r < ranked.size() && r < static_cast<std::size_t>(k); ++r) {
    const auto& [score, idx] = ranked[r];
    const BindingEvent& e =
        log.append(BindingKind::lens_select, opts.subject, candidates[idx].id,
                   "score=" + std::to_string(score) + "; " + table, opts.parent_event,
                   step);
    result.selected.push_back(candidates[idx].id);
    result.event_ids.push_back(e.event_id);
  }
  return result;
}

/// Re-runs a lens/route choice from the recorded evidence alone: parses the
/// score table and returns ids in selection order. Used to audit provenance.
inline std::vector<std::string> replay_selection(const std::string& evidence,
                                                 std::size_t k) {
  std::size_t open = evidence.find("all=[");
  if (open == std::string::npos)
    fail(ErrorCode::CorruptProvenance, "evidence lacks a score table");
  std::size_t close = evidence.find(']', open);
  std::string body = evidence.substr(open + 5, close - open - 5);
  std::vector<std::pair<long, std::size_t>> ranked;
  std::vector<std::string> ids;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t sp = body.find(' ', pos);
    if (sp == std::string::npos) sp = body.size();
    std::string item = body.substr(pos, sp - pos);
    pos = sp + 1;
    std::size_t eq = item.rfind('=');
    if (eq == std::string::npos) continue;
    long score = std::stol(item.substr(eq + 1));
    if (score >= 0) ranked.emplace_back(score, ids.size());
    ids.push_back(item.substr(0, eq));
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<std::string> out;
  for (std::size_t r = 0; r < ranked.size() && r < k; ++r)
    out.push_back(ids[ranked[r].second]);
  return out;
}

// --- index generator -------------------------------------------------------

struct IndexEntry {
  std::string focal_id;
  std::string neighbor_id;
  std::string relation;  // shared tokens, space separated
  long weight = 0;       // shared unique token count
};

/// Builds a file-centered pointer graph: for each focal artifact, up to
/// max_degree entries to its highest-overlap neighbors (weight >= 1).
inline std::vector<IndexEntry> generate_index(const std::vector<Artifact>& pool,
                                              long max_degree,
                                              const std::optional<std::string>& focal_id =
                                                  std::nullopt) {
  if (focal_id) {
    bool known = std::any_of(pool.begin(), pool.end(),
                             [&](const Artifact& a) { return a.id == *focal_id; });
    if (!known) fail(ErrorCode::NotFound, "focal artifact '" + *focal_id + "'");
  }
  std::vector<const Artifact*> sorted;
  for (const Artifact& a : pool) sorted.push_back(&a);
  std::sort(sorted.begin(), sorted.end(),
            [](const Artifact* x, const Artifact* y) { return x->id < y->id; });
  std::vector<IndexEntry> entries;
  for (const Artifact* focal : sorted) {
    if (focal_id && focal->id != *focal_id) continue;
    std::vector<IndexEntry> local;
    for (const Artifact* other : sorted) {
      if (other == focal) continue;
      auto shared = shared_tokens(focal->content, other->content);
      if (shared.empty()) continue;
      std::string relation;
      for (const auto& t : shared) {
        if (!relation.empty()) relation += ' ';
        relation += t;
      }
      local.push_back({focal->id, other->id, relation, static_cast<long>(shared.size())});
    }
    std::stable_sort(local.begin(), local.end(), [](const IndexEntry& x, const IndexEntry& y) {
      if (x.weight != y.weight) return x.weight > y.weight;
      return x.neighbor_id < y.neighbor_id;
    });
    if (static_cast<long>(local.size()) > max_degree) local.resize(max_degree);
    entries.insert(entries.end(), local.begin(), local.end());
  }
  return entries;
}

/// Index artifact body: one line per entry `focal -> neighbor | weight | tokens`.
inline std::string serialize_index(const std::vector<IndexEntry>& entries) {
  std::string out;
  for (const IndexEntry& e : entries) {
    out += e.focal_id + " -> " + e.neighbor_id + " | " + std::to_string(e.weight) +
           " | " + e.relation + "\n";
  }
  return out;
}

inline const Artifact& persist_index(Store& store, const std::vector<IndexEntry>& entries,
                                     const std::string& name = "index") {
  FrontMatter fm;
  fm.set("name", name);
  return store.put_artifact(ArtifactKind::index, serialize_index(entries), std::move(fm));
}

// --- semantic router -------------------------------------------------------

struct TeamRole {
  std::string agent_id;
  std::string role_name;
  std::string responsibilities;
  std::set<std::string> capability_keywords;
};

struct TeamEdge {
  std::string from_agent;
  std::string to_agent;
  std::string channel_purpose;
};

struct TeamSpec {
  std::vector<TeamRole> roles;
  std::vector<TeamEdge> edges;
};

/// team.md body: `role:` blocks then `edge:` lines.
inline std::string serialize_team(const TeamSpec& team) {
  std::string out;
  for (const TeamRole& r : team.roles) {
    out += "role: " + r.agent_id + " | " + r.role_name + " | " + r.responsibilities +
           " | ";
    bool first = true;
    for (const auto& kw : r.capability_keywords) {
      if (!first) out += ' ';
      first = false;
      out += kw;
    }
    out += '\n';
  }
  for (const TeamEdge& e : team.edges)
    out += "edge: " + e.from_agent + " -> " + e.to_agent + " | " + e.channel_purpose +
           "\n";
  return out;
}

struct RouteMessage {
  enum class Kind { intent, output };
  Kind kind = Kind::intent;
  std::string text;
};

struct RouteDecision {
  std::string agent_id;
  std::string evidence;
  std::uint64_t event_id = 0;
};

/// Forwards a message to the role with the highest keyword overlap; ties go
/// to the lexicographically smallest agent id. Evidence records all scores.
inline RouteDecision route(const RouteMessage& message, const TeamSpec& team,
                           BindingLog& log, std::uint64_t step,
                           const std::string& subject = "router",
                           std::optional<std::uint64_t> parent = std::nullopt) {
  if (team.roles.empty()) fail(ErrorCode::NoRoute, "team has no roles");
  auto msg_tokens = token_set(message.text);
  std::vector<std::pair<long, const TeamRole*>> scored;
  for (const TeamRole& r : team.roles) {
    long score = 0;
    for (const auto& kw : r.capability_keywords)
      if (msg_tokens.count(kw)) ++score;
    scored.emplace_back(score, &r);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second->agent_id < y.second->agent_id;
  });
  std::string table = "all=[";
  // table in input order so evidence replays the same tie-break
  for (std::size_t i = 0; i < team.roles.size(); ++i) {
    if (i) table += ' ';
    long s = 0;
    for (const auto& kw : team.roles[i].capability_keywords)
      if (msg_tokens.count(kw)) ++s;
    table += team.roles[i].agent_id + "=" + std::to_string(s);
  }
  table += ']';
  const TeamRole* winner = scored.front().second;
  RouteDecision decision;
  decision.agent_id = winner->agent_id;
  decision.evidence =
      "score=" + std::to_string(scored.front().first) + "; " + table;
  const BindingEvent& e = log.append(BindingKind::route, subject, winner->agent_id,
                                     decision.evidence, parent, step);
  decision.event_id = e.event_id;
  return decision;
}

// --- team generator --------------------------------------------------------

struct AgentProfile {
  std::string agent_id;
  std::set<std::string> capability_keywords;
};

/// Picks up to max_size agents by capability overlap with the intent and
/// wires a star around the top scorer (the coordinator).
inline TeamSpec generate_team(const std::string& task_intent,
                              const std::vector<AgentProfile>& available,
                              std::size_t max_size) {
  if (available.empty()) fail(ErrorCode::EmptyRoster, "no agents available");
  auto intent_tokens = token_set(task_intent);
  std::vector<std::pair<long, const AgentProfile*>> scored;
  for (const AgentProfile& a : available) {
    long s = 0;
    for (const auto& kw : a.capability_keywords)
      if (intent_tokens.count(kw)) ++s;
    scored.emplace_back(s, &a);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second->agent_id < y.second->agent_id;
  });
  if (scored.size() > max_size) scored.resize(max_size);
  TeamSpec team;
  for (const auto& [s, a] : scored) {
    TeamRole role;
    role.agent_id = a->agent_id;
    role.role_name = (team.roles.empty() ? "coordinator" : "member");
    role.responsibilities = task_intent;
    role.capability_keywords = a->capability_keywords;
    team.roles.push_back(std::move(role));
  }
  for (std::size_t i = 1; i < team.roles.size(); ++i)
    team.edges.push_back({team.roles[0].agent_id, team.roles[i].agent_id,
                          "coordination"});
  return team;
}

/// After-task variant: the cooperation structure is read off the routes that
/// actually happened instead of keyword scores.
inline TeamSpec team_from_observed_routes(
    const std::vector<std::pair<std::string, std::string>>& observed_edges) {
  if (observed_edges.empty()) fail(ErrorCode::EmptyRoster, "no observed routes");
  TeamSpec team;
  std::set<std::string> seen;
  auto add_role = [&](const std::string& id) {
    if (seen.insert(id).second)
      team.roles.push_back({id, seen.size() == 1 ? "coordinator" : "member", "", {}});
  };
  std::set<std::pair<std::string, std::string>> edge_seen;
  for (const auto& [from, to] : observed_edges) {
    add_role(from);
    add_role(to);
    if (edge_seen.insert({from, to}).second)
      team.edges.push_back({from, to, "observed"});
  }
  return team;
}

inline const Artifact& persist_team(Store& store, const TeamSpec& team,
                                    const std::string& name = "team") {
  FrontMatter fm;
  fm.set("name", name);
  return store.put_artifact(ArtifactKind::team, serialize_team(team), std::move(fm));
}

// --- facade & filter -------------------------------------------------------

struct FacadePolicy {
  std::vector<std::string> deny_patterns;      // literal substrings
  std::vector<std::string> output_schema_keys; // empty = no schema filter
};

/// Drops lines matching any deny pattern; with schema keys set, re-emits only
/// `key: value` lines whose key is allowed, in declared key order.
inline std::string facade_filter(const std::string& text, const FacadePolicy& policy,
                                 BindingLog* log = nullptr,
                                 const std::string& subject = "facade",
                                 std::uint64_t step = 0) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) {
      if (pos < text.size()) lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, eol - pos));
    pos = eol + 1;
  }
  std::vector<std::string> kept;
  long denied = 0;
  for (const std::string& line : lines) {
    bool deny = std::any_of(policy.deny_patterns.begin(), policy.deny_patterns.end(),
                            [&](const std::string& p) {
                              return !p.empty() && line.find(p) != std::string::npos;
                            });
    if (deny) {
      ++denied;
      continue;
    }
    kept.push_back(line);
  }
  std::string out;
  if (policy.output_schema_keys.empty()) {
    for (std::size_t i = 0; i < kept.size(); ++i) {
      out += kept[i];
      if (i + 1 < kept.size()) out += '\n';
    }
    if (!kept.empty() && text.ends_with('\n')) out += '\n';
  } else {
    for (const std::string& key : policy.output_schema_keys) {
      for (const std::string& line : kept) {
        if (line.starts_with(key + ":")) {
          out += line;
          out += '\n';
        }
      }
    }
  }
  if (log)
    log->append(BindingKind::facade, subject, "-",
                "denied_lines=" + std::to_string(denied), std::nullopt, step,
                BindingOutcome::validated);
  return out;
}

// --- contracts -------------------------------------------------------------

struct Contract {
  std::vector<std::string> parties;
  std::string roles;
  std::string io_schema;
  std::string state_commitments;
  std::string allowed_side_effects;
  long negotiation_rounds = 0;
  bool final_ = false;

  bool complete() const {
    return !roles.empty() && !io_schema.empty() && !state_commitments.empty() &&
           !allowed_side_effects.empty();
  }
};

/// contract.md: four named clause sections.
inline std::string serialize_contract(const Contract& c) {
  std::string parties_line;
  for (const auto& p : c.parties) {
    if (!parties_line.empty()) parties_line += ", ";
    parties_line += p;
  }
  return "parties: " + parties_line + "\n" +
         "## Roles\n" + c.roles + "\n" +
         "## IO Schema\n" + c.io_schema + "\n" +
         "## State Commitments\n" + c.state_commitments + "\n" +
         "## Allowed Side Effects\n" + c.allowed_side_effects + "\n";
}

/// Convenience wrapper over the provenance log.
inline SupplyChain trace_chain(const BindingLog& log, std::uint64_t event_id) {
  return log.trace(event_id);
}

}  // namespace lss
