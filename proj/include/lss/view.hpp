#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "lss/artifact_store.hpp"
#include "lss/errors.hpp"
#include "lss/tokens.hpp"

namespace lss {

using ArtifactPool = std::vector<Artifact>;

inline ArtifactPool pool_from(const Store& store) {
  ArtifactPool pool;
  for (auto& [id, a] : store.snapshot_artifacts()) pool.push_back(std::move(a));
  return pool;
}

/// Disclosure levels: 0 = name line, 1 = brief (head of the body), 2 = full.
struct ViewSegment {
  std::string source_artifact_id;
  std::string text;
  int disclosure_level = 2;
  long token_cost = 0;
};

struct View {
  std::vector<ViewSegment> segments;
  std::string intent_echo;
  long total_tokens = 0;
  long budget = 0;

  bool contains(const std::string& artifact_id) const {
    return std::any_of(segments.begin(), segments.end(), [&](const ViewSegment& s) {
      return s.source_artifact_id == artifact_id;
    });
  }

  /// Serialized form used for reasoner calls and class signatures; ordering
  /// is bit-exact so transcripts replay.
  std::string to_text() const {
    std::string out;
    for (const auto& s : segments) {
      out += "### " + s.source_artifact_id + " [L" + std::to_string(s.disclosure_level) +
             "]\n";
      out += s.text;
      out += '\n';
    }
    return out;
  }
};

struct StepRecord {
  View view;
  std::string intent;
  std::string output;
  std::string feedback;
};

/// Append-only step sequence defining an agent instance.
struct Trajectory {
  std::string owner;
  std::vector<StepRecord> steps;

  void append(StepRecord step) { steps.push_back(std::move(step)); }
  std::size_t size() const { return steps.size(); }
};

struct ProjectOptions {
  std::optional<std::vector<std::string>> lens_selection;  // ids, in order
  long brief_limit = 280;
  int requested_level = 2;
};

namespace detail {

inline std::string segment_text(const Artifact& a, int level, long brief_limit) {
  switch (level) {
    case 0:
      return a.name() + " (" + std::string(to_string(a.kind)) + ")";
    case 1:
      return a.content.substr(0, static_cast<std::size_t>(brief_limit));
    default:
      return a.content;
  }
}

/// Relevance order: lexical overlap with the intent, descending; ties by
/// ascending artifact id.
inline std::vector<const Artifact*> rank_pool(const ArtifactPool& pool,
                                              const std::string& intent) {
  auto intent_tokens = token_set(intent);
  std::vector<std::pair<long, const Artifact*>> scored;
  scored.reserve(pool.size());
  for (const Artifact& a : pool)
    scored.emplace_back(overlap_score(intent_tokens, a.name() + "\n" + a.content), &a);
  std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second->id < y.second->id;
  });
  std::vector<const Artifact*> out;
  out.reserve(scored.size());
  for (auto& [s, a] : scored) out.push_back(a);
  return out;
}

/// Adds a segment at the highest level that fits, degrading under
/// backpressure; returns false when even the name line does not fit.
inline bool add_with_backpressure(View& view, const Artifact& a, int requested_level,
                                  long brief_limit) {
  for (int level = requested_level; level >= 0; --level) {
    std::string text = segment_text(a, level, brief_limit);
    long cost = estimate_tokens(text);
    if (view.total_tokens + cost <= view.budget) {
      view.segments.push_back({a.id, std::move(text), level, cost});
      view.total_tokens += cost;
      return true;
    }
  }
  return false;
}

}  // namespace detail

/// Assembles a budgeted step-specific view from the pool. Candidates come
/// from lens_selection when given, else from the default relevance ranking.
inline View project(const ArtifactPool& pool, const std::string& intent, long budget,
                    const ProjectOptions& opts = {}) {
  if (budget <= 0) fail(ErrorCode::InvalidBudget, "budget must be positive");
  View view;
  view.intent_echo = intent;
  view.budget = budget;
  if (opts.lens_selection) {
    for (const std::string& id : *opts.lens_selection) {
      auto it = std::find_if(pool.begin(), pool.end(),
                             [&](const Artifact& a) { return a.id == id; });
      if (it == pool.end()) continue;
      detail::add_with_backpressure(view, *it, opts.requested_level, opts.brief_limit);
    }
  } else {
    for (const Artifact* a : detail::rank_pool(pool, intent))
      detail::add_with_backpressure(view, *a, opts.requested_level, opts.brief_limit);
  }
  return view;
}

/// Returns a superset view: kept segments may only rise in disclosure level,
/// new segments are appended by the same ranking, still within budget.
inline View expand_view(const View& view, const ArtifactPool& pool,
                        const std::string& intent, long budget,
                        const ProjectOptions& opts = {}) {
  View out;
  out.intent_echo = intent;
  out.budget = budget;
  out.segments = view.segments;
  out.total_tokens = view.total_tokens;
  for (ViewSegment& seg : out.segments) {
    auto it = std::find_if(pool.begin(), pool.end(),
                           [&](const Artifact& a) { return a.id == seg.source_artifact_id; });
    if (it == pool.end()) continue;
    for (int level = 2; level > seg.disclosure_level; --level) {
      std::string text = detail::segment_text(*it, level, opts.brief_limit);
      long cost = estimate_tokens(text);
      if (out.total_tokens - seg.token_cost + cost <= budget) {
        out.total_tokens += cost - seg.token_cost;
        seg.text = std::move(text);
        seg.disclosure_level = level;
        seg.token_cost = cost;
        break;
      }
    }
  }
  for (const Artifact* a : detail::rank_pool(pool, intent)) {
    if (out.contains(a->id)) continue;
    detail::add_with_backpressure(out, *a, opts.requested_level, opts.brief_limit);
  }
  return out;
}

/// Indices of the steps curate would keep, ascending. Greedy by relevance to
/// the intent (ties by step order), bounded by summed output tokens.
inline std::vector<std::size_t> curate_indices(const Trajectory& trajectory,
                                               const std::string& intent, long budget) {
  if (budget <= 0) fail(ErrorCode::InvalidBudget, "budget must be positive");
  auto intent_tokens = token_set(intent);
  struct Scored {
    long score;
    std::size_t index;
    long cost;
  };
  std::vector<Scored> scored;
  scored.reserve(trajectory.steps.size());
  for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
    const StepRecord& s = trajectory.steps[i];
    scored.push_back({overlap_score(intent_tokens, s.output), i,
                      estimate_tokens(s.output)});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& x, const Scored& y) {
    if (x.score != y.score) return x.score > y.score;
    return x.index < y.index;
  });
  std::vector<std::size_t> kept;
  long used = 0;
  for (const Scored& s : scored) {
    if (used + s.cost <= budget) {
      kept.push_back(s.index);
      used += s.cost;
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

/// Distills a trajectory to the steps most relevant to the intent, within a
/// budget on summed output tokens. Output is an order-preserving subsequence;
/// the input is untouched. Single-inheritance reduction of trajectory reuse.
inline Trajectory curate(const Trajectory& trajectory, const std::string& intent,
                         long budget) {
  Trajectory out;
  out.owner = trajectory.owner;
  for (std::size_t i : curate_indices(trajectory, intent, budget))
    out.steps.push_back(trajectory.steps[i]);
  return out;
}

/// Forks independent sub-contexts, each seeded by curating the parent toward
/// its own intent. Branches never share mutable state.
inline std::vector<Trajectory> branch_context(const Trajectory& trajectory,
                                              const std::vector<std::string>& intents,
                                              long branch_budget) {
  if (intents.empty()) fail(ErrorCode::InvalidBranchCount, "need at least one branch");
  std::vector<Trajectory> branches;
  branches.reserve(intents.size());
  for (const std::string& intent : intents)
    branches.push_back(curate(trajectory, intent, branch_budget));
  return branches;
}

/// Stitches one distilled outcome back into the parent; the branch's
/// intermediate steps are never copied.
inline Trajectory& stitch_context(Trajectory& parent, const Trajectory& branch,
                                  const std::string& distilled_outcome) {
  if (distilled_outcome.empty())
    fail(ErrorCode::EmptyDistillate, "stitch requires a distilled outcome");
  StepRecord step;
  step.intent = "stitch outcome from branch of " + branch.owner;
  step.output = distilled_outcome;
  parent.append(std::move(step));
  return parent;
}

}  // namespace lss
