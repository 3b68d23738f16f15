#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lss/errors.hpp"

namespace lss {

enum class BindingKind {
  lens_select,
  route,
  tool_call,
  inherit,
  tier_migration,
  contract,
  facade,
};

inline std::string_view to_string(BindingKind k) {
  switch (k) {
    case BindingKind::lens_select: return "lens_select";
    case BindingKind::route: return "route";
    case BindingKind::tool_call: return "tool_call";
    case BindingKind::inherit: return "inherit";
    case BindingKind::tier_migration: return "tier_migration";
    case BindingKind::contract: return "contract";
    case BindingKind::facade: return "facade";
  }
  return "?";
}

enum class BindingOutcome { pending, validated, failed };

inline std::string_view to_string(BindingOutcome o) {
  switch (o) {
    case BindingOutcome::pending: return "pending";
    case BindingOutcome::validated: return "validated";
    case BindingOutcome::failed: return "failed";
  }
  return "?";
}

/// Provenance record for one runtime binding decision.
struct BindingEvent {
  std::uint64_t event_id = 0;
  BindingKind kind = BindingKind::tool_call;
  std::string subject;  // agent id making the binding
  std::string object;   // artifact or agent id bound to
  std::string evidence; // score breakdown or reason
  std::optional<std::uint64_t> parent_event;
  std::uint64_t step = 0;
  BindingOutcome outcome = BindingOutcome::pending;
};

/// Root-first chain of events linked by parent_event.
struct SupplyChain {
  std::vector<BindingEvent> events;
};

/// Append-only provenance log. Event ids increase monotonically and a parent
/// must already exist when its child is written, so the parent graph is
/// acyclic by construction.
class BindingLog {
 public:
  const BindingEvent& append(BindingKind kind, std::string subject,
                             std::string object, std::string evidence,
                             std::optional<std::uint64_t> parent, std::uint64_t step,
                             BindingOutcome outcome = BindingOutcome::pending) {
    std::lock_guard lock(mu_);
    if (parent && (*parent == 0 || *parent > next_id_ - 1))
      fail(ErrorCode::CorruptProvenance,
           "parent event " + std::to_string(*parent) + " does not exist yet");
    BindingEvent e;
    e.event_id = next_id_++;
    e.kind = kind;
    e.subject = std::move(subject);
    e.object = std::move(object);
    e.evidence = std::move(evidence);
    e.parent_event = parent;
    e.step = step;
    e.outcome = outcome;
    events_.push_back(std::move(e));
    return events_.back();
  }

  const BindingEvent& get(std::uint64_t event_id) const {
    std::lock_guard lock(mu_);
    if (event_id == 0 || event_id > events_.size())
      fail(ErrorCode::NotFound, "event " + std::to_string(event_id));
    return events_[event_id - 1];
  }

  void set_outcome(std::uint64_t event_id, BindingOutcome outcome) {
    std::lock_guard lock(mu_);
    if (event_id == 0 || event_id > events_.size())
      fail(ErrorCode::NotFound, "event " + std::to_string(event_id));
    events_[event_id - 1].outcome = outcome;
  }

  /// Walks parent links to the root; returns the chain root first.
  SupplyChain trace(std::uint64_t event_id) const {
    std::lock_guard lock(mu_);
    if (event_id == 0 || event_id > events_.size())
      fail(ErrorCode::NotFound, "event " + std::to_string(event_id));
    SupplyChain chain;
    std::optional<std::uint64_t> cur = event_id;
    while (cur) {
      const BindingEvent& e = events_[*cur - 1];
      if (e.parent_event && *e.parent_event >= *cur)
        fail(ErrorCode::CorruptProvenance,
             "event " + std::to_string(*cur) + " has non-decreasing parent");
      chain.events.push_back(e);
      cur = e.parent_event;
    }
    std::reverse(chain.events.begin(), chain.events.end());
    return chain;
  }

  std::vector<BindingEvent> snapshot() const {
    std::lock_guard lock(mu_);
    return events_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return events_.size();
  }

  /// One event per line, tab-separated, event ids ascending.
  std::string serialize() const {
    std::lock_guard lock(mu_);
    std::string out;
    for (const auto& e : events_) {
      out += std::to_string(e.event_id);
      out += '\t';
      out += to_string(e.kind);
      out += '\t';
      out += e.subject;
      out += '\t';
      out += e.object;
      out += '\t';
      out += e.parent_event ? std::to_string(*e.parent_event) : "-";
      out += '\t';
      out += std::to_string(e.step);
      out += '\t';
      out += to_string(e.outcome);
      out += '\t';
      std::string ev = e.evidence;
      for (char& c : ev)
        if (c == '\t' || c == '\n') c = ' ';
      out += ev;
      out += '\n';
    }
    return out;
  }

  /// Inverse of serialize(); replaces the log contents.
  void restore(std::string_view text) {
    std::lock_guard lock(mu_);
    events_.clear();
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      pos = eol + 1;
      if (line.empty()) continue;
      std::vector<std::string> fields;
      std::size_t p = 0;
      for (int i = 0; i < 7; ++i) {
        std::size_t tab = line.find('\t', p);
        if (tab == std::string_view::npos)
          fail(ErrorCode::CorruptProvenance, "short provenance record");
        fields.emplace_back(line.substr(p, tab - p));
        p = tab + 1;
      }
      BindingEvent e;
      e.event_id = std::stoull(fields[0]);
      for (BindingKind k : {BindingKind::lens_select, BindingKind::route,
                            BindingKind::tool_call, BindingKind::inherit,
                            BindingKind::tier_migration, BindingKind::contract,
                            BindingKind::facade})
        if (to_string(k) == fields[1]) e.kind = k;
      e.subject = fields[2];
      e.object = fields[3];
      if (fields[4] != "-") e.parent_event = std::stoull(fields[4]);
      e.step = std::stoull(fields[5]);
      for (BindingOutcome o : {BindingOutcome::pending, BindingOutcome::validated,
                               BindingOutcome::failed})
        if (to_string(o) == fields[6]) e.outcome = o;
      e.evidence = std::string(line.substr(p));
      if (e.event_id != events_.size() + 1)
        fail(ErrorCode::CorruptProvenance, "event ids must be contiguous from 1");
      if (e.parent_event && *e.parent_event >= e.event_id)
        fail(ErrorCode::CorruptProvenance, "parent must precede child");
      events_.push_back(std::move(e));
    }
    next_id_ = events_.size() + 1;
  }

 private:
  mutable std::mutex mu_;
  std::vector<BindingEvent> events_;
  std::uint64_t next_id_ = 1;
};

}  // namespace lss
