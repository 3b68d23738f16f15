#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lss {

enum class ErrorCode {
  IdCollision,
  NotFound,
  RationaleRequired,
  VersionNotFound,
  NoOpMigration,
  ConcurrentEdit,
  InvalidBudget,
  InvalidBranchCount,
  EmptyDistillate,
  InvalidK,
  NoRoute,
  EmptyRoster,
  NegotiationFailed,
  CorruptProvenance,
  CrossScopeDenied,
  AgentTerminated,
  NothingToFormulate,
  UseForkSingle,
  HypothesisRequired,
  EmptySuite,
  NoMutations,
  EmptyRound,
  AlreadyClaimed,
  IllegalTransition,
  RoundIncomplete,
  MalformedQuery,
  NoReports,
  IoError,
};

inline std::string_view to_string(ErrorCode c) {
  switch (c) {
    case ErrorCode::IdCollision: return "IdCollision";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::RationaleRequired: return "RationaleRequired";
    case ErrorCode::VersionNotFound: return "VersionNotFound";
    case ErrorCode::NoOpMigration: return "NoOpMigration";
    case ErrorCode::ConcurrentEdit: return "ConcurrentEdit";
    case ErrorCode::InvalidBudget: return "InvalidBudget";
    case ErrorCode::InvalidBranchCount: return "InvalidBranchCount";
    case ErrorCode::EmptyDistillate: return "EmptyDistillate";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::NoRoute: return "NoRoute";
    case ErrorCode::EmptyRoster: return "EmptyRoster";
    case ErrorCode::NegotiationFailed: return "NegotiationFailed";
    case ErrorCode::CorruptProvenance: return "CorruptProvenance";
    case ErrorCode::CrossScopeDenied: return "CrossScopeDenied";
    case ErrorCode::AgentTerminated: return "AgentTerminated";
    case ErrorCode::NothingToFormulate: return "NothingToFormulate";
    case ErrorCode::UseForkSingle: return "UseForkSingle";
    case ErrorCode::HypothesisRequired: return "HypothesisRequired";
    case ErrorCode::EmptySuite: return "EmptySuite";
    case ErrorCode::NoMutations: return "NoMutations";
    case ErrorCode::EmptyRound: return "EmptyRound";
    case ErrorCode::AlreadyClaimed: return "AlreadyClaimed";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::RoundIncomplete: return "RoundIncomplete";
    case ErrorCode::MalformedQuery: return "MalformedQuery";
    case ErrorCode::NoReports: return "NoReports";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the whole kernel; the code identifies the
/// contract that was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace lss
