#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lss/errors.hpp"
#include "lss/front_matter.hpp"
#include "lss/provenance.hpp"
#include "lss/tokens.hpp"

namespace lss {

enum class ArtifactKind {
  prompt,
  skill,
  plan,
  index,
  team,
  fork,
  contract,
  evolve,
  task,
  trace,
  memory,
  document,
};

inline std::string_view to_string(ArtifactKind k) {
  switch (k) {
    case ArtifactKind::prompt: return "prompt";
    case ArtifactKind::skill: return "skill";
    case ArtifactKind::plan: return "plan";
    case ArtifactKind::index: return "index";
    case ArtifactKind::team: return "team";
    case ArtifactKind::fork: return "fork";
    case ArtifactKind::contract: return "contract";
    case ArtifactKind::evolve: return "evolve";
    case ArtifactKind::task: return "task";
    case ArtifactKind::trace: return "trace";
    case ArtifactKind::memory: return "memory";
    case ArtifactKind::document: return "document";
  }
  return "?";
}

inline std::optional<ArtifactKind> parse_kind(std::string_view s) {
  using K = ArtifactKind;
  for (K k : {K::prompt, K::skill, K::plan, K::index, K::team, K::fork,
              K::contract, K::evolve, K::task, K::trace, K::memory, K::document})
    if (to_string(k) == s) return k;
  return std::nullopt;
}

enum class Tier { hot, warm, cold };

inline std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::hot: return "hot";
    case Tier::warm: return "warm";
    case Tier::cold: return "cold";
  }
  return "?";
}

inline std::optional<Tier> parse_tier(std::string_view s) {
  if (s == "hot") return Tier::hot;
  if (s == "warm") return Tier::warm;
  if (s == "cold") return Tier::cold;
  return std::nullopt;
}

/// One semantic version of an artifact: the edit, who made it, and why.
struct PalimpsestEntry {
  std::uint64_t version = 1;  // consecutive from 1
  std::string rationale;
  std::string content_before;
  std::string content_after;
  std::string author;
  std::uint64_t step = 0;
};

struct Artifact {
  std::string id;
  ArtifactKind kind = ArtifactKind::document;
  std::string content;
  FrontMatter front_matter;
  Tier tier = Tier::hot;
  std::uint64_t use_count = 0;
  std::uint64_t created_step = 0;
  std::uint64_t last_used_step = 0;
  std::vector<PalimpsestEntry> history;

  std::uint64_t current_version() const {
    return history.empty() ? 0 : history.back().version;
  }

  std::string name() const {
    return front_matter.get("name").value_or(id);
  }
};

struct TierMigrationRecord {
  std::string artifact_id;
  Tier from = Tier::hot;
  Tier to = Tier::hot;
  std::string reason;
  std::uint64_t step = 0;
  std::uint64_t event_id = 0;
};

struct MaintenanceReport {
  std::vector<std::vector<std::string>> duplicate_groups;  // ids, ascending
  std::vector<std::string> stale_ids;
  std::vector<std::vector<std::string>> name_conflicts;  // ids sharing a name per kind

  bool empty() const {
    return duplicate_groups.empty() && stale_ids.empty() && name_conflicts.empty();
  }
};

struct StoreConfig {
  std::uint64_t promotion_threshold = 3;  // validated uses before hot -> warm
  std::uint64_t staleness_window = 1000;  // logical steps
};

/// Read/write contract shared by the persistent store and sandbox overlays.
class StoreInterface {
 public:
  virtual ~StoreInterface() = default;

  virtual Artifact& put_artifact(ArtifactKind kind, std::string content,
                                 FrontMatter front_matter,
                                 std::string explicit_id = {}) = 0;
  virtual const Artifact& get_artifact(const std::string& id) const = 0;
  virtual bool has_artifact(const std::string& id) const = 0;
  virtual const PalimpsestEntry& revise_artifact(const std::string& id,
                                                 std::string new_content,
                                                 std::string rationale,
                                                 std::string author,
                                                 std::uint64_t expected_version = 0) = 0;
  virtual const Artifact& rollback_artifact(const std::string& id,
                                            std::uint64_t target_version,
                                            std::string author = "system") = 0;
  virtual const Artifact& record_use(const std::string& id, bool validated,
                                     const std::string& subject = "system") = 0;
  virtual std::vector<std::string> artifact_ids() const = 0;
  virtual BindingLog& bindings() = 0;
  virtual std::uint64_t current_step() const = 0;
  virtual std::uint64_t advance_step() = 0;
};

/// The persistent artifact store: front-mattered markdown documents with an
/// append-only palimpsest history per artifact and a shared provenance log.
class Store : public StoreInterface {
 public:
  explicit Store(StoreConfig config = {}) : config_(config) {}

  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const StoreConfig& config() const { return config_; }
  void set_config(StoreConfig c) { config_ = c; }

  Artifact& put_artifact(ArtifactKind kind, std::string content,
                         FrontMatter front_matter,
                         std::string explicit_id = {}) override {
    std::lock_guard lock(mu_);
    std::string id = explicit_id.empty() ? next_id(kind) : std::move(explicit_id);
    if (artifacts_.count(id))
      fail(ErrorCode::IdCollision, "artifact id '" + id + "' already exists");
    Artifact a;
    a.id = id;
    a.kind = kind;
    a.content = std::move(content);
    a.front_matter = std::move(front_matter);
    a.front_matter.set("kind", std::string(to_string(kind)));
    if (!a.front_matter.has("name")) a.front_matter.set("name", id);
    a.tier = Tier::hot;
    a.created_step = ++step_;
    a.last_used_step = a.created_step;
    PalimpsestEntry e;
    e.version = 1;
    e.rationale = "created";
    e.content_before = "";
    e.content_after = a.content;
    e.author = "system";
    e.step = a.created_step;
    a.history.push_back(std::move(e));
    auto [it, _] = artifacts_.emplace(id, std::move(a));
    return it->second;
  }

  const Artifact& get_artifact(const std::string& id) const override {
    std::lock_guard lock(mu_);
    return find(id);
  }

  bool has_artifact(const std::string& id) const override {
    std::lock_guard lock(mu_);
    return artifacts_.count(id) > 0;
  }

  /// Appends a new palimpsest entry. Pass the version the caller last read as
  /// expected_version to detect a concurrent edit; 0 skips the check.
  const PalimpsestEntry& revise_artifact(const std::string& id,
                                         std::string new_content,
                                         std::string rationale, std::string author,
                                         std::uint64_t expected_version = 0) override {
    std::lock_guard lock(mu_);
    if (rationale.empty())
      fail(ErrorCode::RationaleRequired, "revision of '" + id + "' needs a rationale");
    Artifact& a = find_mut(id);
    if (expected_version != 0 && expected_version != a.current_version())
      fail(ErrorCode::ConcurrentEdit,
           "artifact '" + id + "' is at v" + std::to_string(a.current_version()) +
               ", caller expected v" + std::to_string(expected_version));
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

  /// Restores the body of target_version as a NEW entry; history is never cut.
  const Artifact& rollback_artifact(const std::string& id, std::uint64_t target_version,
                                    std::string author = "system") override {
    std::lock_guard lock(mu_);
    Artifact& a = find_mut(id);
    if (target_version < 1 || target_version > a.current_version())
      fail(ErrorCode::VersionNotFound,
           "artifact '" + id + "' has no version " + std::to_string(target_version));
    const std::string restored = a.history[target_version - 1].content_after;
    PalimpsestEntry e;
    e.version = a.current_version() + 1;
    e.rationale = "rollback to v" + std::to_string(target_version);
    e.content_before = a.content;
    e.content_after = restored;
    e.author = std::move(author);
    e.step = ++step_;
    a.content = restored;
    a.history.push_back(std::move(e));
    return a;
  }

  TierMigrationRecord migrate_tier(const std::string& id, Tier new_tier,
                                   const std::string& reason) {
    std::lock_guard lock(mu_);
    return migrate_locked(find_mut(id), new_tier, reason);
  }

  /// Hebbian usage accounting: a validated use increments use_count and may
  /// promote the artifact; any use revives a cold artifact.
  const Artifact& record_use(const std::string& id, bool validated,
                             const std::string& subject = "system") override {
    std::lock_guard lock(mu_);
    Artifact& a = find_mut(id);
    ++step_;
    a.last_used_step = step_;
    if (a.tier == Tier::cold) migrate_locked(a, Tier::hot, "reused while cold");
    log_.append(BindingKind::tool_call, subject, a.id,
                validated ? "validated use" : "unvalidated use", std::nullopt, step_,
                validated ? BindingOutcome::validated : BindingOutcome::failed);
    if (validated) {
      ++a.use_count;
      if (a.tier == Tier::hot && a.use_count >= config_.promotion_threshold)
        migrate_locked(a, Tier::warm, "promotion at " + std::to_string(a.use_count) +
                                          " validated uses");
    }
    return a;
  }

  /// Metadata tag outside the palimpsest (tier labels, advisory marks).
  void set_front_matter(const std::string& id, const std::string& key,
                        std::string value) {
    std::lock_guard lock(mu_);
    find_mut(id).front_matter.set(key, std::move(value));
  }

  /// Marks a pending binding event validated and credits the bound artifact.
  void validate_binding(std::uint64_t event_id) {
    std::lock_guard lock(mu_);
    const BindingEvent& e = log_.get(event_id);
    if (e.outcome != BindingOutcome::pending) return;
    log_.set_outcome(event_id, BindingOutcome::validated);
    auto it = artifacts_.find(e.object);
    if (it != artifacts_.end()) {
      Artifact& a = it->second;
      ++a.use_count;
      a.last_used_step = ++step_;
      if (a.tier == Tier::cold) migrate_locked(a, Tier::hot, "reused while cold");
      if (a.tier == Tier::hot && a.use_count >= config_.promotion_threshold)
        migrate_locked(a, Tier::warm, "promotion at " + std::to_string(a.use_count) +
                                          " validated uses");
    }
  }

  /// Advisory scan: exact duplicates per kind, stale items, name collisions.
  /// Findings are tagged in front matter; nothing is deleted.
  MaintenanceReport run_maintenance() {
    std::lock_guard lock(mu_);
    MaintenanceReport report;
    // duplicates: identical whitespace-normalized body within a kind
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> by_body;
    for (const auto& [id, a] : artifacts_)
      by_body[{std::string(to_string(a.kind)), normalize_body(a.content)}].push_back(id);
    for (auto& [key, ids] : by_body) {
      if (ids.size() < 2) continue;
      std::sort(ids.begin(), ids.end());
      for (std::size_t i = 1; i < ids.size(); ++i)
        artifacts_.at(ids[i]).front_matter.set("duplicate_of", ids[0]);
      report.duplicate_groups.push_back(ids);
    }
    // stale: untouched for longer than the staleness window
    for (auto& [id, a] : artifacts_) {
      if (step_ > config_.staleness_window &&
          a.last_used_step < step_ - config_.staleness_window) {
        a.front_matter.set("stale", "true");
        report.stale_ids.push_back(id);
      }
    }
    std::sort(report.stale_ids.begin(), report.stale_ids.end());
    // conflicts: same front-matter name within a kind
    std::map<std::pair<std::string, std::string>, std::vector<std::string>> by_name;
    for (const auto& [id, a] : artifacts_)
      by_name[{std::string(to_string(a.kind)), a.name()}].push_back(id);
    for (auto& [key, ids] : by_name) {
      if (ids.size() < 2) continue;
      std::sort(ids.begin(), ids.end());
      report.name_conflicts.push_back(ids);
    }
    return report;
  }

  std::vector<std::string> artifact_ids() const override {
    std::lock_guard lock(mu_);
    std::vector<std::string> ids;
    ids.reserve(artifacts_.size());
    for (const auto& [id, _] : artifacts_) ids.push_back(id);
    return ids;
  }

  BindingLog& bindings() override { return log_; }
  const BindingLog& bindings() const { return log_; }

  std::uint64_t current_step() const override {
    std::lock_guard lock(mu_);
    return step_;
  }

  std::uint64_t advance_step() override {
    std::lock_guard lock(mu_);
    return ++step_;
  }

  std::vector<TierMigrationRecord> tier_migrations() const {
    std::lock_guard lock(mu_);
    return migrations_;
  }

  /// Immutable copy of every artifact, for sandboxes and pools.
  std::map<std::string, Artifact> snapshot_artifacts() const {
    std::lock_guard lock(mu_);
    return artifacts_;
  }

  /// Deterministic digest of the full store state (artifacts + histories).
  std::uint64_t state_hash() const {
    std::lock_guard lock(mu_);
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
      }
      h ^= 0xff;
      h *= 1099511628211ull;
    };
    for (const auto& [id, a] : artifacts_) {
      mix(id);
      mix(to_string(a.kind));
      mix(a.content);
      mix(serialize_document(a.front_matter, ""));
      mix(to_string(a.tier));
      mix(std::to_string(a.use_count));
      for (const auto& e : a.history) {
        mix(std::to_string(e.version));
        mix(e.rationale);
        mix(e.content_before);
        mix(e.content_after);
        mix(e.author);
      }
    }
    return h;
  }

  // --- file persistence ---------------------------------------------------

  /// Writes `<root>/<kind>/<id>.md` plus `<id>.palimpsest` sidecars and the
  /// provenance log.
  void save(const std::filesystem::path& root) const {
    std::lock_guard lock(mu_);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(root, ec);
    for (const auto& [id, a] : artifacts_) {
      fs::path dir = root / std::string(to_string(a.kind));
      fs::create_directories(dir, ec);
      FrontMatter fm = a.front_matter;
      fm.set("tier", std::string(to_string(a.tier)));
      fm.set("use_count", std::to_string(a.use_count));
      fm.set("created_step", std::to_string(a.created_step));
      fm.set("last_used_step", std::to_string(a.last_used_step));
      write_file(dir / (id + ".md"), serialize_document(fm, a.content));
      write_file(dir / (id + ".palimpsest"), serialize_palimpsest(a.history));
    }
    write_file(root / "provenance.log", log_.serialize());
    write_file(root / "step.counter", std::to_string(step_));
  }

  void load(const std::filesystem::path& root) {
    std::lock_guard lock(mu_);
    namespace fs = std::filesystem;
    if (!fs::exists(root)) fail(ErrorCode::IoError, "store root " + root.string());
    artifacts_.clear();
    for (const auto& kind_dir : fs::directory_iterator(root)) {
      if (!kind_dir.is_directory()) continue;
      auto kind = parse_kind(kind_dir.path().filename().string());
      if (!kind) continue;
      for (const auto& f : fs::directory_iterator(kind_dir.path())) {
        if (f.path().extension() != ".md") continue;
        ParsedDocument doc = parse_document(read_file(f.path()));
        Artifact a;
        a.id = f.path().stem().string();
        a.kind = *kind;
        a.content = doc.body;
        a.front_matter = doc.front_matter;
        if (auto t = a.front_matter.get("tier"))
          a.tier = parse_tier(*t).value_or(Tier::hot);
        if (auto v = a.front_matter.get("use_count")) a.use_count = std::stoull(*v);
        if (auto v = a.front_matter.get("created_step")) a.created_step = std::stoull(*v);
        if (auto v = a.front_matter.get("last_used_step"))
          a.last_used_step = std::stoull(*v);
        for (const char* k : {"tier", "use_count", "created_step", "last_used_step"})
          a.front_matter.erase(k);
        fs::path sidecar = f.path();
        sidecar.replace_extension(".palimpsest");
        if (fs::exists(sidecar))
          a.history = parse_palimpsest(read_file(sidecar));
        if (a.history.empty()) {
          PalimpsestEntry e;
          e.version = 1;
          e.rationale = "created";
          e.content_after = a.content;
          e.author = "system";
          a.history.push_back(std::move(e));
        }
        artifacts_.emplace(a.id, std::move(a));
      }
    }
    // resume auto-id generation past the highest persisted "<kind>-<n>"
    id_counters_.clear();
    for (const auto& [id, a] : artifacts_) {
      std::string prefix = std::string(to_string(a.kind)) + "-";
      if (id.starts_with(prefix)) {
        std::string tail = id.substr(prefix.size());
        if (!tail.empty() &&
            tail.find_first_not_of("0123456789") == std::string::npos) {
          std::uint64_t n = std::stoull(tail);
          auto& counter = id_counters_[static_cast<int>(a.kind)];
          counter = std::max(counter, n);
        }
      }
    }
    fs::path counter = root / "step.counter";
    if (fs::exists(counter)) step_ = std::stoull(read_file(counter));
    fs::path prov = root / "provenance.log";
    if (fs::exists(prov)) log_.restore(read_file(prov));
  }

  /// Palimpsest sidecar: per entry, six length-prefixed UTF-8 fields
  /// (version, step, author, rationale, content_before, content_after).
  static std::string serialize_palimpsest(const std::vector<PalimpsestEntry>& history) {
    std::string out;
    auto field = [&out](std::string_view s) {
      out += std::to_string(s.size());
      out += ':';
      out += s;
    };
    for (const auto& e : history) {
      field(std::to_string(e.version));
      field(std::to_string(e.step));
      field(e.author);
      field(e.rationale);
      field(e.content_before);
      field(e.content_after);
      out += '\n';
    }
    return out;
  }

  static std::vector<PalimpsestEntry> parse_palimpsest(std::string_view text) {
    std::vector<PalimpsestEntry> history;
    std::size_t pos = 0;
    auto field = [&]() -> std::string {
      std::size_t colon = text.find(':', pos);
      if (colon == std::string_view::npos)
        fail(ErrorCode::IoError, "truncated palimpsest record");
      std::size_t len = std::stoull(std::string(text.substr(pos, colon - pos)));
      if (colon + 1 + len > text.size())
        fail(ErrorCode::IoError, "truncated palimpsest record");
      std::string out(text.substr(colon + 1, len));
      pos = colon + 1 + len;
      return out;
    };
    while (pos < text.size()) {
      if (text[pos] == '\n') {
        ++pos;
        continue;
      }
      PalimpsestEntry e;
      e.version = std::stoull(field());
      e.step = std::stoull(field());
      e.author = field();
      e.rationale = field();
      e.content_before = field();
      e.content_after = field();
      history.push_back(std::move(e));
    }
    return history;
  }

  static std::string normalize_body(std::string_view body) {
    std::string out;
    bool pending_space = false;
    for (char c : body) {
      if (std::isspace(static_cast<unsigned char>(c)) != 0) {
        pending_space = !out.empty();
      } else {
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
      }
    }
    return out;
  }

 private:
  const Artifact& find(const std::string& id) const {
    auto it = artifacts_.find(id);
    if (it == artifacts_.end()) fail(ErrorCode::NotFound, "artifact '" + id + "'");
    return it->second;
  }

  Artifact& find_mut(const std::string& id) {
    auto it = artifacts_.find(id);
    if (it == artifacts_.end()) fail(ErrorCode::NotFound, "artifact '" + id + "'");
    return it->second;
  }

  TierMigrationRecord migrate_locked(Artifact& a, Tier new_tier,
                                     const std::string& reason) {
    if (a.tier == new_tier)
      fail(ErrorCode::NoOpMigration,
           "artifact '" + a.id + "' already in tier " + std::string(to_string(new_tier)));
    TierMigrationRecord rec;
    rec.artifact_id = a.id;
    rec.from = a.tier;
    rec.to = new_tier;
    rec.reason = reason;
    rec.step = ++step_;
    const BindingEvent& e = log_.append(
        BindingKind::tier_migration, "store", a.id,
        std::string(to_string(rec.from)) + "->" + std::string(to_string(rec.to)) + ": " +
            reason,
        std::nullopt, rec.step, BindingOutcome::validated);
    rec.event_id = e.event_id;
    a.tier = new_tier;
    migrations_.push_back(rec);
    return rec;
  }

  std::string next_id(ArtifactKind kind) {
    std::uint64_t n = ++id_counters_[static_cast<int>(kind)];
    return std::string(to_string(kind)) + "-" + std::to_string(n);
  }

  static void write_file(const std::filesystem::path& p, std::string_view content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + p.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
  }

  static std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  mutable std::recursive_mutex mu_;
  StoreConfig config_;
  std::map<std::string, Artifact> artifacts_;
  std::map<int, std::uint64_t> id_counters_;
  std::vector<TierMigrationRecord> migrations_;
  BindingLog log_;
  std::uint64_t step_ = 0;
};

}  // namespace lss
