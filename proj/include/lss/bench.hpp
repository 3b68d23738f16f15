#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lss/digest.hpp"
#include "lss/errors.hpp"
#include "lss/provenance.hpp"
#include "lss/tokens.hpp"

namespace lss {

struct BenchCandidate {
  std::string candidate_id;
  std::string text;
};

struct BenchQuery {
  std::string query_id;
  std::string local_context;
  std::vector<BenchCandidate> candidates;
  std::string gold_id;
};

enum class BenchVariant { worker_only, lens_worker, lens_index_worker };

inline std::string_view to_string(BenchVariant v) {
  switch (v) {
    case BenchVariant::worker_only: return "worker_only";
    case BenchVariant::lens_worker: return "lens_worker";
    case BenchVariant::lens_index_worker: return "lens_index_worker";
  }
  return "?";
}

inline std::optional<BenchVariant> parse_variant(std::string_view s) {
  if (s == "worker_only") return BenchVariant::worker_only;
  if (s == "lens" || s == "lens_worker") return BenchVariant::lens_worker;
  if (s == "lens_index" || s == "lens_index_worker")
    return BenchVariant::lens_index_worker;
  return std::nullopt;
}

struct VariantConfig {
  BenchVariant variant = BenchVariant::lens_worker;
  int k = 5;
  long brief_limit = 280;   // chars presented to the lens per candidate
  long read_limit = 700;    // chars per snippet the worker reads
  long local_window_tokens = 512;
  /// Transcript replay: canned selection per query id, overriding the
  /// lexical ranking. Token accounting still follows the variant mechanics.
  std::function<std::optional<std::vector<std::string>>(const std::string& query_id)>
      scripted_selection;
};

struct QueryReport {
  std::string query_id;
  BenchVariant variant = BenchVariant::worker_only;
  std::vector<std::string> selected_ids;
  bool hit_at_k = false;
  bool top1 = false;
  long worker_input_tokens = 0;
  long lens_tokens = 0;
  long index_tokens = 0;
  long total_tokens = 0;
};

struct BenchSummary {
  double hit_at_k_rate = 0.0;
  double top1_rate = 0.0;
  double avg_worker_tokens = 0.0;
  double avg_lens_tokens = 0.0;
  double avg_index_tokens = 0.0;
  double avg_total_tokens = 0.0;
  std::vector<QueryReport> reports;  // input order
};

// --- corpus -----------------------------------------------------------------

/// One JSON record per line:
/// {"query_id":..,"local_context":..,"candidates":[{"id":..,"text":..}],"gold_id":..}
inline std::vector<BenchQuery> parse_corpus(std::istream& in) {
  std::vector<BenchQuery> queries;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("query_id") ||
        !j.contains("candidates") || !j.contains("gold_id"))
      fail(ErrorCode::MalformedQuery, "line " + std::to_string(line_no));
    BenchQuery q;
    q.query_id = j["query_id"].get<std::string>();
    q.local_context = j.value("local_context", "");
    q.gold_id = j["gold_id"].get<std::string>();
    std::set<std::string> seen;
    for (const auto& c : j["candidates"]) {
      if (!c.contains("id") || !c.contains("text"))
        fail(ErrorCode::MalformedQuery, "line " + std::to_string(line_no));
      BenchCandidate cand{c["id"].get<std::string>(), c["text"].get<std::string>()};
      if (!seen.insert(cand.candidate_id).second)
        fail(ErrorCode::MalformedQuery,
             "line " + std::to_string(line_no) + ": duplicate candidate id");
      q.candidates.push_back(std::move(cand));
    }
    bool gold_present = std::any_of(
        q.candidates.begin(), q.candidates.end(),
        [&](const BenchCandidate& c) { return c.candidate_id == q.gold_id; });
    if (!gold_present)
      fail(ErrorCode::MalformedQuery,
           "line " + std::to_string(line_no) + ": gold_id not among candidates");
    queries.push_back(std::move(q));
  }
  return queries;
}

inline std::vector<BenchQuery> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
  return parse_corpus(in);
}

// --- harness ----------------------------------------------------------------

/// Suffix of the text holding at most max_tokens tokens; the worker's local
/// code window.
inline std::string local_window(const std::string& text, long max_tokens) {
  if (estimate_tokens(text) <= max_tokens) return text;
  // walk backwards until the suffix token count would exceed the cap
  for (std::size_t cut = 0; cut < text.size(); ++cut) {
    std::string_view suffix(text.data() + cut, text.size() - cut);
    if (estimate_tokens(suffix) <= max_tokens) return std::string(suffix);
  }
  return "";
}

/// Runs the three-variant retrieval mechanics with per-query token
/// accounting. Index packages are cached per candidate set, so repeated
/// queries over the same pool pay the construction cost once.
class BenchHarness {
 public:
  explicit BenchHarness(VariantConfig config) : config_(config) {
    if (config_.k < 1) fail(ErrorCode::InvalidK, "k must be >= 1");
    if (config_.brief_limit < 1 || config_.read_limit < 1)
      fail(ErrorCode::InvalidBudget, "limits must be >= 1");
  }

  const VariantConfig& config() const { return config_; }

  // instrumentation for the truncation contract
  long max_brief_chars_seen = 0;
  long max_read_chars_seen = 0;

  QueryReport run_query(const BenchQuery& query) {
    QueryReport report;
    report.query_id = query.query_id;
    report.variant = config_.variant;
    const std::string window = local_window(query.local_context, config_.local_window_tokens);
    switch (config_.variant) {
      case BenchVariant::worker_only: {
        // one Worker both scans every brief and selects
        report.worker_input_tokens += estimate_tokens(window);
        std::vector<std::string> briefs = briefs_of(query);
        for (const std::string& b : briefs) report.worker_input_tokens += estimate_tokens(b);
        report.selected_ids = rank(query, briefs, window);
        break;
      }
      case BenchVariant::lens_worker: {
        std::vector<std::string> briefs = briefs_of(query);
        for (const std::string& b : briefs) report.lens_tokens += estimate_tokens(b);
        report.selected_ids = rank(query, briefs, window);
        charge_worker_reads(query, report, window);
        break;
      }
      case BenchVariant::lens_index_worker: {
        const IndexPackage& pkg = index_for(query.candidates);
        report.index_tokens = pkg.tokens_charged_now;
        for (const std::string& line : pkg.lines)
          report.lens_tokens += estimate_tokens(line);
        report.selected_ids = rank(query, pkg.lines, window);
        charge_worker_reads(query, report, window);
        break;
      }
    }
    report.hit_at_k = std::find(report.selected_ids.begin(), report.selected_ids.end(),
                                query.gold_id) != report.selected_ids.end();
    report.top1 = !report.selected_ids.empty() && report.selected_ids[0] == query.gold_id;
    report.total_tokens =
        report.worker_input_tokens + report.lens_tokens + report.index_tokens;
    return report;
  }

 private:
  struct IndexPackage {
    std::vector<std::string> lines;  // one per candidate, input order
    long construction_tokens = 0;
    bool charged = false;
    long tokens_charged_now = 0;  // construction cost, first use only
  };

  std::vector<std::string> briefs_of(const BenchQuery& query) {
    std::vector<std::string> briefs;
    briefs.reserve(query.candidates.size());
    for (const BenchCandidate& c : query.candidates) {
      std::string b = c.text.substr(0, static_cast<std::size_t>(config_.brief_limit));
      max_brief_chars_seen = std::max(max_brief_chars_seen, static_cast<long>(b.size()));
      briefs.push_back(std::move(b));
    }
    return briefs;
  }

  /// Top-k candidate ids by lexical overlap between the local window and the
  /// per-candidate evidence, ties by ascending candidate index.
  std::vector<std::string> rank(const BenchQuery& query,
                                const std::vector<std::string>& evidence,
                                const std::string& window) const {
    if (config_.scripted_selection) {
      if (auto canned = config_.scripted_selection(query.query_id)) return *canned;
    }
    auto window_tokens = token_set(window);
    std::vector<std::pair<long, std::size_t>> scored;
    for (std::size_t i = 0; i < evidence.size(); ++i)
      scored.emplace_back(overlap_score(window_tokens, evidence[i]), i);
    std::stable_sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    std::vector<std::string> out;
    for (std::size_t r = 0; r < scored.size() && r < static_cast<std::size_t>(config_.k);
         ++r)
      out.push_back(query.candidates[scored[r].second].candidate_id);
    return out;
  }

  void charge_worker_reads(const BenchQuery& query, QueryReport& report,
                           const std::string& window) {
    report.worker_input_tokens += estimate_tokens(window);
    for (const std::string& id : report.selected_ids) {
      auto it = std::find_if(query.candidates.begin(), query.candidates.end(),
                             [&](const BenchCandidate& c) { return c.candidate_id == id; });
      std::string read =
          it->text.substr(0, static_cast<std::size_t>(config_.read_limit));
      max_read_chars_seen = std::max(max_read_chars_seen, static_cast<long>(read.size()));
      report.worker_input_tokens += estimate_tokens(read);
    }
  }

  /// Compact per-candidate index description: the candidate's sorted unique
  /// tokens, truncated to the brief limit.
  const IndexPackage& index_for(const std::vector<BenchCandidate>& candidates) {
    Fnv64 key;
    for (const BenchCandidate& c : candidates) {
      key.mix(c.candidate_id);
      key.mix(c.text);
    }
    IndexPackage& pkg = index_cache_[key.value()];
    if (pkg.lines.empty() && !pkg.charged) {
      for (const BenchCandidate& c : candidates) {
        pkg.construction_tokens += estimate_tokens(c.text);
        std::string line;
        for (const std::string& t : token_set(c.text)) {
          if (!line.empty()) line += ' ';
          line += t;
        }
        line = line.substr(0, static_cast<std::size_t>(config_.brief_limit));
        max_brief_chars_seen =
            std::max(max_brief_chars_seen, static_cast<long>(line.size()));
        pkg.lines.push_back(std::move(line));
      }
      pkg.charged = true;
      pkg.tokens_charged_now = pkg.construction_tokens;
    } else {
      pkg.tokens_charged_now = 0;  // amortized: persisted packages are reused
    }
    return pkg;
  }

  VariantConfig config_;
  std::map<std::uint64_t, IndexPackage> index_cache_;
};

// --- metrics ----------------------------------------------------------------

inline BenchSummary compute_metrics(const std::vector<QueryReport>& reports) {
  if (reports.empty()) fail(ErrorCode::NoReports, "no query reports");
  BenchSummary s;
  s.reports = reports;
  double n = static_cast<double>(reports.size());
  for (const QueryReport& r : reports) {
    s.hit_at_k_rate += r.hit_at_k ? 1.0 : 0.0;
    s.top1_rate += r.top1 ? 1.0 : 0.0;
    s.avg_worker_tokens += static_cast<double>(r.worker_input_tokens);
    s.avg_lens_tokens += static_cast<double>(r.lens_tokens);
    s.avg_index_tokens += static_cast<double>(r.index_tokens);
    s.avg_total_tokens += static_cast<double>(r.total_tokens);
  }
  s.hit_at_k_rate /= n;
  s.top1_rate /= n;
  s.avg_worker_tokens /= n;
  s.avg_lens_tokens /= n;
  s.avg_index_tokens /= n;
  s.avg_total_tokens /= n;
  return s;
}

// --- report export ----------------------------------------------------------

inline constexpr std::string_view kReportHeader =
    "query_id,variant,hit_at_k,top1,worker_tokens,lens_tokens,index_tokens,total_tokens";

inline std::string render_report_csv(const BenchSummary& summary) {
  std::ostringstream out;
  out << kReportHeader << "\n";
  for (const QueryReport& r : summary.reports) {
    out << r.query_id << ',' << to_string(r.variant) << ',' << (r.hit_at_k ? 1 : 0)
        << ',' << (r.top1 ? 1 : 0) << ',' << r.worker_input_tokens << ','
        << r.lens_tokens << ',' << r.index_tokens << ',' << r.total_tokens << "\n";
  }
  out << "# summary\n";
  out << "# hit_at_k_rate=" << summary.hit_at_k_rate << "\n";
  out << "# top1_rate=" << summary.top1_rate << "\n";
  out << "# avg_worker_tokens=" << summary.avg_worker_tokens << "\n";
  out << "# avg_lens_tokens=" << summary.avg_lens_tokens << "\n";
  out << "# avg_index_tokens=" << summary.avg_index_tokens << "\n";
  out << "# avg_total_tokens=" << summary.avg_total_tokens << "\n";
  return out.str();
}

inline void emit_report(const BenchSummary& summary, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  out << render_report_csv(summary);
}

/// Re-parses the data rows of an emitted CSV; round-trip check helper.
inline std::vector<QueryReport> parse_report_csv(const std::string& csv) {
  std::vector<QueryReport> rows;
  std::istringstream in(csv);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      if (line != kReportHeader) fail(ErrorCode::MalformedQuery, "bad header");
      first = false;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string field;
    QueryReport r;
    std::getline(ls, r.query_id, ',');
    std::getline(ls, field, ',');
    r.variant = parse_variant(field).value_or(BenchVariant::worker_only);
    std::getline(ls, field, ',');
    r.hit_at_k = field == "1";
    std::getline(ls, field, ',');
    r.top1 = field == "1";
    std::getline(ls, field, ',');
    r.worker_input_tokens = std::stol(field);
    std::getline(ls, field, ',');
    r.lens_tokens = std::stol(field);
    std::getline(ls, field, ',');
    r.index_tokens = std::stol(field);
    std::getline(ls, field, ',');
    r.total_tokens = std::stol(field);
    rows.push_back(std::move(r));
  }
  return rows;
}

// --- synthetic corpus generator ---------------------------------------------

/// Deterministic synthetic corpus: every candidate gets a distinct token
/// vocabulary and the gold candidate shares planted tokens with the query's
/// local context.
inline std::vector<BenchQuery> generate_synthetic_corpus(std::size_t n_queries,
                                                         std::size_t n_candidates,
                                                         std::uint64_t seed) {
  std::vector<BenchQuery> queries;
  std::uint64_t state = seed ? seed : 1;
  auto next = [&state]() {
    state ^= state << 13;
    state ^= state >> 7;
    state ^= state << 17;
    return state;
  };
  for (std::size_t q = 0; q < n_queries; ++q) {
    BenchQuery query;
    query.query_id = "q" + std::to_string(q);
    std::size_t gold = next() % n_candidates;
    std::string gold_marker = "goldmark" + std::to_string(q);
    for (std::size_t c = 0; c < n_candidates; ++c) {
      BenchCandidate cand;
      cand.candidate_id = "q" + std::to_string(q) + "c" + std::to_string(c);
      std::string text;
      for (int w = 0; w < 24; ++w)
        text += "w" + std::to_string(next() % 5000) + " ";
      if (c == gold) text += gold_marker + " " + gold_marker + "2 ";
      cand.text = text;
      query.candidates.push_back(std::move(cand));
    }
    query.gold_id = query.candidates[gold].candidate_id;
    query.local_context =
        "def complete(): # uses " + gold_marker + " and " + gold_marker + "2";
    queries.push_back(std::move(query));
  }
  return queries;
}

inline void write_corpus(const std::vector<BenchQuery>& queries,
                         const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
  for (const BenchQuery& q : queries) {
    nlohmann::json j;
    j["query_id"] = q.query_id;
    j["local_context"] = q.local_context;
    j["gold_id"] = q.gold_id;
    j["candidates"] = nlohmann::json::array();
    for (const BenchCandidate& c : q.candidates)
      j["candidates"].push_back({{"id", c.candidate_id}, {"text", c.text}});
    out << j.dump() << "\n";
  }
}

}  // namespace lss
