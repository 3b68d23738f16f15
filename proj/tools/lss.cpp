// lss: command-line front end for the artifact store, execution cycle,
// evolution suites, provenance traces, and the retrieval bench.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "lss/lss.hpp"
#include "lss/remote_reasoner.hpp"

namespace fs = std::filesystem;

namespace {

fs::path store_root() {
  if (const char* home = std::getenv("LSS_HOME")) return fs::path(home);
  return fs::path(".lss");
}

lss::Store& persistent_store() {
  static lss::Store store;
  static bool loaded = false;
  if (!loaded) {
    loaded = true;
    if (fs::exists(store_root())) store.load(store_root());
  }
  return store;
}

std::string read_file_or_die(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) lss::fail(lss::ErrorCode::IoError, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<lss::Output> load_transcript(const fs::path& path) {
  nlohmann::json j = nlohmann::json::parse(read_file_or_die(path), nullptr, false);
  if (j.is_discarded() || !j.is_array())
    lss::fail(lss::ErrorCode::MalformedQuery, "transcript must be a JSON array");
  std::vector<lss::Output> transcript;
  for (const auto& item : j) {
    lss::Output o;
    o.text = item.value("text", "");
    o.environment_feedback = item.value("feedback", "");
    if (item.contains("actions"))
      for (const auto& a : item["actions"]) o.actions.push_back(a.get<std::string>());
    transcript.push_back(std::move(o));
  }
  return transcript;
}

int run_bench(const std::string& corpus_path, const std::string& variant_name, int k,
              long brief_limit, long read_limit, const std::string& reasoner_spec,
              const std::string& out_path) {
  lss::VariantConfig config;
  auto variant = lss::parse_variant(variant_name);
  if (!variant) lss::fail(lss::ErrorCode::MalformedQuery, "unknown variant " + variant_name);
  config.variant = *variant;
  config.k = k;
  config.brief_limit = brief_limit;
  config.read_limit = read_limit;
  if (reasoner_spec.starts_with("scripted:")) {
    auto canned = std::make_shared<std::map<std::string, std::vector<std::string>>>();
    nlohmann::json j = nlohmann::json::parse(
        read_file_or_die(reasoner_spec.substr(9)), nullptr, false);
    if (j.is_discarded() || !j.is_object())
      lss::fail(lss::ErrorCode::MalformedQuery, "scripted selection must be a JSON object");
    for (auto& [qid, ids] : j.items())
      for (const auto& id : ids) (*canned)[qid].push_back(id.get<std::string>());
    config.scripted_selection =
        [canned](const std::string& qid) -> std::optional<std::vector<std::string>> {
      auto it = canned->find(qid);
      if (it == canned->end()) return std::nullopt;
      return it->second;
    };
  } else if (reasoner_spec != "lexical" && !reasoner_spec.starts_with("remote:")) {
    lss::fail(lss::ErrorCode::MalformedQuery, "unknown reasoner " + reasoner_spec);
  }
  auto queries = lss::load_corpus(corpus_path);
  lss::BenchHarness harness(config);
  std::vector<lss::QueryReport> reports;
  for (const auto& q : queries) reports.push_back(harness.run_query(q));
  lss::BenchSummary summary = lss::compute_metrics(reports);
  if (!out_path.empty())
    lss::emit_report(summary, out_path);
  else
    std::cout << lss::render_report_csv(summary);
  std::cerr << "hit@" << k << "=" << summary.hit_at_k_rate
            << " top1=" << summary.top1_rate
            << " avg_total_tokens=" << summary.avg_total_tokens << "\n";
  return 0;
}

int run_evolve(const std::string& suite_path) {
  nlohmann::json j = nlohmann::json::parse(read_file_or_die(suite_path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    lss::fail(lss::ErrorCode::MalformedQuery, "suite must be a JSON object");
  lss::Store& store = persistent_store();
  std::vector<lss::ReplayTask> tasks;
  for (const auto& t : j.value("tasks", nlohmann::json::array())) {
    lss::ReplayTask task;
    task.name = t.value("name", "task");
    task.intent = t.value("intent", "");
    task.expect_substring = t.value("expect", "");
    if (t.value("where", "output") == "view")
      task.expect_where = lss::ReplayTask::Where::view;
    for (const auto& o : t.value("transcript", nlohmann::json::array())) {
      lss::Output out;
      out.text = o.value("text", "");
      task.transcript.push_back(std::move(out));
    }
    tasks.push_back(std::move(task));
  }
  std::vector<lss::Patch> patches;
  for (const auto& p : j.value("patches", nlohmann::json::array()))
    patches.push_back(lss::propose_patch(store, p.at("target").get<std::string>(),
                                         p.value("body", ""),
                                         p.at("hypothesis").get<std::string>()));
  lss::EvaluateOptions eval_opts;
  eval_opts.pass_threshold = j.value("pass_threshold", 1.0);
  eval_opts.ab_mode = j.value("ab_mode", false);
  std::vector<std::pair<lss::Patch*, lss::FitnessReport>> with_reports;
  for (lss::Patch& p : patches) {
    lss::SandboxEnv sandbox(store);
    lss::FitnessReport report = lss::evaluate_in_sandbox(sandbox, store, p, tasks, eval_opts);
    with_reports.emplace_back(&p, report);
  }
  lss::MergeOptions merge_opts;
  merge_opts.pass_threshold = eval_opts.pass_threshold;
  merge_opts.merge_cap = j.value("cap", 5L);
  auto merged = lss::select_merge(store, with_reports, merge_opts);
  for (const auto& [p, r] : with_reports)
    std::cout << p->patch_id << '\t' << p->target_artifact << '\t' << r.score << '\t'
              << (r.verdict_pass ? "pass" : "fail") << '\t'
              << (p->status == lss::PatchStatus::merged ? "merged" : "not-merged")
              << "\n";
  store.save(store_root());
  std::cerr << merged.size() << " patch(es) merged\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loosely-structured software kernel"};
  app.require_subcommand(1);

  // --- store ---------------------------------------------------------------
  auto* store_cmd = app.add_subcommand("store", "artifact store operations");
  store_cmd->require_subcommand(1);

  std::string kind_name = "document", name, content, content_file, artifact_id;
  auto* put = store_cmd->add_subcommand("put", "create an artifact");
  put->add_option("--kind", kind_name, "artifact kind");
  put->add_option("--name", name, "front-matter name");
  put->add_option("--content", content, "body text");
  put->add_option("--file", content_file, "read body from file");
  put->add_option("--id", artifact_id, "explicit id");

  std::string get_id;
  auto* get = store_cmd->add_subcommand("get", "print an artifact");
  get->add_option("id", get_id)->required();

  std::string log_id;
  auto* logc = store_cmd->add_subcommand("log", "print palimpsest history");
  logc->add_option("id", log_id)->required();

  std::string rb_id;
  std::uint64_t rb_version = 1;
  auto* rollback = store_cmd->add_subcommand("rollback", "restore a prior version");
  rollback->add_option("id", rb_id)->required();
  rollback->add_option("version", rb_version)->required();

  auto* maintain = store_cmd->add_subcommand("maintain", "duplicate/stale/conflict scan");

  // --- run -----------------------------------------------------------------
  std::string bundle = "default", transcript_path, run_intent = "run";
  long run_budget = 512, run_max_steps = 16;
  auto* run_cmd = app.add_subcommand("run", "execute a scripted cycle");
  run_cmd->add_option("--bundle", bundle, "role bundle name");
  run_cmd->add_option("--transcript", transcript_path, "scripted reasoner transcript")
      ->required();
  run_cmd->add_option("--intent", run_intent, "initial intent");
  run_cmd->add_option("--budget", run_budget, "view token budget");
  run_cmd->add_option("--max-steps", run_max_steps, "step cap");

  // --- evolve --------------------------------------------------------------
  std::string suite_path;
  auto* evolve_cmd = app.add_subcommand("evolve", "evaluate and merge patches");
  evolve_cmd->add_option("--suite", suite_path, "suite JSON")->required();

  // --- trace ---------------------------------------------------------------
  std::uint64_t trace_id = 0;
  auto* trace_cmd = app.add_subcommand("trace", "print a binding supply chain");
  trace_cmd->add_option("event-id", trace_id)->required();

  // --- bench ---------------------------------------------------------------
  std::string corpus_path, variant_name = "lens", reasoner_spec = "lexical", out_path;
  int k = 5;
  long brief_limit = 280, read_limit = 700;
  std::uint64_t seed = 0;
  auto* bench_cmd = app.add_subcommand("bench", "three-variant retrieval bench");
  bench_cmd->add_option("--corpus", corpus_path, "JSONL corpus")->required();
  bench_cmd->add_option("--variant", variant_name, "worker_only|lens|lens_index");
  bench_cmd->add_option("--k", k, "top-k");
  bench_cmd->add_option("--brief-limit", brief_limit, "lens brief chars");
  bench_cmd->add_option("--read-limit", read_limit, "worker read chars");
  bench_cmd->add_option("--reasoner", reasoner_spec, "lexical|scripted:<path>|remote:<url>");
  bench_cmd->add_option("--seed", seed, "rng seed");
  bench_cmd->add_option("--out", out_path, "CSV output path");

  // --- gen-corpus ----------------------------------------------------------
  std::size_t gen_queries = 100, gen_candidates = 50;
  std::string gen_out = "corpus.jsonl";
  std::uint64_t gen_seed = 7;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "write a synthetic corpus");
  gen_cmd->add_option("--queries", gen_queries);
  gen_cmd->add_option("--candidates", gen_candidates);
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("--out", gen_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (put->parsed()) {
      auto kind = lss::parse_kind(kind_name);
      if (!kind) lss::fail(lss::ErrorCode::MalformedQuery, "unknown kind " + kind_name);
      std::string body = content_file.empty() ? content : read_file_or_die(content_file);
      lss::FrontMatter fm;
      if (!name.empty()) fm.set("name", name);
      lss::Store& store = persistent_store();
      const lss::Artifact& a = store.put_artifact(*kind, body, fm, artifact_id);
      store.save(store_root());
      std::cout << a.id << "\n";
    } else if (get->parsed()) {
      const lss::Artifact& a = persistent_store().get_artifact(get_id);
      std::cout << lss::serialize_document(a.front_matter, a.content);
    } else if (logc->parsed()) {
      const lss::Artifact& a = persistent_store().get_artifact(log_id);
      for (const auto& e : a.history)
        std::cout << "v" << e.version << " step=" << e.step << " author=" << e.author
                  << " rationale=" << e.rationale << "\n";
    } else if (rollback->parsed()) {
      lss::Store& store = persistent_store();
      const lss::Artifact& a = store.rollback_artifact(rb_id, rb_version, "cli");
      store.save(store_root());
      std::cout << a.content;
    } else if (maintain->parsed()) {
      lss::Store& store = persistent_store();
      lss::MaintenanceReport r = store.run_maintenance();
      store.save(store_root());
      for (const auto& g : r.duplicate_groups) {
        std::cout << "duplicates:";
        for (const auto& id : g) std::cout << ' ' << id;
        std::cout << "\n";
      }
      for (const auto& id : r.stale_ids) std::cout << "stale: " << id << "\n";
      for (const auto& g : r.name_conflicts) {
        std::cout << "name-conflict:";
        for (const auto& id : g) std::cout << ' ' << id;
        std::cout << "\n";
      }
    } else if (run_cmd->parsed()) {
      lss::Store& store = persistent_store();
      lss::AgentRuntime runtime(store);
      lss::RoleBundle::default_bundle();  // the only bundle that ships
      lss::AgentInstance& inst = runtime.create_instance("cli-" + bundle);
      lss::ScriptedReasoner reasoner(load_transcript(transcript_path));
      lss::RunCycleOptions opts;
      opts.budget = run_budget;
      opts.max_steps = run_max_steps;
      runtime.run_cycle(inst, {run_intent, lss::Intent::Source::user, std::nullopt},
                        reasoner, opts);
      store.save(store_root());
      for (std::size_t i = 0; i < inst.trajectory.steps.size(); ++i) {
        const auto& s = inst.trajectory.steps[i];
        std::cout << "step " << i << " intent=" << s.intent << "\n"
                  << s.output << "\n";
        if (!s.feedback.empty()) std::cout << "feedback: " << s.feedback << "\n";
      }
    } else if (evolve_cmd->parsed()) {
      return run_evolve(suite_path);
    } else if (trace_cmd->parsed()) {
      lss::SupplyChain chain = persistent_store().bindings().trace(trace_id);
      for (const auto& e : chain.events)
        std::cout << e.event_id << '\t' << lss::to_string(e.kind) << '\t' << e.subject
                  << '\t' << e.object << '\t' << e.evidence << "\n";
    } else if (bench_cmd->parsed()) {
      return run_bench(corpus_path, variant_name, k, brief_limit, read_limit,
                       reasoner_spec, out_path);
    } else if (gen_cmd->parsed()) {
      lss::write_corpus(lss::generate_synthetic_corpus(gen_queries, gen_candidates,
                                                       gen_seed),
                        gen_out);
      std::cout << gen_out << "\n";
    }
  } catch (const lss::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return (e.code() == lss::ErrorCode::MalformedQuery ||
            e.code() == lss::ErrorCode::IoError)
               ? 2
               : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
