#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lss/evolution.hpp"

using namespace lss;

namespace {

Store& seeded_store(Store& store) {
  FrontMatter fm;
  fm.set("name", "config");
  store.put_artifact(ArtifactKind::skill, "flag=off", std::move(fm), "skill-cfg");
  return store;
}

ReplayTask output_task(const std::string& name, const std::string& text,
                       const std::string& expect) {
  ReplayTask t;
  t.name = name;
  t.intent = "run " + name;
  t.transcript = {{text, "", {}}};
  t.expect_substring = expect;
  return t;
}

ReplayTask view_task(const std::string& name, const std::string& intent,
                     const std::string& expect) {
  ReplayTask t;
  t.name = name;
  t.intent = intent;
  t.transcript = {{"noted", "", {}}};
  t.expect_substring = expect;
  t.expect_where = ReplayTask::Where::view;
  return t;
}

}  // namespace

TEST_CASE("sandbox reads fall through, writes stay in the overlay") {
  Store store;
  seeded_store(store);
  std::uint64_t base_hash = store.state_hash();
  SandboxEnv sandbox = open_sandbox(store);
  CHECK(sandbox.get_artifact("skill-cfg").content == "flag=off");
  sandbox.revise_artifact("skill-cfg", "flag=on", "try it", "evolver");
  CHECK(sandbox.get_artifact("skill-cfg").content == "flag=on");
  CHECK(store.get_artifact("skill-cfg").content == "flag=off");
  sandbox.put_artifact(ArtifactKind::plan, "sandbox only", {});
  CHECK(store.state_hash() == base_hash);
  CHECK(store.artifact_ids() == std::vector<std::string>{"skill-cfg"});
}

TEST_CASE("sandbox surface behaves like a store") {
  Store store;
  seeded_store(store);
  SandboxEnv sandbox(store);
  CHECK(sandbox.has_artifact("skill-cfg"));
  CHECK_THROWS_AS(sandbox.get_artifact("ghost"), Error);
  CHECK_THROWS_AS(sandbox.revise_artifact("skill-cfg", "x", "", "a"), Error);
  CHECK_THROWS_AS(sandbox.put_artifact(ArtifactKind::skill, "x", {}, "skill-cfg"), Error);
  sandbox.revise_artifact("skill-cfg", "v2", "edit", "a");
  sandbox.rollback_artifact("skill-cfg", 1);
  CHECK(sandbox.get_artifact("skill-cfg").content == "flag=off");
  CHECK(sandbox.get_artifact("skill-cfg").history.size() == 3);
  sandbox.record_use("skill-cfg", true);
  CHECK(sandbox.get_artifact("skill-cfg").use_count == 1);
  CHECK(store.get_artifact("skill-cfg").use_count == 0);
  CHECK(sandbox.bindings().size() == 1);
  CHECK(store.bindings().size() == 0);
}

TEST_CASE("sandboxes nest and track depth") {
  Store store;
  seeded_store(store);
  SandboxEnv outer(store);
  outer.revise_artifact("skill-cfg", "outer", "o", "a");
  SandboxEnv inner(outer);
  CHECK(outer.depth() == 1);
  CHECK(inner.depth() == 2);
  CHECK(inner.get_artifact("skill-cfg").content == "outer");
  inner.revise_artifact("skill-cfg", "inner", "i", "a");
  CHECK(outer.get_artifact("skill-cfg").content == "outer");
  CHECK(store.get_artifact("skill-cfg").content == "flag=off");
  SandboxEnv third(inner);
  CHECK(third.depth() == 3);
  CHECK(third.get_artifact("skill-cfg").content == "inner");
}

TEST_CASE("sandbox id listing merges base and overlay") {
  Store store;
  seeded_store(store);
  SandboxEnv sandbox(store);
  Artifact& a = sandbox.put_artifact(ArtifactKind::plan, "p", {});
  auto ids = sandbox.artifact_ids();
  REQUIRE(ids.size() == 2);
  CHECK(std::find(ids.begin(), ids.end(), "skill-cfg") != ids.end());
  CHECK(std::find(ids.begin(), ids.end(), a.id) != ids.end());
}

TEST_CASE("propose_patch requires a hypothesis and pins the rollback version") {
  Store store;
  seeded_store(store);
  store.revise_artifact("skill-cfg", "flag=half", "tweak", "a");
  CHECK_THROWS_AS(propose_patch(store, "skill-cfg", "x", ""), Error);
  CHECK_THROWS_AS(propose_patch(store, "ghost", "x", "h"), Error);
  Patch p = propose_patch(store, "skill-cfg", "flag=on", "turn it on");
  CHECK(p.status == PatchStatus::proposed);
  CHECK(p.target_artifact == "skill-cfg");
  CHECK(p.rollback_chain == std::vector<std::uint64_t>{2});
}

TEST_CASE("evaluate scores the fraction of passing replays") {
  Store store;
  seeded_store(store);
  Patch p = propose_patch(store, "skill-cfg", "flag=on", "h");
  std::vector<ReplayTask> suite{
      output_task("t1", "expected result here", "expected"),
      output_task("t2", "also expected output", "expected"),
      output_task("t3", "expected again", "expected"),
      output_task("t4", "something else entirely", "expected"),
  };
  SandboxEnv sandbox(store);
  FitnessReport r = evaluate_in_sandbox(sandbox, store, p, suite);
  CHECK(r.score == doctest::Approx(0.75));
  CHECK(!r.verdict_pass);  // default threshold is 1.0
  CHECK(p.status == PatchStatus::sandboxed);
  CHECK(!r.control_score);
  long expected_cost = 0;
  for (const auto& t : suite)
    for (const auto& o : t.transcript) expected_cost += estimate_tokens(o.text);
  CHECK(r.token_cost == expected_cost);
  CHECK(store.get_artifact("skill-cfg").content == "flag=off");  // base untouched
}

TEST_CASE("empty suites are rejected") {
  Store store;
  seeded_store(store);
  Patch p = propose_patch(store, "skill-cfg", "x", "h");
  SandboxEnv sandbox(store);
  CHECK_THROWS_AS(evaluate_in_sandbox(sandbox, store, p, {}), Error);
}

TEST_CASE("an identity patch ties its A/B control exactly") {
  Store store;
  seeded_store(store);
  Patch p = propose_patch(store, "skill-cfg", "flag=off", "no-op control check");
  std::vector<ReplayTask> suite{view_task("v1", "flag config skill", "flag=off"),
                                output_task("t1", "plain", "missing")};
  SandboxEnv sandbox(store);
  EvaluateOptions opts;
  opts.ab_mode = true;
  FitnessReport r = evaluate_in_sandbox(sandbox, store, p, suite, opts);
  REQUIRE(r.control_score);
  CHECK(r.score == *r.control_score);
  CHECK(r.score == doctest::Approx(0.5));
}

TEST_CASE("a patch that fixes the artifact raises the sandbox score over control") {
  Store store;
  seeded_store(store);
  Patch p = propose_patch(store, "skill-cfg", "flag=on", "enable the flag");
  // the expectation reads the projected artifact body, so the patch decides it
  std::vector<ReplayTask> suite{view_task("v1", "flag config skill", "flag=on")};
  SandboxEnv sandbox(store);
  EvaluateOptions opts;
  opts.ab_mode = true;
  FitnessReport r = evaluate_in_sandbox(sandbox, store, p, suite, opts);
  CHECK(r.score == doctest::Approx(1.0));
  CHECK(*r.control_score == doctest::Approx(0.0));
  CHECK(r.verdict_pass);
}

TEST_CASE("select_merge commits winners in patch order and rejects losers") {
  Store store;
  seeded_store(store);
  FrontMatter fm2;
  fm2.set("name", "other");
  store.put_artifact(ArtifactKind::skill, "body", std::move(fm2), "skill-other");
  Patch win = propose_patch(store, "skill-cfg", "flag=on", "enable");
  Patch lose = propose_patch(store, "skill-other", "changed", "worse");
  FitnessReport win_r;
  win_r.candidate_id = win.patch_id;
  win_r.score = 1.0;
  FitnessReport lose_r;
  lose_r.candidate_id = lose.patch_id;
  lose_r.score = 0.5;
  std::vector<std::pair<Patch*, FitnessReport>> batch{{&lose, lose_r}, {&win, win_r}};
  auto merged = select_merge(store, batch);
  CHECK(merged == std::vector<std::uint64_t>{win.patch_id});
  CHECK(win.status == PatchStatus::merged);
  CHECK(lose.status == PatchStatus::rejected);
  CHECK(store.get_artifact("skill-cfg").content == "flag=on");
  CHECK(store.get_artifact("skill-other").content == "body");
  const auto& hist = store.get_artifact("skill-cfg").history;
  CHECK(hist.back().rationale == "enable | score=1.0000");
}

TEST_CASE("a passing patch that loses its A/B control is rejected") {
  Store store;
  seeded_store(store);
  Patch p = propose_patch(store, "skill-cfg", "flag=on", "h");
  FitnessReport r;
  r.score = 1.0;
  r.control_score = 1.0;  // control did just as well: merge allowed
  std::vector<std::pair<Patch*, FitnessReport>> b1{{&p, r}};
  CHECK(select_merge(store, b1).size() == 1);

  Patch p2 = propose_patch(store, "skill-cfg", "flag=off", "h2");
  FitnessReport r2;
  r2.score = 0.8;
  r2.control_score = 0.9;
  MergeOptions opts;
  opts.pass_threshold = 0.7;
  std::vector<std::pair<Patch*, FitnessReport>> b2{{&p2, r2}};
  CHECK(select_merge(store, b2, opts).empty());
  CHECK(p2.status == PatchStatus::rejected);
}

TEST_CASE("merge cap bounds a round") {
  Store store;
  std::vector<Patch> patches;
  for (int i = 0; i < 8; ++i) {
    std::string id = "skill-p" + std::to_string(i);
    FrontMatter fm;
    fm.set("name", id);
    store.put_artifact(ArtifactKind::skill, "v1", std::move(fm), id);
    patches.push_back(propose_patch(store, id, "v2", "bulk"));
  }
  std::vector<std::pair<Patch*, FitnessReport>> batch;
  for (auto& p : patches) {
    FitnessReport r;
    r.score = 1.0;
    batch.emplace_back(&p, r);
  }
  auto merged = select_merge(store, batch);
  CHECK(merged.size() == 5);  // default cap
  // winners are the five lowest patch ids
  for (std::size_t i = 0; i < merged.size(); ++i) CHECK(merged[i] == patches[i].patch_id);
}

TEST_CASE("threshold is monotone: raising it never merges more") {
  Store store;
  seeded_store(store);
  for (double threshold : {0.2, 0.5, 0.9}) {
    Patch p = propose_patch(store, "skill-cfg", "body " + std::to_string(threshold),
                            "monotone probe");
    FitnessReport r;
    r.score = 0.5;
    MergeOptions opts;
    opts.pass_threshold = threshold;
    std::vector<std::pair<Patch*, FitnessReport>> batch{{&p, r}};
    bool merged = !select_merge(store, batch, opts).empty();
    CHECK(merged == (0.5 >= threshold));
  }
}

TEST_CASE("a merged patch rolls back through the palimpsest") {
  Store store;
  seeded_store(store);
  Patch p = propose_patch(store, "skill-cfg", "flag=on", "enable");
  FitnessReport r;
  r.score = 1.0;
  std::vector<std::pair<Patch*, FitnessReport>> batch{{&p, r}};
  select_merge(store, batch);
  CHECK(store.get_artifact("skill-cfg").content == "flag=on");
  store.rollback_artifact("skill-cfg", p.rollback_chain[0]);
  CHECK(store.get_artifact("skill-cfg").content == "flag=off");
  CHECK(store.get_artifact("skill-cfg").history.size() == 3);  // nothing deleted
}

TEST_CASE("genetic round guards") {
  Store store;
  Trajectory baseline;
  GeneticOptions opts;
  opts.mutation_ops = {};
  CHECK_THROWS_AS(genetic_round(store, baseline, {}, opts), Error);
  GeneticOptions bad;
  bad.population_size = 1;
  bad.survivors = 2;
  CHECK_THROWS_AS(genetic_round(store, baseline, {}, bad), Error);
}

TEST_CASE("dropping the only scripted step fails every candidate") {
  Store store;
  Trajectory baseline;
  std::vector<ReplayTask> suite{output_task("t", "the magic word", "magic")};
  GeneticOptions opts;
  opts.population_size = 3;
  opts.survivors = 2;
  opts.mutation_ops = {MutationOp::drop_step};
  opts.seed = 7;
  GeneticOutcome out = genetic_round(store, baseline, suite, opts);
  REQUIRE(out.candidates.size() == 3);
  for (const auto& c : out.candidates) CHECK(c.score == doctest::Approx(0.0));
  CHECK(out.survivor_indices == std::vector<std::size_t>{0, 1});
  CHECK(out.trace_artifact_ids.size() == 2);
}

TEST_CASE("injecting a winning fragment passes every candidate") {
  Store store;
  Trajectory baseline;
  std::vector<ReplayTask> suite{
      output_task("t", "nothing useful\nINTENT: continue\n", "magic")};
  GeneticOptions opts;
  opts.population_size = 4;
  opts.survivors = 1;
  opts.mutation_ops = {MutationOp::inject_fragment};
  opts.fragments = {{"the magic word\nINTENT: continue\n", "", {}}};
  opts.seed = 3;
  GeneticOutcome out = genetic_round(store, baseline, suite, opts);
  for (const auto& c : out.candidates) CHECK(c.score == doctest::Approx(1.0));
  CHECK(out.survivor_indices == std::vector<std::size_t>{0});
  // the survivor's novel outputs were distilled into a persistent trace
  REQUIRE(out.trace_artifact_ids.size() == 1);
  const Artifact& trace = store.get_artifact(out.trace_artifact_ids[0]);
  CHECK(trace.kind == ArtifactKind::trace);
  CHECK(trace.content.find("magic word") != std::string::npos);
}

TEST_CASE("genetic rounds are bit-deterministic for a fixed seed") {
  std::vector<ReplayTask> suite{output_task("t1", "alpha beta", "alpha"),
                                output_task("t2", "gamma delta", "zeta")};
  Trajectory baseline;
  StepRecord s;
  s.output = "baseline knowledge";
  baseline.append(std::move(s));
  GeneticOptions opts;
  opts.population_size = 5;
  opts.survivors = 2;
  opts.seed = 99;
  opts.alternates = {{"swapped output", "", {}}};
  opts.fragments = {{"injected output", "", {}}};

  Store s1, s2;
  GeneticOutcome a = genetic_round(s1, baseline, suite, opts);
  GeneticOutcome b = genetic_round(s2, baseline, suite, opts);
  CHECK(a.survivor_indices == b.survivor_indices);
  REQUIRE(a.candidates.size() == b.candidates.size());
  for (std::size_t i = 0; i < a.candidates.size(); ++i) {
    CHECK(a.candidates[i].score == b.candidates[i].score);
    CHECK(a.candidates[i].token_cost == b.candidates[i].token_cost);
  }
  CHECK(s1.state_hash() == s2.state_hash());

  GeneticOptions other = opts;
  other.seed = 100;
  Store s3;
  genetic_round(s3, baseline, suite, other);  // must not crash; may differ
}

TEST_CASE("non-survivor side effects never reach the persistent store") {
  Store store;
  seeded_store(store);
  std::map<std::string, Artifact> before = store.snapshot_artifacts();
  Trajectory baseline;
  std::vector<ReplayTask> suite{output_task("t", "anything", "absent")};
  GeneticOptions opts;
  opts.population_size = 4;
  opts.survivors = 1;
  opts.seed = 5;
  GeneticOutcome out = genetic_round(store, baseline, suite, opts);
  // pre-existing artifacts are byte-identical; only survivor traces were added
  for (const auto& [id, a] : before) {
    const Artifact& now = store.get_artifact(id);
    CHECK(now.content == a.content);
    CHECK(now.history.size() == a.history.size());
  }
  std::vector<std::string> added;
  for (const auto& id : store.artifact_ids())
    if (!before.count(id)) added.push_back(id);
  CHECK(added == out.trace_artifact_ids);
}

TEST_CASE("evolve spec parsing") {
  EvolveSpec spec = parse_evolve_spec(
      "cap: 3\npass_threshold: 0.8\nmutation_ops: drop_step inject_fragment\n"
      "task_suite: suite-7\n");
  CHECK(spec.cap == 3);
  CHECK(spec.pass_threshold == doctest::Approx(0.8));
  CHECK(spec.mutation_ops ==
        std::vector<std::string>{"drop_step", "inject_fragment"});
  CHECK(spec.task_suite == "suite-7");
  EvolveSpec defaults = parse_evolve_spec("");
  CHECK(defaults.cap == 5);
  CHECK(defaults.pass_threshold == doctest::Approx(1.0));
}
