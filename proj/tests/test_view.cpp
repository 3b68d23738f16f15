#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lss/view.hpp"

using namespace lss;

namespace {

Artifact make(const std::string& id, const std::string& name, const std::string& body) {
  Artifact a;
  a.id = id;
  a.kind = ArtifactKind::skill;
  a.content = body;
  a.front_matter.set("name", name);
  return a;
}

Trajectory traj_of(const std::vector<std::string>& outputs) {
  Trajectory t;
  t.owner = "t";
  for (const auto& o : outputs) {
    StepRecord s;
    s.output = o;
    t.append(std::move(s));
  }
  return t;
}

}  // namespace

TEST_CASE("estimate_tokens definition") {
  CHECK(estimate_tokens("hello world") == 2);
  CHECK(estimate_tokens("f(x)=y") == 6);
  CHECK(estimate_tokens("") == 0);
  CHECK(estimate_tokens("   \n\t ") == 0);
  CHECK(estimate_tokens("a1b2") == 1);
}

TEST_CASE("project on empty pool") {
  View v = project({}, "anything", 100);
  CHECK(v.segments.empty());
  CHECK(v.total_tokens == 0);
}

TEST_CASE("project rejects non-positive budget") {
  CHECK_THROWS_AS(project({}, "x", 0), Error);
  CHECK_THROWS_AS(project({}, "x", -5), Error);
}

TEST_CASE("backpressure demotes to brief when full body does not fit") {
  std::string big = "relevant tokens here";
  for (int i = 0; i < 500; ++i) big += " w" + std::to_string(i);
  ArtifactPool pool{make("a1", "n", big)};
  long full_cost = estimate_tokens(big);
  ProjectOptions opts;
  opts.brief_limit = 40;
  std::string brief = big.substr(0, 40);
  long brief_cost = estimate_tokens(brief);
  long budget = brief_cost + (full_cost - brief_cost) / 2;  // brief fits, full does not
  View v = project(pool, "relevant", budget, opts);
  REQUIRE(v.segments.size() == 1);
  CHECK(v.segments[0].disclosure_level == 1);
  CHECK(v.segments[0].text == brief);
}

TEST_CASE("greedy fill takes the top-ranked artifacts that fit") {
  ArtifactPool pool;
  for (int i = 0; i < 10; ++i)
    pool.push_back(make("a" + std::to_string(i), "n" + std::to_string(i),
                        i < 3 ? "query match words plus body " + std::to_string(i)
                              : "unrelated filler " + std::to_string(i)));
  // hand-recomputed greedy: the 3 matching artifacts rank first
  long budget = 0;
  for (int i = 0; i < 3; ++i) budget += estimate_tokens(pool[i].content);
  View v = project(pool, "query match words", budget);
  REQUIRE(v.segments.size() >= 3);
  CHECK(v.segments[0].source_artifact_id == "a0");
  CHECK(v.segments[1].source_artifact_id == "a1");
  CHECK(v.segments[2].source_artifact_id == "a2");
  for (int i = 0; i < 3; ++i) CHECK(v.segments[i].disclosure_level == 2);
}

TEST_CASE("lens selection restricts and orders segments") {
  ArtifactPool pool{make("a", "a", "aaa"), make("b", "b", "bbb"), make("c", "c", "ccc")};
  ProjectOptions opts;
  opts.lens_selection = std::vector<std::string>{"c", "a"};
  View v = project(pool, "ignored", 1000, opts);
  REQUIRE(v.segments.size() == 2);
  CHECK(v.segments[0].source_artifact_id == "c");
  CHECK(v.segments[1].source_artifact_id == "a");
}

TEST_CASE("project never exceeds budget (property)") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    ArtifactPool pool;
    int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      std::string body;
      int words = static_cast<int>(rng() % 30);
      for (int w = 0; w < words; ++w) body += "w" + std::to_string(rng() % 50) + " ";
      pool.push_back(make("a" + std::to_string(i), "n" + std::to_string(i), body));
    }
    long budget = 1 + static_cast<long>(rng() % 60);
    View v = project(pool, "w1 w2 w3", budget);
    CHECK(v.total_tokens <= budget);
    long sum = 0;
    for (const auto& s : v.segments) sum += s.token_cost;
    CHECK(sum == v.total_tokens);
  }
}

TEST_CASE("expand is idempotent at unchanged budget") {
  ArtifactPool pool{make("a", "a", "alpha beta gamma"), make("b", "b", "delta")};
  View v = project(pool, "alpha", 4);
  View once = expand_view(v, pool, "alpha", 4);
  CHECK(once.total_tokens == v.total_tokens);
  CHECK(once.segments.size() == v.segments.size());
}

TEST_CASE("expand raises disclosure level when budget doubles") {
  std::string body = "match plus a long tail of words one two three four five six";
  ArtifactPool pool{make("a", "a", body)};
  ProjectOptions opts;
  opts.brief_limit = 10;
  long brief_cost = estimate_tokens(body.substr(0, 10));
  View v = project(pool, "match", brief_cost, opts);
  REQUIRE(v.segments.size() == 1);
  REQUIRE(v.segments[0].disclosure_level == 1);
  View expanded = expand_view(v, pool, "match", 1000, opts);
  REQUIRE(expanded.segments.size() == 1);
  CHECK(expanded.segments[0].disclosure_level == 2);
  CHECK(expanded.segments[0].text == body);
}

TEST_CASE("expand twice equals expand once") {
  ArtifactPool pool;
  for (int i = 0; i < 5; ++i)
    pool.push_back(make("a" + std::to_string(i), "n",
                        "some words " + std::to_string(i) + " more text"));
  View v = project(pool, "words", 6);
  View once = expand_view(v, pool, "words", 20);
  View twice = expand_view(once, pool, "words", 20);
  REQUIRE(once.segments.size() == twice.segments.size());
  for (std::size_t i = 0; i < once.segments.size(); ++i) {
    CHECK(once.segments[i].source_artifact_id == twice.segments[i].source_artifact_id);
    CHECK(once.segments[i].disclosure_level == twice.segments[i].disclosure_level);
    CHECK(once.segments[i].text == twice.segments[i].text);
  }
}

TEST_CASE("expand output is a superset with non-decreasing levels (property)") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    ArtifactPool pool;
    int n = 1 + static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) {
      std::string body;
      for (std::size_t w = 0; w < rng() % 20; ++w) body += "t" + std::to_string(rng() % 30) + " ";
      pool.push_back(make("a" + std::to_string(i), "n", body));
    }
    long b1 = 1 + static_cast<long>(rng() % 20);
    long b2 = b1 + static_cast<long>(rng() % 40);
    View v = project(pool, "t1 t2", b1);
    View e = expand_view(v, pool, "t1 t2", b2);
    CHECK(e.total_tokens <= b2);
    for (const auto& s : v.segments) {
      auto it = std::find_if(e.segments.begin(), e.segments.end(), [&](const ViewSegment& x) {
        return x.source_artifact_id == s.source_artifact_id;
      });
      REQUIRE(it != e.segments.end());
      CHECK(it->disclosure_level >= s.disclosure_level);
    }
  }
}

TEST_CASE("curate basics") {
  CHECK(curate(Trajectory{}, "x", 10).steps.empty());
  Trajectory t = traj_of({"alpha one", "beta two", "gamma three"});
  Trajectory all = curate(t, "anything", 100000);
  REQUIRE(all.steps.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(all.steps[i].output == t.steps[i].output);
}

TEST_CASE("tight budget keeps exactly the matching steps in order") {
  std::vector<std::string> outputs;
  for (int i = 0; i < 10; ++i)
    outputs.push_back(i % 3 == 0 && i < 9 ? "needle result " + std::to_string(i)
                                          : "haystack " + std::to_string(i));
  Trajectory t = traj_of(outputs);
  long budget = 0;
  for (int i : {0, 3, 6}) budget += estimate_tokens(t.steps[i].output);
  Trajectory c = curate(t, "needle", budget);
  REQUIRE(c.steps.size() == 3);
  CHECK(c.steps[0].output == t.steps[0].output);
  CHECK(c.steps[1].output == t.steps[3].output);
  CHECK(c.steps[2].output == t.steps[6].output);
}

TEST_CASE("curate is a deterministic order-preserving subsequence (property)") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> outputs;
    int n = static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      std::string o;
      for (std::size_t w = 0; w < rng() % 8; ++w) o += "k" + std::to_string(rng() % 10) + " ";
      outputs.push_back(o);
    }
    Trajectory t = traj_of(outputs);
    long budget = 1 + static_cast<long>(rng() % 30);
    Trajectory c1 = curate(t, "k1 k2", budget);
    Trajectory c2 = curate(t, "k1 k2", budget);
    REQUIRE(c1.steps.size() == c2.steps.size());
    // subsequence check
    std::size_t pos = 0;
    for (const StepRecord& s : c1.steps) {
      while (pos < t.steps.size() && t.steps[pos].output != s.output) ++pos;
      CHECK(pos < t.steps.size());
      ++pos;
    }
  }
}

TEST_CASE("branching isolates siblings and parent") {
  Trajectory t = traj_of({"alpha data", "beta data"});
  CHECK_THROWS_AS(branch_context(t, {}, 100), Error);
  auto branches = branch_context(t, {"alpha", "beta", "gamma"}, 1000);
  REQUIRE(branches.size() == 3);
  std::size_t parent_before = t.size();
  std::size_t b1_before = branches[1].size();
  StepRecord extra;
  extra.output = "branch-only step";
  branches[0].append(std::move(extra));
  CHECK(t.size() == parent_before);
  CHECK(branches[1].size() == b1_before);
}

TEST_CASE("disjoint intents retain the curate-oracle subsets") {
  Trajectory t = traj_of({"apple pie", "banana split", "cherry cake", "apple tart",
                          "banana bread"});
  auto branches = branch_context(t, {"apple", "banana", "cherry"}, 6);
  for (std::size_t b = 0; b < 3; ++b) {
    Trajectory oracle = curate(t, std::vector<std::string>{"apple", "banana", "cherry"}[b], 6);
    REQUIRE(branches[b].steps.size() == oracle.steps.size());
    for (std::size_t i = 0; i < oracle.steps.size(); ++i)
      CHECK(branches[b].steps[i].output == oracle.steps[i].output);
  }
}

TEST_CASE("stitch adds exactly one step") {
  Trajectory parent = traj_of({"base"});
  Trajectory branch = traj_of(std::vector<std::string>(50, "noise"));
  stitch_context(parent, branch, "the distilled answer");
  CHECK(parent.size() == 2);
  CHECK(parent.steps.back().output == "the distilled answer");
  CHECK_THROWS_AS(stitch_context(parent, branch, ""), Error);
  stitch_context(parent, branch, "two");
  stitch_context(parent, branch, "three");
  CHECK(parent.size() == 4);
  CHECK(parent.steps[2].output == "two");
  CHECK(parent.steps[3].output == "three");
}

TEST_CASE("view serialization uses bit-exact headers") {
  View v;
  v.segments.push_back({"skill-1", "body text", 2, 2});
  v.segments.push_back({"plan-9", "name (plan)", 0, 3});
  CHECK(v.to_text() == "### skill-1 [L2]\nbody text\n### plan-9 [L0]\nname (plan)\n");
}
