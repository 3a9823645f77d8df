/*
 * Copyright 2026 The kgqe Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "kgqe/error.hpp"
#include "kgqe/execution.hpp"
#include "kgqe/plan.hpp"
#include "kgqe/set_ops.hpp"

namespace kgqe {
namespace {

using testing::e;
using testing::ents;
using testing::r;

Query p(Query q, std::uint32_t rel) { return Query::project(std::move(q), r(rel)); }
Query a(std::uint32_t ent) { return Query::anchor(e(ent)); }

// Counts calls and forwards to another answerer.
class Counting final : public Answerer {
 public:
  explicit Counting(Answerer& inner) : inner_(inner) {}
  std::string name() const override { return inner_.name(); }
  bool consumes_evidence() const override { return inner_.consumes_evidence(); }
  AnswerList answer_step(const StepRequest& request) override {
    ++calls;
    return inner_.answer_step(request);
  }
  std::size_t calls = 0;

 private:
  Answerer& inner_;
};

ExecutionOptions unbounded() {
  ExecutionOptions options;
  options.retrieval.max_triples = RetrievalConfig::kUnbounded;
  return options;
}

TEST(Execute, TwoHopChainOnTinyKg) {
  auto g = testing::tiny_kg();
  ExactAnswerer exact(g);
  auto result = execute_plan(compile(p(p(a(0), 0), 1)), exact, g, {});
  EXPECT_EQ(result.answer.as_set(), ents({3, 4}));
  ASSERT_EQ(result.trace.size(), 2u);
  EXPECT_EQ(result.trace[0].output.entities, (std::vector<EntityId>{e(1), e(2)}));
  EXPECT_EQ(result.trace[1].inputs[0], ents({1, 2}));
  EXPECT_EQ(result.trace[0].signature, "P|r0|{e0}");
}

TEST(Execute, NegationSubtractsAtTheEnd) {
  auto g = testing::tiny_kg();
  ExactAnswerer exact(g);
  auto q = Query::intersect({{p(a(0), 0), false}, {p(a(1), 1), true}});
  auto result = execute_plan(compile(q), exact, g, {});
  EXPECT_EQ(result.answer.as_set(), ents({1, 2}));
  EXPECT_EQ(result.trace.back().kind, StepKind::kSubtract);
  EXPECT_EQ(result.answer.as_set(), eval_brute_force(q, g));
}

TEST(Execute, WarmCacheMakesNoBackendCalls) {
  auto g = testing::tiny_kg();
  ExactAnswerer exact(g);
  Counting counting(exact);
  StepCache cache;
  ExecutionOptions options;
  options.cache = &cache;
  auto plan = compile(Query::intersect({{p(a(0), 0), false}, {p(a(1), 1), true}}));
  auto cold = execute_plan(plan, counting, g, options);
  EXPECT_EQ(counting.calls, 3u);
  counting.calls = 0;
  auto warm = execute_plan(plan, counting, g, options);
  EXPECT_EQ(counting.calls, 0u);
  EXPECT_EQ(warm.answer.entities, cold.answer.entities);
  for (const auto& entry : warm.trace) {
    EXPECT_TRUE(entry.cache_hit);
    EXPECT_FALSE(entry.backend_called);
  }
  EXPECT_EQ(cache.size(), 3u);
}

TEST(Execute, EmptyIntermediateShortCircuits) {
  auto g = testing::tiny_kg();
  ExactAnswerer exact(g);
  Counting counting(exact);
  // e3 has no outgoing edges, so the second projection sees an empty input.
  auto result = execute_plan(compile(p(p(a(3), 0), 1)), counting, g, {});
  EXPECT_TRUE(result.answer.entities.empty());
  EXPECT_EQ(counting.calls, 1u);
  EXPECT_FALSE(result.trace[1].backend_called);

  EvidenceAnswerer evidence;
  auto grounded = execute_plan(compile(p(p(a(3), 0), 1)), evidence, g, {});
  EXPECT_TRUE(grounded.answer.entities.empty());
}

TEST(ExactStep, Examples) {
  auto g = testing::tiny_kg();
  Step project{0, StepKind::kProject, {ents({0})}, r(0)};
  std::vector<EntitySet> in = {ents({0})};
  EXPECT_EQ(exact_answer_step(project, g, in).entities, (std::vector<EntityId>{e(1), e(2)}));

  Step inter{2, StepKind::kIntersect, {StepRef{0}, StepRef{1}}, std::nullopt};
  std::vector<EntitySet> two = {ents({1, 2}), ents({2, 5})};
  EXPECT_EQ(exact_answer_step(inter, g, two).entities, (std::vector<EntityId>{e(2)}));

  Step sub{2, StepKind::kSubtract, {StepRef{0}, StepRef{1}}, std::nullopt};
  std::vector<EntitySet> minus_nothing = {ents({1, 2}), {}};
  EXPECT_EQ(exact_answer_step(sub, g, minus_nothing).entities,
            (std::vector<EntityId>{e(1), e(2)}));
}

TEST(EvidenceStep, FollowsOnlyListedTriples) {
  auto g = testing::tiny_kg();
  Step project{0, StepKind::kProject, {ents({0})}, r(0)};
  std::vector<EntitySet> in = {ents({0})};
  std::vector<RelationId> rels{r(0)};
  RetrievalConfig full;
  auto all = serialize_evidence(retrieve(g, ents({0}), rels, full));
  EXPECT_EQ(evidence_answer_step(project, all.text, in).entities,
            (std::vector<EntityId>{e(1), e(2)}));

  RetrievalConfig capped;
  capped.max_triples = 1;
  auto one = serialize_evidence(retrieve(g, ents({0}), rels, capped));
  EXPECT_EQ(evidence_answer_step(project, one.text, in).entities,
            (std::vector<EntityId>{e(1)}));

  Step inter{2, StepKind::kIntersect, {StepRef{0}, StepRef{1}}, std::nullopt};
  std::vector<EntitySet> two = {ents({1, 2}), ents({2, 5})};
  EXPECT_EQ(evidence_answer_step(inter, "", two).entities,
            exact_answer_step(inter, g, two).entities);
}

TEST(Scripted, ReplaysBySignature) {
  auto g = testing::tiny_kg();
  auto plan = compile(p(a(1), 1));
  ScriptedAnswerer hit(std::map<std::string, std::string>{{"P|r1|{e1}", "e3"}});
  EXPECT_EQ(execute_plan(plan, hit, g, {}).answer.entities, (std::vector<EntityId>{e(3)}));

  ScriptedAnswerer none(std::map<std::string, std::string>{{"P|r1|{e1}", "NONE"}});
  auto empty = execute_plan(plan, none, g, {});
  EXPECT_TRUE(empty.answer.entities.empty());
  EXPECT_TRUE(empty.answer.explicit_none);

  ScriptedAnswerer miss(std::map<std::string, std::string>{{"P|r0|{e0}", "e1"}});
  try {
    execute_plan(plan, miss, g, {});
    FAIL() << "expected ExecutionError";
  } catch (const ExecutionError& err) {
    EXPECT_EQ(err.step(), 0u);
    EXPECT_NE(std::string(err.what()).find("P|r1|{e1}"), std::string::npos);
  }
}

TEST(Scripted, FailureKeepsPartialTrace) {
  auto g = testing::tiny_kg();
  ScriptedAnswerer partial(std::map<std::string, std::string>{{"P|r0|{e0}", "e1\ne2"}});
  try {
    execute_plan(compile(p(p(a(0), 0), 1)), partial, g, {});
    FAIL() << "expected ExecutionError";
  } catch (const ExecutionError& err) {
    EXPECT_EQ(err.step(), 1u);
    ASSERT_EQ(err.partial_trace().size(), 1u);
    EXPECT_EQ(err.partial_trace()[0].output.entities, (std::vector<EntityId>{e(1), e(2)}));
  }
}

TEST(Scripted, StreamFormat) {
  std::istringstream in(R"({"signature":"P|r1|{e1}","output":"e3\ne4"})"
                        "\n\n");
  auto script = ScriptedAnswerer::from_stream(in);
  auto g = testing::tiny_kg();
  EXPECT_EQ(execute_plan(compile(p(a(1), 1)), script, g, {}).answer.entities,
            (std::vector<EntityId>{e(3), e(4)}));
  std::istringstream bad(R"({"signature":"x"})");
  EXPECT_THROW(ScriptedAnswerer::from_stream(bad), FormatError);
}

TEST(Cache, FirstWriteWins) {
  StepCache cache;
  AnswerList first;
  first.entities = {e(1)};
  AnswerList second;
  second.entities = {e(2)};
  EXPECT_EQ(cache.insert("k", first).entities, first.entities);
  EXPECT_EQ(cache.insert("k", second).entities, first.entities);
  EXPECT_EQ(cache.find("k")->entities, first.entities);
  EXPECT_FALSE(cache.find("other").has_value());
}

TEST(Cache, ConcurrentInsertsAgree) {
  StepCache cache;
  std::vector<std::jthread> threads;
  std::atomic<int> mismatches{0};
  for (std::uint32_t t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int k = 0; k < 200; ++k) {
        AnswerList mine;
        mine.entities = {e(t)};
        auto stored = cache.insert("s" + std::to_string(k), mine);
        auto again = cache.find("s" + std::to_string(k));
        if (!again || again->entities != stored.entities) ++mismatches;
      }
    });
  }
  threads.clear();
  EXPECT_EQ(mismatches.load(), 0);
  EXPECT_EQ(cache.size(), 200u);
}

// Exact execution equals the brute-force oracle on random graphs, for
// sampled instances and for random id fillings (often empty answers).
TEST(Execute, OracleEquivalenceSmall) {
  std::mt19937_64 rng(73);
  for (int round = 0; round < 8; ++round) {
    auto g = testing::random_graph(rng);
    ExactAnswerer exact(g);
    for (auto type : kAllQueryTypes) {
      for (int k = 0; k < 20; ++k) {
        auto sampled = sample_query(g, type, rng);
        Query q = sampled && k % 2 ? *sampled
                                   : testing::randomize_ids(template_for(type), rng,
                                                            g.entity_count(), g.relation_count());
        auto got = execute_plan(compile(q), exact, g, {}).answer.as_set();
        ASSERT_EQ(got, eval_brute_force(q, g)) << query_to_text(q);
      }
    }
  }
}

TEST(Execute, EvidenceMatchesExactWithUnboundedOneHop) {
  std::mt19937_64 rng(79);
  for (int round = 0; round < 6; ++round) {
    auto split = testing::random_split(testing::random_graph(rng), rng);
    ExactAnswerer exact(split.observed);
    EvidenceAnswerer evidence;
    for (auto type : kAllQueryTypes) {
      for (int k = 0; k < 10; ++k) {
        auto q = sample_query(split.full, type, rng);
        if (!q) continue;
        auto plan = compile(*q);
        auto want = execute_plan(plan, exact, split.observed, unbounded());
        auto got = execute_plan(plan, evidence, split.observed, unbounded());
        for (std::size_t s = 0; s < plan.steps.size(); ++s) {
          ASSERT_EQ(got.trace[s].output.as_set(), want.trace[s].output.as_set());
        }
      }
    }
  }
}

TEST(Execute, CacheDoesNotChangeAnswers) {
  std::mt19937_64 rng(83);
  auto split = testing::random_split(testing::random_graph(rng), rng);
  EvidenceAnswerer evidence;
  StepCache cache;
  ExecutionOptions cached = unbounded();
  cached.cache = &cache;
  std::size_t hits = 0;
  for (int round = 0; round < 3; ++round) {
    for (auto type : kAllQueryTypes) {
      auto q = sample_query(split.full, type, rng);
      if (!q) continue;
      auto plan = compile(*q);
      auto with = execute_plan(plan, evidence, split.observed, cached);
      auto without = execute_plan(plan, evidence, split.observed, unbounded());
      ASSERT_EQ(with.answer.entities, without.answer.entities);
      auto again = execute_plan(plan, evidence, split.observed, cached);
      ASSERT_EQ(again.answer.entities, without.answer.entities);
      for (const auto& t : again.trace) hits += t.cache_hit ? 1 : 0;
    }
  }
  EXPECT_GT(hits, 0u);
}

TEST(Execute, AnchorSeedsWhenNotExpandingIntermediates) {
  auto g = testing::tiny_kg();
  EvidenceAnswerer evidence;
  ExecutionOptions options;
  options.retrieval.expand_intermediates = false;
  options.retrieval.k_hops = 1;
  // Evidence stays around the anchor e0; the r1 edges of e1 and e2 are two
  // hops away.
  auto result = execute_plan(compile(p(p(a(0), 0), 1)), evidence, g, options);
  EXPECT_TRUE(result.answer.entities.empty());
  options.retrieval.k_hops = 2;
  result = execute_plan(compile(p(p(a(0), 0), 1)), evidence, g, options);
  EXPECT_EQ(result.answer.as_set(), ents({3, 4}));
}

AnswerList listed(std::initializer_list<std::uint32_t> ids) {
  AnswerList out;
  for (auto i : ids) out.entities.push_back(e(i));
  out.provenance = "t";
  return out;
}

TEST(Consensus, HandVotedExample) {
  std::vector<AnswerList> votes = {listed({3, 4}), listed({3}), listed({3, 5})};
  double disagreement = -1;
  auto majority = aggregate_votes(votes, 2, &disagreement);
  EXPECT_EQ(majority.entities, (std::vector<EntityId>{e(3)}));
  EXPECT_NEAR(disagreement, 2.0 / 3.0, 1e-12);

  auto any = aggregate_votes(votes, 1);
  EXPECT_EQ(any.entities, (std::vector<EntityId>{e(3), e(4), e(5)}));
}

TEST(Consensus, OrderingByVotesThenPositionThenId) {
  std::vector<AnswerList> votes = {listed({7, 2, 9}), listed({9, 2}), listed({1, 9})};
  auto out = aggregate_votes(votes, 1);
  // e9: 3 votes; e2: 2 votes; e7 and e1 first seen at position 0, e1 < e7.
  EXPECT_EQ(out.entities, (std::vector<EntityId>{e(9), e(2), e(1), e(7)}));
}

TEST(Consensus, ThresholdConfig) {
  ConsensusConfig c;
  c.agents = 3;
  EXPECT_EQ(c.effective_threshold(), 2u);
  c.agents = 4;
  EXPECT_EQ(c.effective_threshold(), 3u);
  c.threshold = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c.agents = 0;
  c.threshold = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Consensus, IdenticalAgentsMatchSingleAgent) {
  std::mt19937_64 rng(89);
  for (int round = 0; round < 4; ++round) {
    auto split = testing::random_split(testing::random_graph(rng), rng);
    AnswererFactory factory = [](std::size_t) { return std::make_unique<EvidenceAnswerer>(); };
    for (auto mode : {ConsensusConfig::Mode::kPerStep, ConsensusConfig::Mode::kFinalOnly}) {
      for (auto type : kAllQueryTypes) {
        auto q = sample_query(split.full, type, rng);
        if (!q) continue;
        auto plan = compile(*q);
        EvidenceAnswerer single;
        auto one = execute_plan(plan, single, split.observed, {});
        ConsensusConfig three;
        three.agents = 3;
        three.mode = mode;
        auto many = consensus_execute(plan, factory, three, split.observed, {});
        ASSERT_EQ(many.answer.entities, one.answer.entities);
        ASSERT_EQ(many.agent_traces.size(), 3u);
        for (std::size_t s = 0; s < plan.steps.size(); ++s) {
          ASSERT_EQ(many.trace[s].output.entities, one.trace[s].output.entities);
          ASSERT_EQ(many.trace[s].disagreement, 0.0);
        }
      }
    }
  }
}

// Random scripted agents; raising the threshold only removes entities.
TEST(Consensus, ThresholdIsMonotone) {
  auto g = testing::tiny_kg();
  std::mt19937_64 rng(97);
  for (int round = 0; round < 30; ++round) {
    auto q = testing::randomize_ids(template_for(kAllQueryTypes[round % 14]), rng, 6, 2);
    auto plan = compile(q);
    auto sigs = signatures(plan);
    const std::size_t n = 5;
    std::vector<std::map<std::string, std::string>> scripts(n);
    for (auto& script : scripts) {
      for (const auto& sig : sigs) {
        std::string out;
        for (std::uint32_t i = 0; i < 6; ++i) {
          if (rng() % 2) out += e(i).label() + "\n";
        }
        script[sig] = out.empty() ? "NONE" : out;
      }
    }
    AnswererFactory factory = [&](std::size_t agent) {
      return std::make_unique<ScriptedAnswerer>(scripts[agent]);
    };
    std::vector<ExecutionTrace> traces;
    for (std::size_t threshold = 1; threshold <= n; ++threshold) {
      ConsensusConfig c;
      c.agents = n;
      c.threshold = threshold;
      traces.push_back(consensus_execute(plan, factory, c, g, {}).trace);
    }
    for (std::size_t t = 1; t < traces.size(); ++t) {
      for (std::size_t s = 0; s < plan.steps.size(); ++s) {
        auto lower = traces[t - 1][s].output.as_set();
        auto higher = traces[t][s].output.as_set();
        ASSERT_TRUE(std::includes(lower.begin(), lower.end(), higher.begin(), higher.end()));
      }
    }
  }
}

TEST(Trace, RecordsAreStableWithoutTiming) {
  auto g = testing::tiny_kg();
  ExactAnswerer exact(g);
  auto plan = compile(p(p(a(0), 0), 1));
  auto first = trace_records("q", execute_plan(plan, exact, g, {}).trace);
  auto second = trace_records("q", execute_plan(plan, exact, g, {}).trace);
  EXPECT_EQ(first, second);
  EXPECT_EQ(first.find("wall"), std::string::npos);
  EXPECT_NE(trace_records("q", execute_plan(plan, exact, g, {}).trace, true).find("wall_us"),
            std::string::npos);
  std::size_t lines = std::count(first.begin(), first.end(), '\n');
  EXPECT_EQ(lines, 2u);
}

}  // namespace
}  // namespace kgqe
