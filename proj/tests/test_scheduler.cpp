#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>
#include <vector>

#include <aidsched/aidsched.hpp>

namespace aidsched {
namespace {

ScheduleConfig sched(ScheduleKind k, std::int64_t chunk = 1) {
  ScheduleConfig c;
  c.kind = k;
  c.chunk = chunk;
  return c;
}

SimOptions traced() {
  SimOptions o;
  o.record_trace = true;
  o.record_transitions = true;
  return o;
}

// Every index claimed exactly once across the whole trace.
void expect_exactly_once(const SimResult& res) {
  std::vector<int> seen(static_cast<std::size_t>(res.ni), 0);
  for (const auto& t : res.trace) {
    for (std::int64_t i = t.range.begin; i < t.range.end; ++i) {
      ASSERT_GE(i, 0);
      ASSERT_LT(i, res.ni);
      seen[static_cast<std::size_t>(i)] += 1;
    }
  }
  for (std::int64_t i = 0; i < res.ni; ++i) {
    ASSERT_EQ(seen[static_cast<std::size_t>(i)], 1) << "index " << i;
  }
  ASSERT_EQ(res.total_iterations(), res.ni);
}

TEST(StaticPartition, Examples) {
  EXPECT_EQ(static_partition(100, 4, 0), (IndexRange{0, 25}));
  EXPECT_EQ(static_partition(100, 4, 3), (IndexRange{75, 100}));

  // NI = 10, n = 4 -> sizes (3, 3, 2, 2), lower ids earlier and larger
  std::vector<std::int64_t> sizes;
  for (int t = 0; t < 4; ++t) sizes.push_back(static_partition(10, 4, t).size());
  EXPECT_EQ(sizes, (std::vector<std::int64_t>{3, 3, 2, 2}));

  for (int t = 0; t < 4; ++t) EXPECT_EQ(static_partition(0, 4, t).size(), 0);
}

TEST(StaticPartition, BlocksTileTheLoop) {
  for (std::int64_t ni : {0, 1, 7, 100, 1001}) {
    for (int n : {1, 3, 4, 16}) {
      std::int64_t expect_begin = 0;
      std::int64_t max_size = 0, min_size = ni + 1;
      for (int t = 0; t < n; ++t) {
        const auto r = static_partition(ni, n, t);
        EXPECT_EQ(r.begin, expect_begin);
        expect_begin = r.end;
        max_size = std::max(max_size, r.size());
        min_size = std::min(min_size, r.size());
      }
      EXPECT_EQ(expect_begin, ni);
      if (ni >= n) EXPECT_LE(max_size - min_size, 1);
    }
  }
}

TEST(NextAssignment, StaticGivesOneBlockPerThread) {
  const auto topo = CoreTopology::symmetric(4);
  const auto res = simulate(IterationSpace(0, 100, 1), sched(ScheduleKind::Static),
                            topo, CostModel::uniform(1000), traced());
  ASSERT_EQ(res.trace.size(), 4u);
  for (const auto& t : res.threads) EXPECT_EQ(t.iterations, 25);
  expect_exactly_once(res);
}

TEST(NextAssignment, DynamicChunk1IsWidthOneDisjoint) {
  const auto topo = CoreTopology::symmetric(3);
  const auto res = simulate(IterationSpace(0, 50, 1), sched(ScheduleKind::Dynamic, 1),
                            topo, CostModel::uniform(1000), traced());
  for (const auto& t : res.trace) EXPECT_EQ(t.range.size(), 1);
  expect_exactly_once(res);
}

TEST(NextAssignment, GuidedFirstTakeAndDecay) {
  const auto topo = CoreTopology::symmetric(4);
  const auto res = simulate(IterationSpace(0, 80, 1), sched(ScheduleKind::Guided, 1),
                            topo, CostModel::uniform(1000), traced());
  ASSERT_FALSE(res.trace.empty());
  EXPECT_EQ(res.trace.front().range.size(), 20);  // ceil(80 / 4)
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    EXPECT_LE(res.trace[i].range.size(), res.trace[i - 1].range.size());
  }
  expect_exactly_once(res);
}

// AID-static on 2B+2S with exact speed ratio 4 and uniform costs: the hand
// trace gives per-thread totals of exactly (400, 400, 100, 100) and every
// thread finishing at 100 * c.
TEST(AidStatic, UnevenDistributionMatchesK) {
  const auto topo = CoreTopology::big_little(2, 2, 4.0);
  const std::int64_t c = 1000;
  const auto res = simulate(IterationSpace(0, 1000, 1), sched(ScheduleKind::AidStatic, 1),
                            topo, CostModel::uniform(c), traced());
  EXPECT_TRUE(res.sf_published);
  EXPECT_DOUBLE_EQ(res.estimated_sf, 4.0);
  ASSERT_EQ(res.threads.size(), 4u);
  EXPECT_EQ(res.threads[0].iterations, 400);
  EXPECT_EQ(res.threads[1].iterations, 400);
  EXPECT_EQ(res.threads[2].iterations, 100);
  EXPECT_EQ(res.threads[3].iterations, 100);
  EXPECT_EQ(res.makespan_ns, 100 * c);
  expect_exactly_once(res);
}

TEST(AidStatic, SymmetricTimingsReduceToEvenSplit) {
  CoreTopology topo({CoreTypeSpec{"a", 2, 1.0, {}}, CoreTypeSpec{"b", 2, 1.0, {}}});
  const auto res = simulate(IterationSpace(0, 100, 1), sched(ScheduleKind::AidStatic, 1),
                            topo, CostModel::uniform(1000), traced());
  EXPECT_DOUBLE_EQ(res.estimated_sf, 1.0);
  for (const auto& t : res.threads) EXPECT_EQ(t.iterations, 25);
  expect_exactly_once(res);
}

// Loop shorter than one sampling round: the pool drains during sampling, no
// AID assignment is ever handed out, and every iteration still runs once.
TEST(AidStatic, ShortLoopDegeneratesToDynamic) {
  const auto topo = CoreTopology::big_little(4, 4, 4.0);
  const auto res = simulate(IterationSpace(0, 8, 1), sched(ScheduleKind::AidStatic, 1),
                            topo, CostModel::uniform(1000), traced());
  for (const auto& t : res.trace) {
    EXPECT_NE(t.phase_after, LoopPhase::AidAssigned);
    EXPECT_EQ(t.range.size(), 1);
  }
  expect_exactly_once(res);
}

TEST(AidHybrid, TailCoversExactlyTheUnplannedFraction) {
  const auto topo = CoreTopology::big_little(2, 2, 4.0);
  ScheduleConfig cfg = sched(ScheduleKind::AidHybrid, 1);
  cfg.hybrid_fraction = 0.80;
  const auto res = simulate(IterationSpace(0, 1000, 1), cfg, topo,
                            CostModel::uniform(1000), traced());
  std::int64_t tail = 0;
  for (const auto& t : res.trace) {
    if (t.phase_after == LoopPhase::DynamicTail) tail += t.range.size();
  }
  EXPECT_EQ(tail, 200);  // NI - floor(0.8 * NI)
  expect_exactly_once(res);
}

TEST(AidHybrid, FullFractionBehavesLikeAidStatic) {
  const auto topo = CoreTopology::big_little(2, 2, 4.0);
  ScheduleConfig cfg = sched(ScheduleKind::AidHybrid, 1);
  cfg.hybrid_fraction = 1.0;
  const auto res = simulate(IterationSpace(0, 1000, 1), cfg, topo,
                            CostModel::uniform(1000), traced());
  std::int64_t tail = 0;
  for (const auto& t : res.trace) {
    if (t.phase_after == LoopPhase::DynamicTail) tail += t.range.size();
  }
  EXPECT_EQ(tail, 0);
  expect_exactly_once(res);
}

TEST(AidDynamic, SharesFollowRTimesM) {
  // R = 4, M = 5 -> big share 20, small share 5.
  const auto topo = CoreTopology::big_little(1, 1, 4.0);
  IterationSpace space(0, 10000, 1);
  SharedLoopState shared(space, topo);
  shared.r_per_type = {1.0, 4.0};
  detail::recompute_aid_shares(shared, 5);
  EXPECT_EQ(shared.aid_share_per_type[1], 20);
  EXPECT_EQ(shared.aid_share_per_type[0], 5);

  // Rounding: R = 1.3, M = 5 -> round(6.5) = 7 (half away from zero).
  shared.r_per_type = {1.0, 1.3};
  detail::recompute_aid_shares(shared, 5);
  EXPECT_EQ(shared.aid_share_per_type[1], 7);

  // Floor of one even for a tiny clamped R.
  shared.r_per_type = {1.0, kRMin};
  detail::recompute_aid_shares(shared, 5);
  EXPECT_EQ(shared.aid_share_per_type[1], 1);
}

TEST(AidDynamic, TailTakesAreNarrowOnceThresholdHit) {
  const auto topo = CoreTopology::big_little(4, 4, 4.0);
  ScheduleConfig cfg = sched(ScheduleKind::AidDynamic, 1);
  cfg.major_chunk = 5;
  const auto res = simulate(IterationSpace(0, 2000, 1), cfg, topo,
                            CostModel::uniform(1000), traced());
  const std::int64_t threshold = 5 * 8;
  bool saw_tail = false;
  for (const auto& t : res.trace) {
    if (t.remaining_before <= threshold) {
      EXPECT_LE(t.range.size(), cfg.chunk)
          << "wide take at remaining " << t.remaining_before;
      saw_tail = true;
    }
  }
  EXPECT_TRUE(saw_tail);
  expect_exactly_once(res);
}

TEST(AidDynamic, MajorEqualsMinorOnSymmetricActsLikeDynamic) {
  CoreTopology topo({CoreTypeSpec{"a", 2, 1.0, {}}, CoreTypeSpec{"b", 2, 1.0, {}}});
  ScheduleConfig aid = sched(ScheduleKind::AidDynamic, 4);
  aid.major_chunk = 4;
  const auto a = simulate(IterationSpace(0, 4000, 1), aid, topo,
                          CostModel::uniform(1000), traced());
  const auto d = simulate(IterationSpace(0, 4000, 1), sched(ScheduleKind::Dynamic, 4),
                          topo, CostModel::uniform(1000), traced());
  expect_exactly_once(a);
  expect_exactly_once(d);
  for (std::size_t i = 0; i < a.threads.size(); ++i) {
    EXPECT_NEAR(static_cast<double>(a.threads[i].iterations),
                static_cast<double>(d.threads[i].iterations), 2.0 * 4.0)
        << "thread " << i;
  }
}

TEST(AidDynamic, BigThreadsDrawProportionallyMore) {
  // Uniform costs and an exact ratio keep SM near 1, so R stays near SF and
  // big threads keep drawing round(R * M) while small threads draw M.
  const auto topo = CoreTopology::big_little(2, 2, 4.0);
  ScheduleConfig cfg = sched(ScheduleKind::AidDynamic, 1);
  cfg.major_chunk = 10;
  const auto res = simulate(IterationSpace(0, 20000, 1), cfg, topo,
                            CostModel::uniform(1000), traced());
  expect_exactly_once(res);
  const double big = static_cast<double>(res.threads[0].iterations);
  const double small = static_cast<double>(res.threads[3].iterations);
  EXPECT_GT(big / small, 2.5);
}

// ---------------------------------------------------------------------------
// State-machine conformance: every logged edge must appear in the AID state
// machines plus the documented extensions (the AidAssigned refinement of
// AID, the switch-over tail, pool-exhaustion exits, the hybrid/static drain).
// ---------------------------------------------------------------------------

using Edge = std::pair<LoopPhase, LoopPhase>;

std::set<Edge> allowed_edges(ScheduleKind kind) {
  using P = LoopPhase;
  std::set<Edge> e;
  // Sampling-era edges shared by both AID machines.
  e.insert({P::Sampling, P::SamplingWait});      // not the last sampler
  e.insert({P::Sampling, P::Aid});               // last sampler
  e.insert({P::SamplingWait, P::SamplingWait});  // keep stealing
  e.insert({P::SamplingWait, P::Aid});           // all threads sampled
  e.insert({P::Aid, P::AidAssigned});            // call-level refinement of AID
  // Pool exhaustion ends the machine from any live state.
  e.insert({P::Sampling, P::Done});
  e.insert({P::SamplingWait, P::Done});
  e.insert({P::Aid, P::Done});
  e.insert({P::DynamicTail, P::Done});
  if (kind == ScheduleKind::AidStatic || kind == ScheduleKind::AidHybrid) {
    e.insert({P::AidAssigned, P::Done});         // plan drained the pool
    e.insert({P::AidAssigned, P::DynamicTail});  // hybrid tail / leftover drain
  } else {
    e.insert({P::AidAssigned, P::SamplingWait});  // not the last in AID phase
    e.insert({P::AidAssigned, P::Aid});           // AID self-loop (last completer)
    e.insert({P::AidAssigned, P::Done});
    // Switch-over engages from any live state.
    e.insert({P::Sampling, P::DynamicTail});
    e.insert({P::SamplingWait, P::DynamicTail});
    e.insert({P::AidAssigned, P::DynamicTail});
    e.insert({P::Aid, P::DynamicTail});
  }
  return e;
}

void expect_conformant(const SimResult& res, ScheduleKind kind) {
  const auto allowed = allowed_edges(kind);
  for (const auto& tr : res.transitions) {
    ASSERT_TRUE(allowed.count({tr.from, tr.to}))
        << to_string(tr.from) << " -> " << to_string(tr.to) << " (thread "
        << tr.thread_id << ")";
  }
}

TEST(Conformance, AidMachinesFollowTheDiagrams) {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 60; ++round) {
    const int nb = 1 + static_cast<int>(rng() % 4);
    const int ns = 1 + static_cast<int>(rng() % 4);
    const double ratio = 1.0 + static_cast<double>(rng() % 40) / 10.0;
    const std::int64_t ni = static_cast<std::int64_t>(rng() % 3000);
    const auto topo = CoreTopology::big_little(nb, ns, ratio);
    for (ScheduleKind kind : {ScheduleKind::AidStatic, ScheduleKind::AidHybrid,
                              ScheduleKind::AidDynamic}) {
      ScheduleConfig cfg = sched(kind, 1 + static_cast<std::int64_t>(rng() % 4));
      cfg.major_chunk = cfg.chunk + static_cast<std::int64_t>(rng() % 10);
      const auto res =
          simulate(IterationSpace(0, ni, 1), cfg, topo,
                   CostModel::uniform(100 + static_cast<std::int64_t>(rng() % 1000)),
                   traced());
      expect_conformant(res, kind);
      expect_exactly_once(res);
    }
  }
}

TEST(Determinism, IdenticalInputsGiveIdenticalTraces) {
  const auto topo = CoreTopology::big_little(3, 2, 2.5);
  ScheduleConfig cfg = sched(ScheduleKind::AidDynamic, 2);
  cfg.major_chunk = 7;
  WorkloadSpec w;
  w.shape = WorkloadShape::RandomUniform;
  w.ni = 5000;
  w.base_cost_ns = 800;
  w.seed = 99;
  const auto a = simulate(w.space(), cfg, topo, w.cost_model(50), traced());
  const auto b = simulate(w.space(), cfg, topo, w.cost_model(50), traced());
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    EXPECT_EQ(a.trace[i].thread_id, b.trace[i].thread_id);
    EXPECT_EQ(a.trace[i].at_ns, b.trace[i].at_ns);
    EXPECT_EQ(a.trace[i].range, b.trace[i].range);
  }
  EXPECT_EQ(a.makespan_ns, b.makespan_ns);
}

}  // namespace
}  // namespace aidsched
