#pragma once

#include <atomic>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "iter_pool.hpp"
#include "sched_math.hpp"
#include "schedule_config.hpp"

namespace aidsched {

/// Per-thread position in the AID state machines.
///
/// Sampling, SamplingWait and Aid are the core states; AidAssigned is the
/// call-level refinement "holding an AID assignment and executing it", and
/// DynamicTail covers the plain-dynamic endgames: the AID-hybrid remainder,
/// AID-dynamic's switch-over, and the drain of any iterations an AID-static
/// plan left in the pool when threads kept stealing while the plan was
/// being computed.
enum class LoopPhase : std::uint8_t {
  Sampling,
  SamplingWait,
  Aid,
  AidAssigned,
  DynamicTail,
  Done,
};

inline const char* to_string(LoopPhase p) {
  switch (p) {
    case LoopPhase::Sampling: return "SAMPLING";
    case LoopPhase::SamplingWait: return "SAMPLING_WAIT";
    case LoopPhase::Aid: return "AID";
    case LoopPhase::AidAssigned: return "AID_ASSIGNED";
    case LoopPhase::DynamicTail: return "DYNAMIC_TAIL";
    case LoopPhase::Done: return "DONE";
  }
  return "?";
}

struct PhaseTransition {
  int thread_id = 0;
  LoopPhase from = LoopPhase::Sampling;
  LoopPhase to = LoopPhase::Sampling;
  std::int64_t at_ns = 0;
};

/// State owned exclusively by one worker thread for the duration of a loop.
struct ThreadLoopState {
  int thread_id = 0;
  /// Core type under the BS convention (low ids on fast cores). This is the
  /// scheduler's view; physical placement is the runtime's business.
  int core_type = 0;
  LoopPhase phase = LoopPhase::Sampling;
  /// Iterations taken before the pending AID assignment. For AID-static and
  /// AID-hybrid this spans sampling plus all wait-state steals; for
  /// AID-dynamic it resets at every AID assignment (one wait cycle).
  std::int64_t delta = 0;
  std::int64_t phase_entry_ns = 0;
  std::int64_t assigned_remaining = 0;
  std::uint32_t phase_seen = 0;
  bool sampling_taken = false;
  bool static_block_given = false;
  std::int64_t iterations_taken = 0;
  std::int64_t take_calls = 0;
  /// Optional transition log sink (owned by the caller, one per thread).
  std::vector<PhaseTransition>* transitions = nullptr;
};

struct alignas(64) PaddedCounter {
  std::atomic<std::int64_t> v{0};
};

struct alignas(64) PaddedCount32 {
  std::atomic<std::int32_t> v{0};
};

/// Per-loop state shared by all worker threads.
///
/// Cross-thread mutation goes through the atomics only. The plain fields
/// (sf, k, plan, r_per_type, aid_share_per_type) are written by the single
/// thread that wins a last-completer election and published by the release
/// store on `phase_number`; readers load `phase_number` with acquire before
/// touching them.
class SharedLoopState {
 public:
  SharedLoopState(const IterationSpace& space, const CoreTopology& topo)
      : pool(space),
        ni(space.trip_count()),
        n_threads(topo.total_threads()),
        n_types(topo.type_count()),
        sampling_time(topo.type_count()),
        sampling_count(topo.type_count()),
        phase_time(topo.type_count()),
        phase_count(topo.type_count()),
        deltas(topo.total_threads()),
        sf(SpeedupEstimate::uniform(topo.type_count())),
        r_per_type(topo.type_count(), 1.0),
        aid_share_per_type(topo.type_count(), 0),
        plan(topo.total_threads(), 0) {}

  IterationPool pool;
  std::int64_t ni;
  int n_threads;
  int n_types;

  // Sampling-phase accumulators, one slot per core type.
  std::vector<PaddedCounter> sampling_time;
  std::vector<PaddedCounter> sampling_count;
  std::atomic<std::int32_t> sampling_completed{0};

  // AID-phase accumulators; AID-dynamic recycles them every phase.
  std::vector<PaddedCounter> phase_time;
  std::vector<PaddedCounter> phase_count;
  std::atomic<std::int32_t> phase_completed{0};

  // Per-thread taken-before-assignment counters (AID-static / AID-hybrid
  // plan snapshot).
  std::vector<PaddedCounter> deltas;

  // Published by the last completer; guarded by phase_number.
  SpeedupEstimate sf;
  double k = 0.0;
  std::vector<double> r_per_type;
  std::vector<std::int64_t> aid_share_per_type;
  std::vector<std::int64_t> plan;
  bool sf_published = false;

  /// 0 while sampling; p >= 1 once the p'th AID assignment round is out.
  std::atomic<std::uint32_t> phase_number{0};
  std::atomic<bool> tail_engaged{false};

  [[nodiscard]] SamplingAccumulator snapshot_sampling() const {
    SamplingAccumulator acc(n_types);
    for (int j = 0; j < n_types; ++j) {
      acc.time_sum_ns[j] = sampling_time[j].v.load(std::memory_order_relaxed);
      acc.reported[j] =
          static_cast<std::int32_t>(sampling_count[j].v.load(std::memory_order_relaxed));
    }
    return acc;
  }

  [[nodiscard]] SamplingAccumulator snapshot_phase() const {
    SamplingAccumulator acc(n_types);
    for (int j = 0; j < n_types; ++j) {
      acc.time_sum_ns[j] = phase_time[j].v.load(std::memory_order_relaxed);
      acc.reported[j] =
          static_cast<std::int32_t>(phase_count[j].v.load(std::memory_order_relaxed));
    }
    return acc;
  }
};

/// Contiguous even partition; lower thread ids get the earlier blocks and,
/// when NI does not divide evenly, the larger ones. Block sizes differ by at
/// most one.
inline IndexRange static_partition(std::int64_t ni, int n_threads, int thread_id) {
  assert(thread_id >= 0 && thread_id < n_threads);
  const std::int64_t base = ni / n_threads;
  const std::int64_t rem = ni % n_threads;
  const std::int64_t begin =
      static_cast<std::int64_t>(thread_id) * base + std::min<std::int64_t>(thread_id, rem);
  const std::int64_t size = base + (thread_id < rem ? 1 : 0);
  return IndexRange{begin, begin + size};
}

namespace detail {

inline void transition(ThreadLoopState& t, LoopPhase to, std::int64_t now_ns) {
  if (t.transitions) {
    t.transitions->push_back({t.thread_id, t.phase, to, now_ns});
  }
  t.phase = to;
}

inline std::optional<IndexRange> record_take(ThreadLoopState& t,
                                             std::optional<IndexRange> r) {
  if (r) t.iterations_taken += r->size();
  if (r) t.assigned_remaining = r->size();
  return r;
}

inline std::optional<IndexRange> static_next(SharedLoopState& sh, ThreadLoopState& t,
                                             int n_threads, std::int64_t now) {
  if (t.phase == LoopPhase::Done) return std::nullopt;
  if (!t.static_block_given) {
    t.static_block_given = true;
    const IndexRange r = static_partition(sh.ni, n_threads, t.thread_id);
    if (r.size() > 0) {
      transition(t, LoopPhase::AidAssigned, now);
      return record_take(t, r);
    }
  }
  transition(t, LoopPhase::Done, now);
  return std::nullopt;
}

inline std::optional<IndexRange> dynamic_next(SharedLoopState& sh, ThreadLoopState& t,
                                              std::int64_t chunk, std::int64_t now) {
  if (t.phase == LoopPhase::Done) return std::nullopt;
  if (auto r = sh.pool.try_take(chunk)) {
    if (t.phase != LoopPhase::DynamicTail) transition(t, LoopPhase::DynamicTail, now);
    return record_take(t, r);
  }
  transition(t, LoopPhase::Done, now);
  return std::nullopt;
}

inline std::optional<IndexRange> guided_next(SharedLoopState& sh, ThreadLoopState& t,
                                             std::int64_t chunk_min, int n_threads,
                                             std::int64_t now) {
  if (t.phase == LoopPhase::Done) return std::nullopt;
  if (auto r = sh.pool.try_take_guided(n_threads, chunk_min)) {
    if (t.phase != LoopPhase::DynamicTail) transition(t, LoopPhase::DynamicTail, now);
    return record_take(t, r);
  }
  transition(t, LoopPhase::Done, now);
  return std::nullopt;
}

/// Last sampling completer for AID-static / AID-hybrid: estimate SF, plan
/// the whole AID distribution from a delta snapshot, publish.
inline void publish_aid_plan(const ScheduleConfig& cfg, SharedLoopState& sh,
                             const CoreTopology& topo) {
  const auto est = estimate_sf(sh.snapshot_sampling(), topo);
  const SpeedupEstimate sf = est ? *est : SpeedupEstimate::uniform(sh.n_types);

  const std::int64_t plan_total =
      cfg.kind == ScheduleKind::AidHybrid
          ? static_cast<std::int64_t>(cfg.hybrid_fraction * static_cast<double>(sh.ni))
          : sh.ni;

  std::vector<std::int64_t> deltas(sh.n_threads, 0);
  std::int64_t delta_sum = 0;
  for (int i = 0; i < sh.n_threads; ++i) {
    deltas[i] = sh.deltas[i].v.load(std::memory_order_relaxed);
    delta_sum += deltas[i];
  }
  const std::int64_t plan_remaining = std::max<std::int64_t>(0, plan_total - delta_sum);
  AllotmentPlan plan = plan_allotments(plan_remaining, topo, sf, deltas);

  sh.sf = sf;
  sh.k = plan.k;
  sh.plan = std::move(plan.counts);
  sh.sf_published = true;
  sh.phase_number.store(1, std::memory_order_release);
}

/// The AID-static machine: sampling, wait-with-steals, one planned AID
/// assignment. AID-hybrid runs the same machine over floor(P * NI)
/// iterations and finishes the remainder through the dynamic tail.
inline std::optional<IndexRange> aid_static_step(const ScheduleConfig& cfg,
                                                 SharedLoopState& sh,
                                                 ThreadLoopState& t,
                                                 const CoreTopology& topo,
                                                 std::int64_t now) {
  const std::int64_t chunk = cfg.chunk;
  for (;;) {
    switch (t.phase) {
      case LoopPhase::Sampling: {
        if (!t.sampling_taken) {
          t.phase_entry_ns = now;
          auto r = sh.pool.try_take(chunk);
          if (!r) {
            // Loop shorter than one sampling round: nothing left to schedule.
            transition(t, LoopPhase::Done, now);
            return std::nullopt;
          }
          t.sampling_taken = true;
          t.delta += r->size();
          sh.deltas[t.thread_id].v.store(t.delta, std::memory_order_relaxed);
          return record_take(t, r);
        }
        // Sampling chunk completed: report its time.
        const std::int64_t elapsed = now - t.phase_entry_ns;
        sh.sampling_time[t.core_type].v.fetch_add(elapsed, std::memory_order_relaxed);
        sh.sampling_count[t.core_type].v.fetch_add(1, std::memory_order_relaxed);
        const std::int32_t done =
            sh.sampling_completed.fetch_add(1, std::memory_order_acq_rel) + 1;
        if (done == sh.n_threads) {
          publish_aid_plan(cfg, sh, topo);
          transition(t, LoopPhase::Aid, now);
          continue;
        }
        transition(t, LoopPhase::SamplingWait, now);
        continue;
      }
      case LoopPhase::SamplingWait: {
        if (sh.phase_number.load(std::memory_order_acquire) > 0) {
          transition(t, LoopPhase::Aid, now);
          continue;
        }
        auto r = sh.pool.try_take(chunk);
        if (!r) {
          transition(t, LoopPhase::Done, now);
          return std::nullopt;
        }
        t.delta += r->size();
        sh.deltas[t.thread_id].v.store(t.delta, std::memory_order_relaxed);
        transition(t, LoopPhase::SamplingWait, now);  // the wait self-loop
        return record_take(t, r);
      }
      case LoopPhase::Aid: {
        const std::int64_t amount = sh.plan[t.thread_id];
        t.phase_entry_ns = now;
        if (amount > 0) {
          if (auto r = sh.pool.try_take(amount)) {
            transition(t, LoopPhase::AidAssigned, now);
            return record_take(t, r);
          }
        }
        transition(t, LoopPhase::AidAssigned, now);
        continue;  // empty assignment, fall through to the endgame
      }
      case LoopPhase::AidAssigned: {
        if (cfg.kind == ScheduleKind::AidHybrid) {
          transition(t, LoopPhase::DynamicTail, now);
          continue;
        }
        // AID-static: normally the plan drained the pool; any leftovers
        // (steals that raced the plan snapshot, rounding under repair) are
        // finished dynamically so every iteration still runs exactly once.
        if (sh.pool.remaining() == 0) {
          transition(t, LoopPhase::Done, now);
          return std::nullopt;
        }
        transition(t, LoopPhase::DynamicTail, now);
        continue;
      }
      case LoopPhase::DynamicTail: {
        if (auto r = sh.pool.try_take(chunk)) {
          return record_take(t, r);
        }
        transition(t, LoopPhase::Done, now);
        return std::nullopt;
      }
      case LoopPhase::Done:
        return std::nullopt;
    }
  }
}

/// Per-phase shares for AID-dynamic: the slowest type takes M, faster types
/// round(R_j * M) (nearest, half away from zero, never below one).
inline void recompute_aid_shares(SharedLoopState& sh, std::int64_t major_chunk) {
  sh.aid_share_per_type[0] = major_chunk;
  for (int j = 1; j < sh.n_types; ++j) {
    const double target = sh.r_per_type[j] * static_cast<double>(major_chunk);
    sh.aid_share_per_type[j] =
        std::max<std::int64_t>(1, static_cast<std::int64_t>(std::llround(target)));
  }
}

inline void publish_first_aid_phase(SharedLoopState& sh, const CoreTopology& topo,
                                    std::int64_t major_chunk) {
  const auto est = estimate_sf(sh.snapshot_sampling(), topo);
  const SpeedupEstimate sf = est ? *est : SpeedupEstimate::uniform(sh.n_types);
  sh.sf = sf;
  sh.sf_published = true;
  // R starts at SF.
  for (int j = 0; j < sh.n_types; ++j) sh.r_per_type[j] = sf.per_type[j];
  recompute_aid_shares(sh, major_chunk);
  sh.phase_number.store(1, std::memory_order_release);
}

inline void publish_next_aid_phase(SharedLoopState& sh, const CoreTopology& topo,
                                   std::int64_t major_chunk) {
  const auto sm = compute_sm(sh.snapshot_phase(), topo);
  const SpeedupEstimate smoothing =
      sm ? *sm : SpeedupEstimate::uniform(sh.n_types);
  for (int j = 1; j < sh.n_types; ++j) {
    sh.r_per_type[j] = update_r(sh.r_per_type[j], smoothing.per_type[j]);
  }
  recompute_aid_shares(sh, major_chunk);
  for (int j = 0; j < sh.n_types; ++j) {
    sh.phase_time[j].v.store(0, std::memory_order_relaxed);
    sh.phase_count[j].v.store(0, std::memory_order_relaxed);
  }
  sh.phase_completed.store(0, std::memory_order_relaxed);
  sh.phase_number.fetch_add(1, std::memory_order_release);
}

/// The AID-dynamic machine: repeated AID phases with per-type shares
/// M / round(R*M), R smoothed multiplicatively between phases, plus the
/// switch-over to dynamic(m) once at most M * n_threads iterations remain.
inline std::optional<IndexRange> aid_dynamic_step(const ScheduleConfig& cfg,
                                                  SharedLoopState& sh,
                                                  ThreadLoopState& t,
                                                  const CoreTopology& topo,
                                                  std::int64_t now) {
  const std::int64_t m = cfg.chunk;
  const std::int64_t major = cfg.major_chunk;

  if (t.phase == LoopPhase::Done) return std::nullopt;

  if (!sh.tail_engaged.load(std::memory_order_acquire) &&
      should_switch_to_tail(sh.pool.remaining(), major, topo)) {
    sh.tail_engaged.store(true, std::memory_order_release);
  }
  if (sh.tail_engaged.load(std::memory_order_relaxed)) {
    if (t.phase != LoopPhase::DynamicTail) transition(t, LoopPhase::DynamicTail, now);
    if (auto r = sh.pool.try_take(m)) return record_take(t, r);
    transition(t, LoopPhase::Done, now);
    return std::nullopt;
  }

  for (;;) {
    switch (t.phase) {
      case LoopPhase::Sampling: {
        if (!t.sampling_taken) {
          t.phase_entry_ns = now;
          auto r = sh.pool.try_take(m);
          if (!r) {
            transition(t, LoopPhase::Done, now);
            return std::nullopt;
          }
          t.sampling_taken = true;
          t.delta += r->size();
          return record_take(t, r);
        }
        const std::int64_t elapsed = now - t.phase_entry_ns;
        sh.sampling_time[t.core_type].v.fetch_add(elapsed, std::memory_order_relaxed);
        sh.sampling_count[t.core_type].v.fetch_add(1, std::memory_order_relaxed);
        const std::int32_t done =
            sh.sampling_completed.fetch_add(1, std::memory_order_acq_rel) + 1;
        if (done == sh.n_threads) {
          publish_first_aid_phase(sh, topo, major);
          transition(t, LoopPhase::Aid, now);
          continue;
        }
        transition(t, LoopPhase::SamplingWait, now);
        continue;
      }
      case LoopPhase::SamplingWait: {
        if (sh.phase_number.load(std::memory_order_acquire) > t.phase_seen) {
          transition(t, LoopPhase::Aid, now);
          continue;
        }
        auto r = sh.pool.try_take(m);
        if (!r) {
          transition(t, LoopPhase::Done, now);
          return std::nullopt;
        }
        t.delta += r->size();
        transition(t, LoopPhase::SamplingWait, now);
        return record_take(t, r);
      }
      case LoopPhase::Aid: {
        if (sh.pool.remaining() == 0) {
          transition(t, LoopPhase::Done, now);
          return std::nullopt;
        }
        t.phase_seen = sh.phase_number.load(std::memory_order_acquire);
        const std::int64_t share = sh.aid_share_per_type[t.core_type];
        const std::int64_t amount = std::max<std::int64_t>(0, share - t.delta);
        t.delta = 0;
        t.phase_entry_ns = now;
        if (amount > 0) {
          if (auto r = sh.pool.try_take(amount)) {
            transition(t, LoopPhase::AidAssigned, now);
            return record_take(t, r);
          }
        }
        transition(t, LoopPhase::AidAssigned, now);
        continue;  // delta ate the whole share; report the phase right away
      }
      case LoopPhase::AidAssigned: {
        const std::int64_t elapsed = now - t.phase_entry_ns;
        sh.phase_time[t.core_type].v.fetch_add(elapsed, std::memory_order_relaxed);
        sh.phase_count[t.core_type].v.fetch_add(1, std::memory_order_relaxed);
        const std::int32_t done =
            sh.phase_completed.fetch_add(1, std::memory_order_acq_rel) + 1;
        if (done == sh.n_threads) {
          publish_next_aid_phase(sh, topo, major);
          transition(t, LoopPhase::Aid, now);  // last completer re-enters AID
          continue;
        }
        transition(t, LoopPhase::SamplingWait, now);
        continue;
      }
      case LoopPhase::DynamicTail: {
        if (auto r = sh.pool.try_take(m)) return record_take(t, r);
        transition(t, LoopPhase::Done, now);
        return std::nullopt;
      }
      case LoopPhase::Done:
        return std::nullopt;
    }
  }
}

}  // namespace detail

/// The single dispatch point both the real runtime and the simulator drive.
/// Returns the next normalized index range for this thread, or empty once
/// the loop is over for it. `now_ns` is a monotonic timestamp (real or
/// virtual clock).
inline std::optional<IndexRange> next_assignment(const ScheduleConfig& cfg,
                                                 SharedLoopState& shared,
                                                 ThreadLoopState& thr,
                                                 const CoreTopology& topo,
                                                 std::int64_t now_ns) {
  thr.take_calls += 1;
  switch (cfg.kind) {
    case ScheduleKind::Static:
      return detail::static_next(shared, thr, topo.total_threads(), now_ns);
    case ScheduleKind::Dynamic:
      return detail::dynamic_next(shared, thr, cfg.chunk, now_ns);
    case ScheduleKind::Guided:
      return detail::guided_next(shared, thr, cfg.chunk, topo.total_threads(), now_ns);
    case ScheduleKind::AidStatic:
    case ScheduleKind::AidHybrid:
      return detail::aid_static_step(cfg, shared, thr, topo, now_ns);
    case ScheduleKind::AidDynamic:
      return detail::aid_dynamic_step(cfg, shared, thr, topo, now_ns);
  }
  return std::nullopt;
}

}  // namespace aidsched
