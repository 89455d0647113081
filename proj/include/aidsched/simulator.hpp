#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "scheduler.hpp"
#include "topology.hpp"

namespace aidsched {

/// Machine model for the simulator: per-iteration cost on the reference
/// (slowest) core, per-assignment overhead charged on every next_assignment
/// call, and optionally a custom per-type duration (for hand-crafted studies
/// where the slow-core penalty varies by index; the default is the plain
/// per-type speed ratio from the topology).
struct CostModel {
  std::function<std::int64_t(std::int64_t)> iteration_cost;
  std::int64_t overhead_ns = 0;
  std::function<std::int64_t(std::int64_t, int)> cost_on_type_override;

  static CostModel uniform(std::int64_t cost_ns, std::int64_t overhead = 0) {
    CostModel m;
    m.iteration_cost = [cost_ns](std::int64_t) { return cost_ns; };
    m.overhead_ns = overhead;
    return m;
  }

  [[nodiscard]] std::int64_t cost_on_type(std::int64_t index, int type,
                                          const CoreTopology& topo) const {
    if (cost_on_type_override) return cost_on_type_override(index, type);
    const double ratio = topo.type(type).speed_ratio;
    return std::llround(static_cast<double>(iteration_cost(index)) / ratio);
  }
};

/// One pool removal as seen by the simulator.
struct TakeRecord {
  int thread_id = 0;
  std::int64_t at_ns = 0;
  IndexRange range;
  std::int64_t remaining_before = 0;  // pool snapshot before the call
  LoopPhase phase_after = LoopPhase::Done;
};

struct SimThreadStats {
  int thread_id = 0;
  int exec_type = 0;  // core type the thread's speed came from
  std::int64_t iterations = 0;
  std::int64_t busy_ns = 0;  // overhead + execution
  std::int64_t finish_ns = 0;
  std::int64_t assignment_calls = 0;
};

struct SimResult {
  std::int64_t ni = 0;
  std::int64_t makespan_ns = 0;
  double estimated_sf = 1.0;
  bool sf_published = false;
  std::vector<double> estimated_sf_per_type;
  std::vector<SimThreadStats> threads;
  std::vector<TakeRecord> trace;
  std::vector<PhaseTransition> transitions;

  [[nodiscard]] std::int64_t total_iterations() const {
    std::int64_t s = 0;
    for (const auto& t : threads) s += t.iterations;
    return s;
  }
  [[nodiscard]] std::int64_t total_calls() const {
    std::int64_t s = 0;
    for (const auto& t : threads) s += t.assignment_calls;
    return s;
  }
};

struct SimOptions {
  BindingPolicy binding = BindingPolicy::BS;
  bool record_trace = true;
  bool record_transitions = false;
};

/// Deterministic discrete-event execution of a loop under the given
/// schedule. Each thread alternates a next_assignment call (cost
/// `overhead_ns`, the call's timestamp is the virtual clock) and the
/// execution of the returned range. Event ties break by ascending thread
/// id; the result is bit-reproducible for identical inputs.
inline SimResult simulate(const IterationSpace& space, const ScheduleConfig& cfg,
                          const CoreTopology& topo, const CostModel& model,
                          const SimOptions& opts = {}) {
  cfg.validate();
  const int n = topo.total_threads();
  SharedLoopState shared(space, topo);

  std::vector<ThreadLoopState> tls(n);
  std::vector<std::vector<PhaseTransition>> logs(n);
  std::vector<std::int64_t> ready(n, 0);
  std::vector<bool> done(n, false);
  SimResult res;
  res.ni = space.trip_count();
  res.threads.resize(n);

  for (int i = 0; i < n; ++i) {
    tls[i].thread_id = i;
    tls[i].core_type = topo.type_of_thread(i);
    if (opts.record_transitions) tls[i].transitions = &logs[i];
    res.threads[i].thread_id = i;
    res.threads[i].exec_type = opts.binding == BindingPolicy::SB
                                   ? topo.type_of_thread(n - 1 - i)
                                   : topo.type_of_thread(i);
  }

  int live = n;
  while (live > 0) {
    int pick = -1;
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int i = 0; i < n; ++i) {
      if (!done[i] && ready[i] < best) {
        best = ready[i];
        pick = i;
      }
    }
    const std::int64_t now = best;
    const std::int64_t remaining_before = shared.pool.remaining();
    const auto r = next_assignment(cfg, shared, tls[pick], topo, now);
    auto& st = res.threads[pick];
    st.assignment_calls += 1;
    st.busy_ns += model.overhead_ns;
    std::int64_t t = now + model.overhead_ns;
    if (r) {
      std::int64_t exec = 0;
      for (std::int64_t idx = r->begin; idx < r->end; ++idx) {
        exec += model.cost_on_type(idx, st.exec_type, topo);
      }
      st.busy_ns += exec;
      st.iterations += r->size();
      t += exec;
      if (opts.record_trace) {
        res.trace.push_back({pick, now, *r, remaining_before, tls[pick].phase});
      }
      ready[pick] = t;
    } else {
      st.finish_ns = t;
      done[pick] = true;
      --live;
    }
  }

  for (const auto& st : res.threads) {
    res.makespan_ns = std::max(res.makespan_ns, st.finish_ns);
  }
  res.sf_published = shared.sf_published;
  res.estimated_sf_per_type = shared.sf.per_type;
  res.estimated_sf = shared.sf_published ? shared.sf.primary() : 1.0;
  if (opts.record_transitions) {
    for (auto& l : logs) {
      res.transitions.insert(res.transitions.end(), l.begin(), l.end());
    }
  }
  return res;
}

/// Offline SF measurement: single-thread completion time of the whole loop
/// on the slowest type divided by the time on each type. Index [0] is 1 by
/// construction; back() is the big-to-small SF of the two-type case.
inline std::vector<double> offline_sf(const IterationSpace& space,
                                      const CostModel& model,
                                      const CoreTopology& topo) {
  const std::int64_t ni = space.trip_count();
  std::vector<double> sf(topo.type_count(), 1.0);
  std::vector<std::int64_t> time(topo.type_count(), 0);
  for (int j = 0; j < topo.type_count(); ++j) {
    for (std::int64_t i = 0; i < ni; ++i) {
      time[j] += model.cost_on_type(i, j, topo);
    }
  }
  for (int j = 0; j < topo.type_count(); ++j) {
    sf[j] = time[j] > 0 ? static_cast<double>(time[0]) / static_cast<double>(time[j])
                        : 1.0;
  }
  return sf;
}

}  // namespace aidsched
