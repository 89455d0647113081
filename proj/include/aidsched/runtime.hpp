#pragma once

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#if defined(__linux__)
#include <pthread.h>
#include <sched.h>
#endif

#include "scheduler.hpp"
#include "timing.hpp"
#include "topology.hpp"

namespace aidsched {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by parallel_for after a body failure; carries the user index of
/// the first failing iteration.
class LoopBodyError : public std::runtime_error {
 public:
  LoopBodyError(std::int64_t index, const std::string& what)
      : std::runtime_error("loop body failed at index " + std::to_string(index) +
                           ": " + what),
        index_(index) {}
  [[nodiscard]] std::int64_t failing_index() const { return index_; }

 private:
  std::int64_t index_;
};

struct RuntimeConfig {
  ScheduleConfig schedule;
  CoreTopology topology;
  BindingPolicy binding = BindingPolicy::None;
  /// Per-core-type work multipliers for emulated asymmetry on symmetric
  /// machines (aligned with the topology's types, slowest first; the fastest
  /// type must be 1.0). Empty disables emulation.
  std::vector<double> emulation_multipliers;
  bool record_transitions = false;

  [[nodiscard]] int worker_count() const { return topology.total_threads(); }
  [[nodiscard]] bool emulation_enabled() const { return !emulation_multipliers.empty(); }

  /// Multipliers that realize the topology's nominal speed ratios in
  /// software: the slowest type runs ratio_max times more work per iteration.
  static std::vector<double> emulation_from_topology(const CoreTopology& topo) {
    std::vector<double> m(topo.type_count(), 1.0);
    const double fastest = topo.type(topo.type_count() - 1).speed_ratio;
    for (int j = 0; j < topo.type_count(); ++j) {
      m[j] = fastest / topo.type(j).speed_ratio;
    }
    return m;
  }

  /// Core type whose speed a thread actually experiences: the scheduler's BS
  /// view, mirrored when the placement policy is SB.
  [[nodiscard]] int execution_type_of_thread(int tid) const {
    const int n = topology.total_threads();
    return binding == BindingPolicy::SB ? topology.type_of_thread(n - 1 - tid)
                                        : topology.type_of_thread(tid);
  }

  void validate() const {
    schedule.validate();
    if (topology.total_threads() < 1) {
      throw ConfigError("runtime: topology must provide at least one thread");
    }
    if (emulation_enabled()) {
      if (emulation_multipliers.size() !=
          static_cast<std::size_t>(topology.type_count())) {
        throw ConfigError("runtime: one emulation multiplier per core type required");
      }
      for (double m : emulation_multipliers) {
        if (!(m >= 1.0)) {
          throw ConfigError("runtime: emulation multipliers must be >= 1.0");
        }
      }
      if (emulation_multipliers.back() != 1.0) {
        throw ConfigError("runtime: the fastest type's emulation multiplier must be 1.0");
      }
    }
    const bool aid = schedule.kind == ScheduleKind::AidStatic ||
                     schedule.kind == ScheduleKind::AidHybrid ||
                     schedule.kind == ScheduleKind::AidDynamic;
    if (aid && !topology.is_symmetric() && binding == BindingPolicy::None &&
        !emulation_enabled()) {
      throw ConfigError(
          "runtime: AID schedules on an asymmetric topology need thread binding "
          "or emulated asymmetry");
    }
    if (binding != BindingPolicy::None) {
      for (int j = 0; j < topology.type_count(); ++j) {
        if (topology.type(j).core_ids.empty()) {
          throw ConfigError("runtime: binding requested but core type '" +
                            topology.type(j).name + "' lists no core ids");
        }
      }
      const unsigned hw = std::thread::hardware_concurrency();
      if (hw > 0 && static_cast<unsigned>(worker_count()) > hw) {
        throw ConfigError(
            "runtime: binding with more worker threads than cores "
            "(oversubscription is unsupported)");
      }
    }
  }
};

/// thread id -> core id map for the policy. BS walks types fastest first
/// (low ids on big cores, ascending core numbers); SB is the mirror image.
inline std::vector<int> compute_binding(const CoreTopology& topo,
                                        BindingPolicy policy) {
  std::vector<int> map;
  if (policy == BindingPolicy::None) return map;
  auto append_type = [&](int j) {
    auto ids = topo.type(j).core_ids;
    if (ids.empty()) {
      throw ConfigError("binding: core type '" + topo.type(j).name +
                        "' lists no core ids");
    }
    std::sort(ids.begin(), ids.end());
    map.insert(map.end(), ids.begin(), ids.end());
  };
  if (policy == BindingPolicy::BS) {
    for (int j = topo.type_count() - 1; j >= 0; --j) append_type(j);
  } else {
    for (int j = 0; j < topo.type_count(); ++j) append_type(j);
  }
  return map;
}

/// Spec'd surface for bind_threads: the computed map, or an error when the
/// platform cannot pin at all.
inline std::vector<int> bind_threads(const RuntimeConfig& cfg) {
#if !defined(__linux__)
  throw ConfigError("binding: thread affinity is only supported on Linux");
#endif
  return compute_binding(cfg.topology, cfg.binding);
}

namespace detail {

inline bool pin_current_thread(int core_id, std::string& error) {
#if defined(__linux__)
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(core_id, &set);
  const int rc = pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
  if (rc != 0) {
    error = "pthread_setaffinity_np failed for core " + std::to_string(core_id) +
            " (errno " + std::to_string(rc) + ")";
    return false;
  }
  return true;
#else
  (void)core_id;
  error = "thread affinity is only supported on Linux";
  return false;
#endif
}

}  // namespace detail

/// Wraps a body so each iteration costs `multiplier` times its nominal work.
/// Synthetic bodies exposing the (index, scale) hook scale themselves;
/// anything else is padded with a spin of (multiplier - 1) x the iteration's
/// measured duration.
template <class F>
auto emulate_asymmetry(F body, double multiplier) {
  return [body = std::move(body), multiplier](std::int64_t index) mutable {
    if constexpr (std::is_invocable_v<F&, std::int64_t, double>) {
      body(index, multiplier);
    } else {
      if (multiplier <= 1.0) {
        body(index);
        return;
      }
      const std::int64_t t0 = steady_now_ns();
      body(index);
      const std::int64_t dt = steady_now_ns() - t0;
      spin_for_ns(std::llround(static_cast<double>(dt) * (multiplier - 1.0)));
    }
  };
}

struct ThreadLoopStats {
  int thread_id = 0;
  int core_type = 0;
  std::int64_t iterations = 0;
  std::int64_t busy_ns = 0;
  std::int64_t wait_ns = 0;
  std::int64_t finish_ns = 0;
  std::int64_t take_calls = 0;
};

struct LoopReport {
  std::int64_t ni = 0;
  std::int64_t wall_ns = 0;
  double estimated_sf = 1.0;
  bool sf_published = false;
  std::vector<ThreadLoopStats> threads;
  std::vector<PhaseTransition> transitions;

  [[nodiscard]] std::int64_t total_iterations() const {
    std::int64_t s = 0;
    for (const auto& t : threads) s += t.iterations;
    return s;
  }

  /// Latest finish over mean busy time; 1.0 is a perfectly balanced loop.
  [[nodiscard]] double imbalance() const {
    std::int64_t max_finish = 0;
    double busy_sum = 0.0;
    for (const auto& t : threads) {
      max_finish = std::max(max_finish, t.finish_ns);
      busy_sum += static_cast<double>(t.busy_ns);
    }
    const double mean_busy = threads.empty() ? 0.0 : busy_sum / threads.size();
    if (mean_busy <= 0.0) return 1.0;
    return static_cast<double>(max_finish) / mean_busy;
  }
};

/// Worker-thread pool running parallel loops under a configurable schedule.
///
/// The pool is persistent: threads are spawned (and pinned, if requested)
/// once and reused for every loop. parallel_for may be called from one
/// control thread at a time; the caller blocks until the loop's implicit
/// barrier. Bodies must be safe to run concurrently on distinct indices.
class ParallelRuntime {
 public:
  explicit ParallelRuntime(RuntimeConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    binding_map_ = cfg_.binding == BindingPolicy::None
                       ? std::vector<int>{}
                       : compute_binding(cfg_.topology, cfg_.binding);
    const int n = cfg_.worker_count();
    tid_multiplier_.assign(n, 1.0);
    if (cfg_.emulation_enabled()) {
      for (int i = 0; i < n; ++i) {
        tid_multiplier_[i] = cfg_.emulation_multipliers[cfg_.execution_type_of_thread(i)];
      }
    }
    workers_.reserve(n);
    for (int i = 0; i < n; ++i) {
      workers_.emplace_back([this, i] { worker_main(i); });
    }
    // Wait until every worker pinned itself (or failed trying).
    {
      std::unique_lock lk(mu_);
      cv_.wait(lk, [&] { return ready_count_ == n; });
      if (!spawn_error_.empty()) {
        const std::string err = spawn_error_;
        stop_locked(lk);
        throw ConfigError("runtime: " + err);
      }
    }
  }

  ParallelRuntime(const ParallelRuntime&) = delete;
  ParallelRuntime& operator=(const ParallelRuntime&) = delete;

  ~ParallelRuntime() {
    std::unique_lock lk(mu_);
    stop_locked(lk);
  }

  [[nodiscard]] const RuntimeConfig& config() const { return cfg_; }

  /// Runs `body` over every index of `space` exactly once and returns the
  /// loop's report. F is callable as void(int64_t index) or, for synthetic
  /// workloads that scale themselves under emulation, void(int64_t, double).
  template <class F>
  LoopReport parallel_for(const IterationSpace& space, F&& body) {
    auto invoke = [this, &body](std::int64_t index, int tid) {
      const double mult = tid_multiplier_[tid];
      if constexpr (std::is_invocable_v<F&, std::int64_t, double>) {
        body(index, mult);
      } else {
        if (mult <= 1.0) {
          body(index);
        } else {
          const std::int64_t t0 = steady_now_ns();
          body(index);
          const std::int64_t dt = steady_now_ns() - t0;
          spin_for_ns(std::llround(static_cast<double>(dt) * (mult - 1.0)));
        }
      }
    };
    return run(space, invoke);
  }

 private:
  struct LoopContext {
    const IterationSpace* space = nullptr;
    SharedLoopState* shared = nullptr;
    std::function<void(std::int64_t, int)> body;
    std::int64_t start_ns = 0;
    std::atomic<bool> abort{false};
    std::mutex failure_mu;
    bool has_failure = false;
    std::int64_t failing_index = 0;
    std::string failure_what;
    std::vector<ThreadLoopStats> stats;
    std::vector<std::vector<PhaseTransition>> transition_sink;
  };

  LoopReport run(const IterationSpace& space,
                 const std::function<void(std::int64_t, int)>& body) {
    const int n = cfg_.worker_count();
    SharedLoopState shared(space, cfg_.topology);
    LoopContext ctx;
    ctx.space = &space;
    ctx.shared = &shared;
    ctx.body = body;
    ctx.stats.resize(n);
    ctx.transition_sink.resize(n);

    {
      std::unique_lock lk(mu_);
      ctx.start_ns = steady_now_ns();
      current_ = &ctx;
      done_count_ = 0;
      ++generation_;
      cv_.notify_all();
      cv_.wait(lk, [&] { return done_count_ == n; });
      current_ = nullptr;
    }
    const std::int64_t wall = steady_now_ns() - ctx.start_ns;

    if (ctx.has_failure) {
      throw LoopBodyError(ctx.failing_index, ctx.failure_what);
    }

    LoopReport rep;
    rep.ni = space.trip_count();
    rep.wall_ns = wall;
    rep.sf_published = shared.sf_published;
    rep.estimated_sf = shared.sf_published ? shared.sf.primary() : 1.0;
    rep.threads = std::move(ctx.stats);
    if (cfg_.record_transitions) {
      for (auto& l : ctx.transition_sink) {
        rep.transitions.insert(rep.transitions.end(), l.begin(), l.end());
      }
    }
    return rep;
  }

  void worker_main(int tid) {
    std::string pin_error;
    bool ok = true;
    if (!binding_map_.empty()) {
      ok = detail::pin_current_thread(binding_map_[tid], pin_error);
    }
    {
      std::lock_guard lk(mu_);
      if (!ok && spawn_error_.empty()) spawn_error_ = pin_error;
      ++ready_count_;
      cv_.notify_all();
    }
    std::uint64_t seen = 0;
    for (;;) {
      LoopContext* ctx = nullptr;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        ctx = current_;
      }
      run_loop(*ctx, tid);
      {
        std::lock_guard lk(mu_);
        ++done_count_;
        cv_.notify_all();
      }
    }
  }

  void run_loop(LoopContext& ctx, int tid) {
    ThreadLoopState tls;
    tls.thread_id = tid;
    tls.core_type = cfg_.topology.type_of_thread(tid);
    std::vector<PhaseTransition> transitions;
    if (cfg_.record_transitions) tls.transitions = &transitions;

    std::int64_t busy = 0;
    std::int64_t iterations = 0;
    for (;;) {
      if (ctx.abort.load(std::memory_order_acquire)) break;
      const auto r =
          next_assignment(cfg_.schedule, *ctx.shared, tls, cfg_.topology, steady_now_ns());
      if (!r) break;
      const std::int64_t exec_start = steady_now_ns();
      for (std::int64_t i = r->begin; i < r->end; ++i) {
        if (ctx.abort.load(std::memory_order_relaxed)) break;
        const std::int64_t user = ctx.space->map_index(i);
        try {
          ctx.body(user, tid);
          ++iterations;
        } catch (const std::exception& e) {
          record_failure(ctx, user, e.what());
          break;
        } catch (...) {
          record_failure(ctx, user, "unknown exception");
          break;
        }
      }
      busy += steady_now_ns() - exec_start;
    }
    const std::int64_t finish = steady_now_ns() - ctx.start_ns;
    ctx.stats[tid] = {tid,  tls.core_type,
                      iterations, busy,
                      std::max<std::int64_t>(0, finish - busy), finish,
                      tls.take_calls};
    if (cfg_.record_transitions) ctx.transition_sink[tid] = std::move(transitions);
  }

  static void record_failure(LoopContext& ctx, std::int64_t index,
                             const std::string& what) {
    {
      std::lock_guard lk(ctx.failure_mu);
      if (!ctx.has_failure) {
        ctx.has_failure = true;
        ctx.failing_index = index;
        ctx.failure_what = what;
      }
    }
    ctx.abort.store(true, std::memory_order_release);
  }

  void stop_locked(std::unique_lock<std::mutex>& lk) {
    if (stopped_) return;
    stop_ = true;
    stopped_ = true;
    cv_.notify_all();
    lk.unlock();
    for (auto& w : workers_) {
      if (w.joinable()) w.join();
    }
    lk.lock();
  }

  RuntimeConfig cfg_;
  std::vector<int> binding_map_;
  std::vector<double> tid_multiplier_;
  std::vector<std::thread> workers_;

  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
  int done_count_ = 0;
  int ready_count_ = 0;
  bool stop_ = false;
  bool stopped_ = false;
  std::string spawn_error_;
  LoopContext* current_ = nullptr;
};

// --- environment configuration ----------------------------------------------
//
//   AIDSCHED_SCHEDULE     "kind[,chunk]"   (e.g. "dynamic,1", "aid_dynamic")
//   AIDSCHED_CHUNK        minor/sampling chunk (overrides the suffix above)
//   AIDSCHED_MAJOR_CHUNK  AID-dynamic's M
//   AIDSCHED_HYBRID_PCT   AID-hybrid's statically planned fraction, in (0,1]
//   AIDSCHED_AFFINITY     BS | SB | none
//   AIDSCHED_TOPOLOGY     path to a topology file
//
// Unset variables leave the config untouched; malformed values raise a
// ConfigError naming the variable.

struct EnvOverrides {
  std::optional<ScheduleKind> kind;
  std::optional<std::int64_t> chunk;
  std::optional<std::int64_t> major_chunk;
  std::optional<double> hybrid_pct;
  std::optional<BindingPolicy> binding;
  std::optional<std::string> topology_path;

  [[nodiscard]] bool any() const {
    return kind || chunk || major_chunk || hybrid_pct || binding || topology_path;
  }

  void apply(RuntimeConfig& cfg) const {
    if (kind) cfg.schedule.kind = *kind;
    if (chunk) cfg.schedule.chunk = *chunk;
    if (major_chunk) cfg.schedule.major_chunk = *major_chunk;
    if (hybrid_pct) cfg.schedule.hybrid_fraction = *hybrid_pct;
    if (binding) cfg.binding = *binding;
    if (topology_path) cfg.topology = load_topology(*topology_path);
  }
};

namespace detail {

inline std::optional<std::string> env_get(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

template <class Fn>
auto env_parse(const char* name, const std::string& value, Fn&& fn) {
  try {
    return fn(value);
  } catch (const std::exception& e) {
    throw ConfigError(std::string(name) + ": invalid value '" + value + "' (" +
                      e.what() + ")");
  }
}

}  // namespace detail

inline EnvOverrides load_config_from_env() {
  EnvOverrides out;
  if (auto v = detail::env_get("AIDSCHED_SCHEDULE")) {
    const auto parsed = detail::env_parse("AIDSCHED_SCHEDULE", *v, [](const std::string& s) {
      const auto p = parse_schedule_spec(s);
      if (p.binding) {
        throw std::invalid_argument("binding goes in AIDSCHED_AFFINITY");
      }
      return p.config;
    });
    out.kind = parsed.kind;
    out.chunk = parsed.chunk;
  }
  if (auto v = detail::env_get("AIDSCHED_CHUNK")) {
    out.chunk = detail::env_parse("AIDSCHED_CHUNK", *v, [](const std::string& s) {
      const std::int64_t c = std::stoll(s);
      if (c < 1) throw std::invalid_argument("chunk must be >= 1");
      return c;
    });
  }
  if (auto v = detail::env_get("AIDSCHED_MAJOR_CHUNK")) {
    out.major_chunk =
        detail::env_parse("AIDSCHED_MAJOR_CHUNK", *v, [](const std::string& s) {
          const std::int64_t c = std::stoll(s);
          if (c < 1) throw std::invalid_argument("major chunk must be >= 1");
          return c;
        });
  }
  if (auto v = detail::env_get("AIDSCHED_HYBRID_PCT")) {
    out.hybrid_pct =
        detail::env_parse("AIDSCHED_HYBRID_PCT", *v, [](const std::string& s) {
          const double p = std::stod(s);
          if (!(p > 0.0 && p <= 1.0)) {
            throw std::invalid_argument("fraction must be in (0, 1]");
          }
          return p;
        });
  }
  if (auto v = detail::env_get("AIDSCHED_AFFINITY")) {
    out.binding = detail::env_parse("AIDSCHED_AFFINITY", *v,
                                    [](const std::string& s) { return parse_binding(s); });
  }
  if (auto v = detail::env_get("AIDSCHED_TOPOLOGY")) {
    out.topology_path = *v;
  }
  return out;
}

}  // namespace aidsched
