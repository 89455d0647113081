#pragma once

#include <algorithm>
#include <atomic>
#include <cassert>
#include <cstdint>
#include <optional>

#include "iteration_space.hpp"

namespace aidsched {

/// Half-open range of normalized iteration indices.
struct IndexRange {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  [[nodiscard]] std::int64_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

/// Lock-free shared pool of loop iterations.
///
/// `next_` tracks the first iteration not yet assigned to any thread; a take
/// is one fetch-and-add on it. The cursor may overshoot `end_` when several
/// threads race past exhaustion, so every reader clamps against `end_`.
/// Ranges handed out are pairwise disjoint and, over a completed loop, cover
/// [0, NI) exactly.
class IterationPool {
 public:
  explicit IterationPool(const IterationSpace& space)
      : end_(space.trip_count()) {}
  explicit IterationPool(std::int64_t trip_count) : end_(trip_count) {
    if (trip_count < 0) {
      throw std::invalid_argument("IterationPool: negative trip count");
    }
  }

  IterationPool(const IterationPool&) = delete;
  IterationPool& operator=(const IterationPool&) = delete;

  /// Atomically claim up to `amount` iterations (amount >= 1). An empty
  /// result means the pool is exhausted; a partial range means the claim hit
  /// the end of the loop.
  std::optional<IndexRange> try_take(std::int64_t amount) {
    assert(amount >= 1);
    const std::int64_t old = next_.fetch_add(amount, std::memory_order_acq_rel);
    if (old >= end_) return std::nullopt;
    return IndexRange{old, std::min(old + amount, end_)};
  }

  /// Guided-schedule claim: max(min_chunk, ceil(remaining / n_threads)).
  /// Implemented as a CAS loop so the size is always computed from the exact
  /// cursor value; this keeps successive take sizes non-increasing even under
  /// contention.
  std::optional<IndexRange> try_take_guided(std::int64_t n_threads,
                                            std::int64_t min_chunk) {
    assert(n_threads >= 1);
    assert(min_chunk >= 1);
    std::int64_t cur = next_.load(std::memory_order_relaxed);
    for (;;) {
      if (cur >= end_) return std::nullopt;
      const std::int64_t rem = end_ - cur;
      std::int64_t q = std::max(min_chunk, (rem + n_threads - 1) / n_threads);
      q = std::min(q, rem);
      if (next_.compare_exchange_weak(cur, cur + q,
                                      std::memory_order_acq_rel,
                                      std::memory_order_relaxed)) {
        return IndexRange{cur, cur + q};
      }
    }
  }

  /// Advisory snapshot of unclaimed iterations; may be stale by the time the
  /// caller acts on it.
  [[nodiscard]] std::int64_t remaining() const {
    const std::int64_t n = next_.load(std::memory_order_acquire);
    return n >= end_ ? 0 : end_ - n;
  }

  /// Total iterations the pool was created with (NI).
  [[nodiscard]] std::int64_t size() const { return end_; }

 private:
  std::atomic<std::int64_t> next_{0};
  std::int64_t end_;
};

}  // namespace aidsched
