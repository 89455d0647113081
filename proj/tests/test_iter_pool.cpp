#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <random>
#include <thread>
#include <vector>

#include <aidsched/iter_pool.hpp>

namespace aidsched {
namespace {

TEST(IterationSpace, TripCounts) {
  EXPECT_EQ(IterationSpace(0, 100, 1).trip_count(), 100);
  EXPECT_EQ(IterationSpace(0, 0, 1).trip_count(), 0);
  // indices 0, 3, 6, 9
  EXPECT_EQ(IterationSpace(0, 10, 3).trip_count(), 4);
  EXPECT_EQ(IterationSpace(10, 0, -2).trip_count(), 5);
  EXPECT_EQ(IterationSpace(5, 5, -1).trip_count(), 0);
  EXPECT_THROW(IterationSpace(0, 10, 0), std::invalid_argument);
}

TEST(IterationSpace, MapIndexStaysInBounds) {
  const IterationSpace s(0, 10, 3);
  for (std::int64_t i = 0; i < s.trip_count(); ++i) {
    const std::int64_t u = s.map_index(i);
    EXPECT_GE(u, 0);
    EXPECT_LT(u, 10);
  }
  EXPECT_EQ(s.map_index(3), 9);
  const IterationSpace neg(10, 0, -2);
  EXPECT_EQ(neg.map_index(0), 10);
  EXPECT_EQ(neg.map_index(4), 2);
}

TEST(IterationPool, InitFromSpace) {
  IterationPool p(IterationSpace(0, 100, 1));
  EXPECT_EQ(p.size(), 100);
  EXPECT_EQ(p.remaining(), 100);

  IterationPool empty(IterationSpace(0, 0, 1));
  EXPECT_EQ(empty.size(), 0);
  EXPECT_FALSE(empty.try_take(1).has_value());

  IterationPool strided(IterationSpace(0, 10, 3));
  EXPECT_EQ(strided.size(), 4);
}

TEST(IterationPool, TryTakeBasics) {
  IterationPool p(10);
  auto r = p.try_take(4);
  ASSERT_TRUE(r);
  EXPECT_EQ(*r, (IndexRange{0, 4}));

  p.try_take(4);
  auto tail = p.try_take(4);  // only [8, 10) left
  ASSERT_TRUE(tail);
  EXPECT_EQ(*tail, (IndexRange{8, 10}));
  EXPECT_FALSE(p.try_take(1).has_value());
}

TEST(IterationPool, RemainingClampsOvershoot) {
  IterationPool p(10);
  p.try_take(3);
  EXPECT_EQ(p.remaining(), 7);
  p.try_take(20);  // cursor lands past end
  EXPECT_EQ(p.remaining(), 0);
  p.try_take(5);  // pushes the cursor further past end
  EXPECT_EQ(p.remaining(), 0);
}

TEST(IterationPool, SingleCallerTakesAreMonotonic) {
  IterationPool p(1000);
  std::int64_t last = -1;
  std::mt19937_64 rng(7);
  while (auto r = p.try_take(1 + static_cast<std::int64_t>(rng() % 17))) {
    EXPECT_GT(r->begin, last);
    last = r->begin;
  }
  EXPECT_EQ(p.remaining(), 0);
}

// Exactly-once under contention: the union of all claimed ranges is
// [0, NI) with no duplicates, for random thread counts and chunk sizes.
TEST(IterationPool, ConcurrentTakesAreExactlyOnce) {
  std::mt19937_64 seed_rng(20240811);
  for (int round = 0; round < 12; ++round) {
    const int n_threads = 1 + static_cast<int>(seed_rng() % 64);
    const std::int64_t ni = static_cast<std::int64_t>(seed_rng() % 200000);
    IterationPool pool(ni);
    std::vector<std::atomic<std::uint8_t>> tally(ni);
    std::vector<std::thread> threads;
    threads.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
      threads.emplace_back([&, t] {
        std::mt19937_64 rng(round * 1000 + t);
        while (auto r = pool.try_take(1 + static_cast<std::int64_t>(rng() % 97))) {
          for (std::int64_t i = r->begin; i < r->end; ++i) {
            tally[i].fetch_add(1, std::memory_order_relaxed);
          }
        }
      });
    }
    for (auto& th : threads) th.join();
    for (std::int64_t i = 0; i < ni; ++i) {
      ASSERT_EQ(tally[i].load(), 1) << "index " << i << " round " << round;
    }
    EXPECT_EQ(pool.remaining(), 0);
  }
}

TEST(IterationPool, GuidedSizesNonIncreasing) {
  const std::int64_t ni = 80;
  const int n_threads = 4;
  IterationPool pool(ni);
  auto first = pool.try_take_guided(n_threads, 1);
  ASSERT_TRUE(first);
  EXPECT_EQ(first->size(), 20);  // ceil(80 / 4)

  std::int64_t prev = first->size();
  std::int64_t total = first->size();
  while (auto r = pool.try_take_guided(n_threads, 1)) {
    EXPECT_LE(r->size(), prev);
    prev = r->size();
    total += r->size();
  }
  EXPECT_EQ(total, ni);
}

TEST(IterationPool, GuidedRespectsMinChunk) {
  IterationPool pool(2);
  auto r = pool.try_take_guided(4, 1);
  ASSERT_TRUE(r);
  EXPECT_EQ(r->size(), 1);  // max(1, ceil(2/4)) = 1

  IterationPool big_min(3);
  auto q = big_min.try_take_guided(4, 5);  // min chunk exceeds what's left
  ASSERT_TRUE(q);
  EXPECT_EQ(q->size(), 3);
  EXPECT_FALSE(big_min.try_take_guided(4, 5).has_value());
}

TEST(IterationPool, GuidedConcurrentNonIncreasingAndExact) {
  for (int round = 0; round < 6; ++round) {
    const int n_threads = 2 + round;
    const std::int64_t ni = 5000 + 37 * round;
    IterationPool pool(ni);
    std::vector<std::vector<std::int64_t>> sizes(n_threads);
    std::atomic<std::int64_t> total{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) {
      threads.emplace_back([&, t] {
        while (auto r = pool.try_take_guided(n_threads, 1)) {
          sizes[t].push_back(r->size());
          total.fetch_add(r->size());
        }
      });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(total.load(), ni);
    // Per-caller sizes are non-increasing; the CAS take makes sizes follow
    // the exact cursor, so even a stale snapshot cannot inflate a claim.
    for (const auto& s : sizes) {
      for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i], s[i - 1]);
    }
  }
}

}  // namespace
}  // namespace aidsched
