#pragma once

#include <cstdint>
#include <stdexcept>

namespace aidsched {

/// Half-open loop bounds with a nonzero stride.
///
/// All scheduling happens over the normalized index space [0, trip_count());
/// map_index() recovers the user-visible index of a normalized position at
/// the call boundary, so the scheduler math never sees strides or negative
/// increments.
struct IterationSpace {
  std::int64_t start = 0;
  std::int64_t end_exclusive = 0;
  std::int64_t increment = 1;

  IterationSpace() = default;
  IterationSpace(std::int64_t s, std::int64_t e, std::int64_t inc)
      : start(s), end_exclusive(e), increment(inc) {
    if (inc == 0) {
      throw std::invalid_argument("IterationSpace: increment must be nonzero");
    }
  }

  /// Number of indices the loop visits (NI). Empty bounds give zero.
  [[nodiscard]] std::int64_t trip_count() const {
    if (increment > 0) {
      if (end_exclusive <= start) return 0;
      return (end_exclusive - start + increment - 1) / increment;
    }
    if (start <= end_exclusive) return 0;
    return (start - end_exclusive + (-increment) - 1) / (-increment);
  }

  /// User index of normalized position i, 0 <= i < trip_count().
  [[nodiscard]] std::int64_t map_index(std::int64_t i) const {
    return start + i * increment;
  }
};

}  // namespace aidsched
