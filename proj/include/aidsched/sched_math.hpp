#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <vector>

#include "topology.hpp"

namespace aidsched {

// Clamps on the measured ratios. Timing noise (or an empty AID phase) can
// produce wild values; the multiplicative R update would otherwise let them
// compound without bound.
inline constexpr double kSfMin = 1.0 / 64.0;
inline constexpr double kSfMax = 64.0;
inline constexpr double kSmMin = 1.0 / 8.0;
inline constexpr double kSmMax = 8.0;
inline constexpr double kRMin = 1.0 / 64.0;
inline constexpr double kRMax = 64.0;

/// Per-core-type sums of phase completion times as reported by worker
/// threads, plus how many threads of each type reported.
struct SamplingAccumulator {
  std::vector<std::int64_t> time_sum_ns;
  std::vector<std::int32_t> reported;

  SamplingAccumulator() = default;
  explicit SamplingAccumulator(int n_types)
      : time_sum_ns(n_types, 0), reported(n_types, 0) {}

  void add(int type, std::int64_t elapsed_ns) {
    time_sum_ns.at(type) += elapsed_ns;
    reported.at(type) += 1;
  }
};

/// Relative speed per core type; per_type[0] (the slowest type) is exactly 1.
struct SpeedupEstimate {
  std::vector<double> per_type;

  static SpeedupEstimate uniform(int n_types) {
    SpeedupEstimate e;
    e.per_type.assign(n_types, 1.0);
    return e;
  }

  /// Big-to-small ratio; for the two-type case this is the paper's SF.
  [[nodiscard]] double primary() const { return per_type.back(); }
};

/// Integer allotment per thread plus the pre-rounding small-core share k.
struct AllotmentPlan {
  std::vector<std::int64_t> counts;
  double k = 0.0;
};

/// Largest-remainder apportionment of `total` units over non-negative
/// quotas. Ties between equal fractional remainders go to the lower index.
/// The result always sums to exactly `total`.
inline std::vector<std::int64_t> apportion_largest_remainder(
    const std::vector<double>& quotas, std::int64_t total) {
  const std::size_t n = quotas.size();
  std::vector<std::int64_t> counts(n, 0);
  if (n == 0 || total <= 0) return counts;

  double weight_sum = 0.0;
  for (double q : quotas) weight_sum += q;
  if (!(weight_sum > 0.0)) {
    // Degenerate quotas: hand the units out round-robin from index 0.
    for (std::int64_t u = 0; u < total; ++u) counts[u % n] += 1;
    return counts;
  }

  std::int64_t assigned = 0;
  std::vector<double> rem(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double share = quotas[i] * static_cast<double>(total) / weight_sum;
    const double fl = std::floor(share);
    counts[i] = static_cast<std::int64_t>(fl);
    rem[i] = share - fl;
    assigned += counts[i];
  }
  std::int64_t leftover = total - assigned;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; leftover > 0; i = (i + 1) % n) {
    counts[order[i]] += 1;
    --leftover;
  }
  return counts;
}

/// SF from the sampling accumulators: per type j, the average completion
/// time of the slowest type divided by the average of type j (so faster
/// types get ratios > 1, and type 0 is exactly 1). Empty result when any
/// type has a zero average or no reports; the caller falls back to SF = 1.
inline std::optional<SpeedupEstimate> estimate_sf(const SamplingAccumulator& acc,
                                                  const CoreTopology& topo) {
  const int nt = topo.type_count();
  std::vector<double> avg(nt, 0.0);
  for (int j = 0; j < nt; ++j) {
    if (j >= static_cast<int>(acc.reported.size()) || acc.reported[j] <= 0) {
      return std::nullopt;
    }
    avg[j] = static_cast<double>(acc.time_sum_ns[j]) /
             static_cast<double>(acc.reported[j]);
    if (!(avg[j] > 0.0)) return std::nullopt;
  }
  SpeedupEstimate est;
  est.per_type.resize(nt);
  est.per_type[0] = 1.0;
  for (int j = 1; j < nt; ++j) {
    est.per_type[j] = std::clamp(avg[0] / avg[j], kSfMin, kSfMax);
  }
  return est;
}

/// The base small-core share k = NI / sum_t(N_t * SF_t).
inline double compute_k(std::int64_t ni, const CoreTopology& topo,
                        const SpeedupEstimate& sf) {
  double denom = 0.0;
  for (int j = 0; j < topo.type_count(); ++j) {
    denom += static_cast<double>(topo.type(j).thread_count) * sf.per_type[j];
  }
  return static_cast<double>(ni) / denom;
}

/// Integer per-thread allotments for the AID phase.
///
/// Real targets are SF_type(i) * k with k computed over the total
/// NI_remaining + sum(delta); the targets are rounded by largest remainder
/// to sum exactly to that total, and each thread's executed count delta_i is
/// subtracted. A thread whose delta exceeds its rounded target gets 0 and
/// the shortfall is re-apportioned over the remaining threads, so the plan
/// sums to exactly `ni_remaining`.
inline AllotmentPlan plan_allotments(std::int64_t ni_remaining,
                                     const CoreTopology& topo,
                                     const SpeedupEstimate& sf,
                                     const std::vector<std::int64_t>& deltas) {
  const int n = topo.total_threads();
  AllotmentPlan plan;
  plan.counts.assign(n, 0);

  std::int64_t delta_sum = 0;
  for (std::int64_t d : deltas) delta_sum += d;
  const std::int64_t ni_total = ni_remaining + delta_sum;
  if (ni_total <= 0) return plan;

  plan.k = compute_k(ni_total, topo, sf);
  std::vector<double> targets(n);
  for (int i = 0; i < n; ++i) {
    targets[i] = sf.per_type[topo.type_of_thread(i)] * plan.k;
  }
  const std::vector<std::int64_t> rounded =
      apportion_largest_remainder(targets, ni_total);

  bool overran = false;
  for (int i = 0; i < n; ++i) {
    plan.counts[i] = rounded[i] - deltas[i];
    if (plan.counts[i] < 0) overran = true;
  }
  if (!overran) return plan;  // already sums to ni_remaining

  // Over-run repair: over-runners get 0, everyone else is re-apportioned
  // from their real residual targets.
  std::vector<double> residual(n, 0.0);
  for (int i = 0; i < n; ++i) {
    if (plan.counts[i] < 0) {
      plan.counts[i] = 0;
    } else {
      residual[i] = std::max(0.0, targets[i] - static_cast<double>(deltas[i]));
      plan.counts[i] = 0;
    }
  }
  bool any_residual = false;
  for (int i = 0; i < n; ++i) {
    if (residual[i] > 0.0) any_residual = true;
  }
  if (!any_residual) {
    // All residuals vanished to rounding; spread the leftovers by thread id.
    std::int64_t left = ni_remaining;
    for (int i = 0; i < n && left > 0; ++i) {
      if (rounded[i] >= deltas[i]) {
        plan.counts[i] = 1;
        --left;
      }
    }
    for (int i = 0; left > 0; i = (i + 1) % n) {
      plan.counts[i] += 1;
      --left;
    }
    return plan;
  }
  plan.counts = apportion_largest_remainder(residual, ni_remaining);
  return plan;
}

/// Smoothing factor from the previous AID phase: same ratio-of-averages as
/// estimate_sf but with the tighter SM clamps. Empty result on degenerate
/// timings; the caller falls back to SM = 1.
inline std::optional<SpeedupEstimate> compute_sm(const SamplingAccumulator& prev_phase,
                                                 const CoreTopology& topo) {
  const int nt = topo.type_count();
  std::vector<double> avg(nt, 0.0);
  for (int j = 0; j < nt; ++j) {
    if (j >= static_cast<int>(prev_phase.reported.size()) ||
        prev_phase.reported[j] <= 0) {
      return std::nullopt;
    }
    avg[j] = static_cast<double>(prev_phase.time_sum_ns[j]) /
             static_cast<double>(prev_phase.reported[j]);
    if (!(avg[j] > 0.0)) return std::nullopt;
  }
  SpeedupEstimate sm;
  sm.per_type.resize(nt);
  sm.per_type[0] = 1.0;
  for (int j = 1; j < nt; ++j) {
    sm.per_type[j] = std::clamp(avg[0] / avg[j], kSmMin, kSmMax);
  }
  return sm;
}

/// R' * SM, kept inside [kRMin, kRMax]. The first AID phase seeds R with SF.
inline double update_r(double r_prev, double sm) {
  return std::clamp(r_prev * sm, kRMin, kRMax);
}

/// AID-dynamic end-of-loop switch: true once no more than
/// major_chunk * total_threads iterations remain.
inline bool should_switch_to_tail(std::int64_t remaining, std::int64_t major_chunk,
                                  const CoreTopology& topo) {
  return remaining <= major_chunk * static_cast<std::int64_t>(topo.total_threads());
}

}  // namespace aidsched
