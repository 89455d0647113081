#pragma once

#include <chrono>
#include <cstdint>

namespace aidsched {

inline std::int64_t steady_now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// Busy-wait for `ns`. Polls the monotonic clock, which Linux serves through
/// the vDSO, so a poll costs tens of nanoseconds and no syscall.
inline void spin_for_ns(std::int64_t ns) {
  if (ns <= 0) return;
  const std::int64_t deadline = steady_now_ns() + ns;
  while (steady_now_ns() < deadline) {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_ia32_pause();
#endif
  }
}

}  // namespace aidsched
