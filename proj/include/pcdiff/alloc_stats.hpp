#pragma once

#include <atomic>
#include <cstdint>

namespace pcdiff::alloc_stats {

// High-water-mark accounting for the numeric core's buffers. Benchmarks
// report this instead of OS RSS so memory numbers are deterministic and
// comparable across machines.

namespace detail {
inline std::atomic<int64_t> current{0};
inline std::atomic<int64_t> peak{0};
}  // namespace detail

inline void add(int64_t bytes) {
  const int64_t now = detail::current.fetch_add(bytes) + bytes;
  int64_t prev = detail::peak.load();
  while (now > prev && !detail::peak.compare_exchange_weak(prev, now)) {
  }
}

inline void sub(int64_t bytes) { detail::current.fetch_sub(bytes); }

inline int64_t current_bytes() { return detail::current.load(); }
inline int64_t peak_bytes() { return detail::peak.load(); }

// Restart peak tracking from the currently live bytes.
inline void reset_peak() { detail::peak.store(detail::current.load()); }

}  // namespace pcdiff::alloc_stats
