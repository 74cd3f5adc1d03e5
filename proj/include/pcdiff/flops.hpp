#pragma once

#include <atomic>
#include <cstdint>

namespace pcdiff::flops {

// Forward-pass FLOP accounting. Ops report an estimate of their floating
// point work (2*m*k*n for a matmul, ~numel for elementwise ops). Used to
// verify that the latent stream's cost is independent of the point count.

namespace detail {
inline std::atomic<uint64_t> count_{0};
}

inline void add(uint64_t n) { detail::count_.fetch_add(n, std::memory_order_relaxed); }
inline uint64_t count() { return detail::count_.load(std::memory_order_relaxed); }
inline void reset() { detail::count_.store(0, std::memory_order_relaxed); }

}  // namespace pcdiff::flops
