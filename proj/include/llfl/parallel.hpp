#pragma once

#include <cstddef>
#include <functional>

namespace llfl {

// Worker count: min(LLFL_THREADS, hardware threads), at least 1.
// LLFL_THREADS unset or invalid falls back to the hardware count.
std::size_t worker_count();

// Run fn(begin, end) over contiguous chunks of [0, n).  Used only where
// every index writes its own output slot; no floating-point reduction ever
// crosses a chunk boundary, so results are independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

} // namespace llfl
