#pragma once

#include <functional>

namespace gbt {

// Worker count: hardware concurrency, capped by the GBT_THREADS environment
// variable when it holds a positive integer. Always at least 1.
int thread_budget();

// Runs fn(begin, end) over contiguous chunks of [0, n), in parallel when the
// budget allows. Chunks are disjoint, so work that only touches per-index
// state produces the same result for any budget. The first exception thrown
// by a chunk is rethrown on the calling thread.
void parallel_chunks(int n, const std::function<void(int, int)>& fn);

}  // namespace gbt
