#pragma once

#include <functional>

namespace ncmart {

// Thread cap: explicit value if > 0, else NCMART_THREADS, else hardware concurrency.
int resolve_threads(int requested);

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// handled exactly once; results must be written to per-index slots.
// The first exception thrown by a body is rethrown after all workers stop.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace ncmart
