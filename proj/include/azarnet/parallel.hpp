#pragma once

#include <cstddef>
#include <functional>

namespace azarnet {

// Worker count: AZARNET_THREADS if set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t worker_threads();

// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs; the
// callers reduce per-item partials in index order, so results do not depend
// on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace azarnet
