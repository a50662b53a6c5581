#pragma once

#include <cstddef>
#include <functional>

namespace cord {

// Worker count from CORD_THREADS (default: hardware concurrency, at least 1).
std::size_t worker_count();

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
// the outcome is independent of the number of workers.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace cord
