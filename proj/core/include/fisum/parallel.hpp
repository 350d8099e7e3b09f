#pragma once

#include <cstddef>
#include <functional>

namespace fisum {

/// Worker count: FISUM_THREADS if set and positive, else the hardware
/// concurrency (at least 1).
std::size_t worker_count();

/// Runs fn(i) for i in [0, n) on up to worker_count() threads. Each index runs
/// exactly once; callers write results to disjoint slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fisum
