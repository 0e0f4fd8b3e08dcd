#pragma once

#include <cstddef>
#include <functional>

namespace trendwatch {

/// Worker count: `requested` if positive, else $TRENDWATCH_JOBS, else the
/// hardware concurrency.
int resolve_jobs(int requested = 0);

/// Runs fn(0..n−1) on up to `jobs` threads. Each index runs exactly once, so
/// callers that write only to slot i get results independent of scheduling.
/// If any call throws, the exception from the lowest index is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace trendwatch
