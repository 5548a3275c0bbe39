#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace stormcast {

// Worker count used by parallel_for: the STORMCAST_WORKERS environment
// variable when set, otherwise hardware concurrency (at least 1).
unsigned default_workers();

// Runs fn(i) for i in [0, n) across up to `workers` threads. Tasks must be
// independent; determinism is the caller's job (write to index i only).
// The first exception thrown by any task is rethrown on the caller thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned workers = 0);

} // namespace stormcast
