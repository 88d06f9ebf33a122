#pragma once

#include <cstddef>
#include <functional>

namespace scalefit {

// Worker count: SCALEFIT_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
std::size_t thread_budget();

// Runs task(i) for every i in [0, n). Tasks must only write to state owned by
// their index. Calls made from inside a running task execute serially. The
// first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task);

}  // namespace scalefit
