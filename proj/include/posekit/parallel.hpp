#pragma once

#include <functional>

namespace posekit {

/// Worker count for parallel sections: the POSEKIT_THREADS environment
/// variable when set (0 = fully serial), otherwise the hardware concurrency.
/// Always at least 1. Throws std::invalid_argument when the variable is set
/// to something that is not a non-negative integer.
int thread_budget();

/// Runs fn(0) ... fn(n - 1), possibly across threads. Indices are split into
/// fixed contiguous chunks, so callers that write results into slot i get the
/// same output for every budget. The first exception thrown by a worker is
/// rethrown on the calling thread after all workers finish.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace posekit
