#pragma once

#include <cstddef>
#include <functional>

namespace rankdehaze {

/// Worker count: explicit value if > 0, else RANKDEHAZE_THREADS, else the
/// hardware concurrency.
int resolve_threads(int requested);

/// Runs body(i) for i in [0, count) on up to `threads` workers. Each index is
/// visited exactly once; callers write results into per-index slots so the
/// outcome does not depend on the schedule. The first exception thrown by
/// any worker is rethrown on the calling thread.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace rankdehaze
