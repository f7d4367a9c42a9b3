#pragma once

#include <cstddef>
#include <functional>

namespace emsift {

// Runs fn(i) for i in [0, count) across at most `jobs` worker threads.
// Each index is processed exactly once and writes only its own slot, so the
// result is identical to a sequential loop. jobs <= 1 runs inline. The first
// exception thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace emsift
