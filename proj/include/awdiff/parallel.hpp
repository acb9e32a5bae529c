#pragma once

#include <cstddef>
#include <functional>

namespace awdiff {

/// Worker cap from the AWDIFF_THREADS environment variable
/// (0 or unset = hardware concurrency).
int worker_count();

/// Runs fn(i) for i in [0, n) across up to worker_count() threads.
/// Each index is processed exactly once; results must be written to
/// per-index slots so determinism does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace awdiff
