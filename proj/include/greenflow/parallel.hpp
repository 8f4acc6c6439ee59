#pragma once

#include <cstddef>
#include <functional>

namespace greenflow {

/// Worker count: hardware concurrency, capped by GREENFLOW_THREADS when set.
int worker_count();

/// Runs body(i) for i in [0, n) on up to worker_count() threads. Each index
/// is processed exactly once; callers write results into per-index slots and
/// reduce them afterwards in index order, so results do not depend on the
/// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace greenflow
