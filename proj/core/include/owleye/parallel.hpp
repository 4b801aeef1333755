#pragma once

#include <cstddef>
#include <functional>

namespace owleye {

/// Worker cap: min(hardware concurrency, OWLEYE_THREADS when set).
std::size_t worker_cap();

/// Runs fn(0..count-1) across up to worker_cap() threads. Each index's work
/// must be independent; results should be written to preallocated slots so
/// the outcome is identical to the serial order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace owleye
