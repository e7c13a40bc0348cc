#pragma once

#include <cstddef>
#include <functional>

namespace textcausal {

// Runs fn(0..n-1) on up to `workers` threads (0 means hardware concurrency).
// Indices are claimed dynamically; the first exception thrown by any call is
// rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

std::size_t resolve_workers(std::size_t workers);

}  // namespace textcausal
