#pragma once

#include <cstddef>
#include <functional>

namespace slad {

// Runs body(i) for every i in [0, n) on up to `threads` workers, each taking
// a contiguous chunk. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

// Thread count from the SLAD_THREADS environment variable, or `fallback`.
unsigned threads_from_env(unsigned fallback = 1);

}  // namespace slad
