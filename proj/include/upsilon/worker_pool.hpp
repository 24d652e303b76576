#pragma once

#include <cstddef>
#include <functional>

namespace upsilon {

// Worker count after applying the UPSILON_MAX_THREADS cap (0 = hardware).
std::size_t resolve_workers(std::size_t requested);

// Runs task(i) for i in [0, n) on up to `workers` threads. Tasks are claimed
// in index order; the first exception thrown is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& task);

}  // namespace upsilon
