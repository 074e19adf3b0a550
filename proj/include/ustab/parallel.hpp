#pragma once

#include <cstddef>
#include <functional>

namespace ustab {

// Worker count: USTAB_WORKERS if set and positive, else hardware concurrency.
unsigned worker_count();

// Calls body(begin, end) on disjoint contiguous chunks of [0, n).  Callers
// write per-index results only, so output never depends on the split.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace ustab
