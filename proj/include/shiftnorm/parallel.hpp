#pragma once

#include <cstddef>
#include <functional>

namespace shiftnorm {

// Worker cap: SHIFTNORM_THREADS when set (>= 1), hardware concurrency
// otherwise.
std::size_t thread_budget();

// Runs fn(0..count-1) across at most `threads` workers with a static block
// split. Results must be written to disjoint slots; with per-index work that
// is seeded independently the outcome does not depend on the thread count.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

} // namespace shiftnorm
