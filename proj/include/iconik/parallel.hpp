#pragma once

#include <cstddef>
#include <functional>

namespace iconik {

/// Worker count: ICONIK_THREADS if set, otherwise hardware concurrency.
std::size_t thread_count();

/// Overrides the worker count for this process (0 restores the default).
void set_thread_count(std::size_t n);

/// Runs fn(lo, hi) over contiguous chunks of [begin, end). Each index is
/// handled by exactly one call, so results never depend on the worker count
/// as long as fn only writes outputs owned by its range.
void parallel_for(std::size_t begin, std::size_t end, std::function<void(std::size_t, std::size_t)> const &fn,
                  std::size_t min_chunk = 1);

} // namespace iconik
