#pragma once

#include <cstddef>
#include <functional>

namespace prism {

// Runs body(i) for i in [0, n). threads <= 1 selects the serial reference
// path; otherwise the loop is executed by an OpenMP team of at most
// `threads` threads (serial when OpenMP is unavailable or the caller is
// already inside a parallel region). Bodies must only write state owned by
// their own index. The first exception thrown by any body is rethrown after
// the loop joins.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// Max hardware threads the parallel path will use.
int parallel_max_threads();

// True when compiled with OpenMP support.
bool parallel_enabled();

}  // namespace prism
