#include "prism/parallel.hpp"

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace prism {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
    if (n == 0) return;

#ifdef _OPENMP
    const bool nested = omp_in_parallel() != 0;
    if (threads > 1 && !nested) {
        std::exception_ptr first_error;
        std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            try {
                body(static_cast<std::size_t>(i));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
        if (first_error) std::rethrow_exception(first_error);
        return;
    }
#else
    (void)threads;
#endif

    for (std::size_t i = 0; i < n; ++i) body(i);
}

int parallel_max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

bool parallel_enabled() {
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

}  // namespace prism
