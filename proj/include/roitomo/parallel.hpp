#pragma once

#include <cstddef>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace roitomo {

/// Worker count for the loops below; 0 leaves the OpenMP default.
inline void set_thread_count(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Runs body(i) for i in [0, count). Iterations must write disjoint data.
template <class Body>
void parallel_for(std::size_t count, Body&& body) {
#ifdef _OPENMP
    const long long m = static_cast<long long>(count);
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < m; ++i) body(static_cast<std::size_t>(i));
#else
    for (std::size_t i = 0; i < count; ++i) body(i);
#endif
}

}  // namespace roitomo
