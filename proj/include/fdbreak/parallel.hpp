#pragma once

#include <cstddef>

#ifdef FDBREAK_HAVE_OPENMP
#include <omp.h>
#endif

namespace fdbreak {

// Caps the worker count used by the Monte Carlo loops. Results never depend
// on it: every parallel loop writes to index-addressed slots.
inline void set_thread_count(int threads) {
#ifdef FDBREAK_HAVE_OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

inline int thread_count() {
#ifdef FDBREAK_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

template <class Fn>
void parallel_for(std::ptrdiff_t count, Fn&& fn) {
#ifdef FDBREAK_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(i);
#else
    for (std::ptrdiff_t i = 0; i < count; ++i) fn(i);
#endif
}

}  // namespace fdbreak
