#ifndef ALMT_PARALLEL_HPP
#define ALMT_PARALLEL_HPP

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace almt::par {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// Runs f(i) for i in [0, n). Each index must be independent of the others;
// results then do not depend on the thread count.
template <class F>
void for_each_index(std::ptrdiff_t n, F&& f) {
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) f(i);
}

}  // namespace almt::par

#endif
